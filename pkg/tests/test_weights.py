import logging

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from boostvi.gaussmix import gaussian_log_density, mixture_extend, mixture_log_density
from boostvi.oracle import Grid, quadrature_discrepancy
from boostvi.targets import make_gmm
from boostvi.weights import SgdConfig, solve_alpha

from conftest import gauss1d, single

BOX = [[-15.0, 18.0]]


def quadrature_objective(q, h, f, alpha):
    return quadrature_discrepancy(mixture_extend(q, h, alpha), f, BOX, 8001)


def quadrature_gradient(q, h, f):
    """Exact d/d alpha of the discrepancy: int (h - q) log(q_alpha / f)."""
    grid = Grid(BOX, 8001)
    w = np.exp(grid.log_weights)
    lq = mixture_log_density(q, grid.points)
    lh = gaussian_log_density(h, grid.points)
    lf = f.log_f(grid.points)

    def grad(alpha, k):
        if alpha <= 0:
            la = lq
        elif alpha >= 1:
            la = lh
        else:
            la = np.logaddexp(np.log1p(-alpha) + lq, np.log(alpha) + lh)
        return float(np.sum(w * (np.exp(lh) - np.exp(lq)) * (la - lf)))
    return grad


def test_config_validation():
    for bad in ({"n": 1}, {"b": 0.0}, {"eps": -1e-4}, {"max_iters": 0}):
        with pytest.raises(ValueError):
            SgdConfig(**bad)


def test_derived_weight_matches_quadrature_argmin(gaussian_triple):
    q, h, f = gaussian_triple
    oracle = minimize_scalar(lambda a: quadrature_objective(q, h, f, a), bounds=(0, 1),
                             method="bounded", options={"xatol": 1e-6}).x
    assert oracle == pytest.approx(0.2, abs=1e-3)
    res = solve_alpha(q, h, f, SgdConfig(), seed=0)
    assert res.converged
    assert res.alpha == pytest.approx(0.2, abs=0.05)


def test_equal_mixture_target():
    f = make_gmm([0.5, 0.5], [[-2.0], [2.0]], [[[1.0]], [[1.0]]])
    res = solve_alpha(single(-2.0, 1.0), gauss1d(2.0, 1.0), f, SgdConfig(), seed=3)
    assert res.alpha == pytest.approx(0.5, abs=0.05)


def test_flat_objective_terminates():
    f = make_gmm([1.0], [[0.0]], [[[1.0]]])
    res = solve_alpha(single(0.0, 1.0), gauss1d(0.0, 1.0), f, SgdConfig(), seed=1)
    assert res.converged and 0.0 <= res.alpha <= 1.0


def test_iterates_stay_in_unit_interval(gaussian_triple):
    q, _, f = gaussian_triple
    # a far-off component gets pushed to the boundary hard
    res = solve_alpha(q, gauss1d(-20.0, 0.1), f, SgdConfig(b=5.0), seed=2)
    assert all(0.0 <= a <= 1.0 for _, a, _ in res.trace)
    assert res.alpha == 0.0


def test_exact_gradients_reach_the_argmin(gaussian_triple):
    q, h, f = gaussian_triple
    res = solve_alpha(q, h, f, SgdConfig(b=1.0), grad=quadrature_gradient(q, h, f))
    assert res.converged
    assert res.alpha == pytest.approx(0.2, abs=1e-3)


def test_trace_follows_the_update_rule(gaussian_triple):
    q, h, f = gaussian_triple
    cfg = SgdConfig(b=0.3)
    res = solve_alpha(q, h, f, cfg, grad=quadrature_gradient(q, h, f))
    prev = 0.0
    for k, a, g in res.trace:
        assert a == pytest.approx(min(max(prev - cfg.b / k * g, 0.0), 1.0), abs=1e-15)
        prev = a
    assert abs(res.trace[-1][1] - res.trace[-2][1]) < cfg.eps


def test_seed_determinism(gaussian_triple):
    q, h, f = gaussian_triple
    a = solve_alpha(q, h, f, SgdConfig(), seed=(4, 2))
    b = solve_alpha(q, h, f, SgdConfig(), seed=(4, 2))
    assert a.trace == b.trace
    c = solve_alpha(q, h, f, SgdConfig(seed=7))
    d = solve_alpha(q, h, f, SgdConfig(seed=7))
    assert c.trace == d.trace


def test_objective_does_not_increase(gaussian_triple):
    q, h, f = gaussian_triple
    for seed in range(5):
        res = solve_alpha(q, h, f, SgdConfig(), seed=seed)
        assert quadrature_objective(q, h, f, res.alpha) <= quadrature_objective(q, h, f, 0.0) + 0.02


def test_iteration_cap_is_flagged_not_raised(gaussian_triple, caplog):
    q, h, f = gaussian_triple
    with caplog.at_level(logging.WARNING, logger="boostvi.weights"):
        res = solve_alpha(q, h, f, SgdConfig(max_iters=3, eps=1e-12), seed=0)
    assert not res.converged and res.iters == 3
    assert "no convergence" in caplog.text
