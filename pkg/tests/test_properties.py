"""Property-based checks of invariants that should hold for any input."""
import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from boostvi.estimators import mix_log_density
from boostvi.gaussmix import (GaussianComponent, MixtureApproximation, loads_mixture,
                              dumps_mixture, mixture_extend, mixture_log_density)
from boostvi.oracle import gaussian_kl
from boostvi.search import SearchConfig, build_component, LaplacePeak, stabilized_log_residual
from boostvi.targets import make_gmm
from boostvi.weights import SgdConfig, solve_alpha

finite = st.floats(-20, 20, allow_nan=False)
alphas = st.floats(0.0, 1.0)


@st.composite
def components(draw, d=None):
    d = draw(st.integers(1, 3)) if d is None else d
    mean = draw(arrays(float, d, elements=finite))
    A = draw(arrays(float, (d, d), elements=st.floats(-2, 2)))
    cov = A @ A.T + draw(st.floats(0.05, 5.0)) * np.eye(d)
    return GaussianComponent.from_cov(mean, cov)


@st.composite
def mixtures(draw, d=None):
    d = draw(st.integers(1, 3)) if d is None else d
    k = draw(st.integers(1, 4))
    raw = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k)))
    return MixtureApproximation(raw / raw.sum(), tuple(draw(components(d)) for _ in range(k)))


@given(mixtures(), alphas, st.data())
@settings(max_examples=60, deadline=None)
def test_extend_keeps_weights_on_simplex(q, alpha, data):
    h = data.draw(components(q.dim))
    out = mixture_extend(q, h, alpha)
    assert np.all(out.weights > 0)
    assert abs(out.weights.sum() - 1.0) < 1e-12
    assert out.k <= q.k + 1


@given(mixtures(), st.data())
@settings(max_examples=40, deadline=None)
def test_mixture_density_between_component_extremes(q, data):
    x = data.draw(arrays(float, (5, q.dim), elements=finite))
    per = np.stack([mixture_log_density(MixtureApproximation.single(c), x) for c in q.components])
    lq = mixture_log_density(q, x)
    assert np.all(lq <= per.max(axis=0) + 1e-9)
    assert np.all(lq >= per.min(axis=0) - 1e-9)


@given(mixtures())
@settings(max_examples=40, deadline=None)
def test_serialisation_round_trip_is_exact(q):
    text = dumps_mixture(q)
    assert dumps_mixture(loads_mixture(text)) == text
    back = loads_mixture(text)
    assert np.array_equal(back.weights, q.weights)


@given(st.integers(1, 3).flatmap(lambda d: st.tuples(components(d), components(d))))
@settings(max_examples=60, deadline=None)
def test_gaussian_kl_nonnegative(pair):
    a, b = pair
    assert gaussian_kl(a, b) >= -1e-10
    assert abs(gaussian_kl(a, a)) < 1e-9


@given(mixtures(d=1), st.data(), alphas)
@settings(max_examples=40, deadline=None)
def test_mix_log_density_matches_direct_sum(q, data, alpha):
    h = data.draw(components(1))
    x = np.linspace(-5, 5, 7)[:, None]
    direct = np.log((1 - alpha) * np.exp(mixture_log_density(q, x))
                    + alpha * np.exp(mixture_log_density(MixtureApproximation.single(h), x)))
    got = mix_log_density(q, h, alpha, x)
    ok = np.isfinite(direct)
    np.testing.assert_allclose(got[ok], direct[ok], rtol=1e-9, atol=1e-9)


@given(mixtures(d=1), components(1), arrays(float, 20, elements=st.floats(-60, 60)))
@settings(max_examples=60, deadline=None)
def test_stabilized_residual_bounded(q, c, x):
    f = make_gmm([1.0], [c.mean], [c.cov])
    cfg = SearchConfig()
    log_a = np.log(cfg.a)
    vals = stabilized_log_residual(q, f, cfg, x)
    bound = np.maximum(np.abs(f.log_f(x)), abs(log_a)) - log_a
    assert np.all(np.isfinite(vals))
    assert np.all(np.abs(vals) <= bound + 1e-9)


@given(st.integers(1, 4).flatmap(lambda d: arrays(float, (d, d), elements=st.floats(-3, 3))),
       st.floats(0.5, 4.0))
@settings(max_examples=60, deadline=None)
def test_built_components_are_positive_definite(A, lam):
    H = A @ A.T + 1e-2 * np.eye(len(A))
    c = build_component(LaplacePeak(np.zeros(len(A)), H, 0.0), SearchConfig(lam=lam))
    assert np.all(np.linalg.eigvalsh(c.cov) > 0)


@given(st.floats(-5, 5), st.floats(0.1, 3.0), st.floats(0.01, 2.0))
@settings(max_examples=60, deadline=None)
def test_sgd_iterates_stay_in_unit_interval(g_shift, g_slope, b):
    def grad(alpha, k):
        return g_slope * (alpha - 0.5) + g_shift

    res = solve_alpha(None, None, None, SgdConfig(b=b, max_iters=500), grad=grad)
    assert all(0.0 <= a <= 1.0 for _, a, _ in res.trace)
    assert 0.0 <= res.alpha <= 1.0
