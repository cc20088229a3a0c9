"""Finding the next mixture component from a peak of the log-residual.

The residual ``log((f + a) / (q_prev + a))`` is maximised with L-BFGS from a
draw of ``q_prev``; the new component is centred at the peak with covariance
``(lam / 2) H^-1``, ``H`` being the finite-difference Hessian of the negative
residual there.
"""
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from .gaussmix import (GaussianComponent, _as_batch, mixture_log_density,
                       mixture_log_density_grad, mixture_sample)
from ._random import substreams

log = logging.getLogger(__name__)


FLOOR_MARGIN = 4.0


class DegenerateHessianError(ArithmeticError):
    """The residual shows no positive curvature at its stationary point."""


class PeakSearchError(RuntimeError):
    pass


class HessianRepairWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SearchConfig:
    lam: float = 1.0
    a: float = float(np.exp(-10.0))
    fd_rel_step: float = 1e-4
    hessian_mode: str = "dense"
    restarts: int = 3
    max_evals: int = 2000
    gtol: float = 1e-5
    max_redraws: int = 20
    min_curvature: float = 1e-6

    def __post_init__(self):
        for name in ("lam", "a", "fd_rel_step", "gtol", "min_curvature"):
            if not getattr(self, name) > 0:
                raise ValueError(f"SearchConfig.{name} must be positive")
        if self.hessian_mode not in ("dense", "diagonal"):
            raise ValueError("SearchConfig.hessian_mode must be 'dense' or 'diagonal'")
        if self.restarts < 1 or self.max_evals < 1 or self.max_redraws < 1:
            raise ValueError("SearchConfig.restarts, max_evals and max_redraws must be >= 1")


@dataclass
class LaplacePeak:
    location: np.ndarray
    hessian: np.ndarray
    value: float
    converged: bool = True
    grad_norm: float = 0.0
    n_evals: int = 0
    restart_values: list = field(default_factory=list)


def stabilized_log_residual(q_prev, target, cfg, x, log_scale=0.0):
    """``log(f(x) e^-s + a) - log(q_prev(x) + a)``, evaluated in log space.

    ``log_scale`` (``s``) rescales an unnormalised target before the floor
    ``a`` is added; 0 leaves ``f`` as given.
    """
    log_a = np.log(cfg.a)
    batch, single = _as_batch(x, target.dim)
    lf = np.asarray(target.log_f_batch(batch), dtype=float) - log_scale
    lq = mixture_log_density(q_prev, batch)
    out = np.logaddexp(lf, log_a) - np.logaddexp(lq, log_a)
    return float(out[0]) if single else out


def _residual_grad(q_prev, target, cfg, x, log_scale):
    """Analytic gradient of the residual at a single point (needs grad log f)."""
    log_a = np.log(cfg.a)
    lf = float(target.log_f(x)) - log_scale
    lq = float(mixture_log_density(q_prev, x))
    pf = np.exp(lf - np.logaddexp(lf, log_a))
    pq = np.exp(lq - np.logaddexp(lq, log_a))
    gq = mixture_log_density_grad(q_prev, x)
    gf = target.grad_log_f(x) if pf > 0 else np.zeros_like(x)
    return pf * gf - pq * gq


def fd_steps(x, rel_step):
    return rel_step * (1.0 + np.abs(x))


def fd_gradient(fun_batch, x, rel_step=1e-4):
    """Central-difference gradient; ``fun_batch`` maps ``(n, d)`` to ``(n,)``."""
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    h = fd_steps(x, rel_step)
    E = np.diag(h)
    vals = fun_batch(np.vstack([x + E, x - E]))
    return (vals[:d] - vals[d:]) / (2.0 * h)


def fd_hessian(fun_batch, x, rel_step=1e-4, mode="dense"):
    """Central-difference Hessian, evaluated as one batch of stencil points.

    ``mode='diagonal'`` only fills the diagonal (``2d + 1`` evaluations);
    ``'dense'`` adds the four-point mixed stencils and symmetrises.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    h = fd_steps(x, rel_step)
    E = np.diag(h)
    pts = [x[None, :], x + E, x - E]
    pairs = []
    if mode == "dense":
        pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
        if pairs:
            ii, jj = np.array(pairs).T
            pts += [x + E[ii] + E[jj], x + E[ii] - E[jj], x - E[ii] + E[jj], x - E[ii] - E[jj]]
    vals = fun_batch(np.vstack(pts))
    f0 = vals[0]
    fp, fm = vals[1:1 + d], vals[1 + d:1 + 2 * d]
    H = np.diag((fp - 2.0 * f0 + fm) / (h * h))
    if pairs:
        m = len(pairs)
        off = 1 + 2 * d
        pp, pm, mp, mm = (vals[off + s * m: off + (s + 1) * m] for s in range(4))
        ii, jj = np.array(pairs).T
        mixed = (pp - pm - mp + mm) / (4.0 * h[ii] * h[jj])
        H[ii, jj] = mixed
        H[jj, ii] = mixed
    return H


def find_peak(q_prev, target, cfg, seed, log_scale=0.0):
    """Locate a local maximum of the stabilised log-residual.

    Each of ``cfg.restarts`` runs starts from a fresh draw of ``q_prev`` and
    minimises the negative residual with L-BFGS-B (box-bounded when the
    target declares a box). A start that is non-finite, or a run that ends
    on the plateau where both densities sit far below ``a``, is redrawn (up
    to ``cfg.max_redraws`` times). The run with the highest residual wins;
    ties go to the earliest restart. ``converged`` is False when the winner's
    gradient norm is not below ``cfg.gtol``.
    """
    def neg_batch(x):
        return -stabilized_log_residual(q_prev, target, cfg, x, log_scale)

    counter = {"evals": 0}

    def fun(x):
        counter["evals"] += 1
        return float(neg_batch(x[None, :])[0])

    if target.grad_log_f_batch is not None:
        def jac(x):
            return -_residual_grad(q_prev, target, cfg, x, log_scale)
    else:
        def jac(x):
            counter["evals"] += 2 * x.shape[0]
            return fd_gradient(neg_batch, x, cfg.fd_rel_step)

    bounds = None
    if target.box is not None:
        bounds = list(zip(target.box[0], target.box[1]))

    log_a = np.log(cfg.a)

    def on_floor(x):
        # both densities far below the floor: a plateau, not a peak
        lf = float(target.log_f(x)) - log_scale
        lq = float(mixture_log_density(q_prev, x))
        return max(lf, lq) < log_a - FLOOR_MARGIN

    best = None
    values = []
    floor_hits = 0
    for r, rng in enumerate(substreams(seed, cfg.restarts)):
        found = None
        for _ in range(cfg.max_redraws):
            theta0 = mixture_sample(q_prev, 1, rng)[0]
            if bounds is not None:
                theta0 = np.clip(theta0, target.box[0], target.box[1])
            if not np.isfinite(fun(theta0)):
                continue
            with np.errstate(over="ignore", invalid="ignore"):
                res = minimize(fun, theta0, jac=jac, method="L-BFGS-B", bounds=bounds,
                               options={"maxfun": cfg.max_evals, "maxiter": cfg.max_evals,
                                        "gtol": cfg.gtol, "ftol": 0.0})
            x = res.x if np.isfinite(res.fun) else theta0
            if on_floor(x):
                floor_hits += 1
                continue
            found = x
            break
        if found is None:
            continue
        value = -fun(found)
        values.append(value)
        if best is None or value > best[1]:
            best = (found, value)
    if best is None:
        raise PeakSearchError(
            f"no restart reached a residual peak ({floor_hits} runs ended on the "
            f"stabilisation floor, {cfg.restarts * cfg.max_redraws} attempts)")
    x, value = best
    g = jac(x)
    if bounds is not None:
        # components pinned at an active bound do not count against convergence
        at_lo = (x <= target.box[0]) & (g > 0)
        at_hi = (x >= target.box[1]) & (g < 0)
        g = np.where(at_lo | at_hi, 0.0, g)
    gnorm = float(np.linalg.norm(g))
    converged = gnorm < cfg.gtol
    if not converged:
        log.debug("find_peak: gradient norm %.3g above tolerance", gnorm)
    H = fd_hessian(neg_batch, x, cfg.fd_rel_step, cfg.hessian_mode)
    counter["evals"] += 1 + 2 * len(x) + (2 * len(x) * (len(x) - 1) if cfg.hessian_mode == "dense" else 0)
    return LaplacePeak(x, H, value, converged, gnorm, counter["evals"], values)


def repair_hessian(H, min_curvature=1e-6):
    """Floor small or negative eigenvalues of a symmetric matrix.

    Returns ``(eigenvalues, eigenvectors, repaired)``; eigenvalues below
    ``max(1e-6, 1e-6 * largest)`` are raised to that floor.
    """
    H = 0.5 * (H + H.T)
    evals, evecs = np.linalg.eigh(H)
    top = evals[-1]
    if not np.isfinite(top) or top <= min_curvature:
        raise DegenerateHessianError(
            f"residual has no positive curvature at its peak (largest eigenvalue {top:.3g})")
    tau = max(1e-6, 1e-6 * top)
    repaired = bool(evals[0] < tau)
    return np.maximum(evals, tau), evecs, repaired


def build_component(peak, cfg):
    """Gaussian ``N(eta, (lam / 2) H^-1)`` from a Laplace peak.

    A Hessian that is not positive definite is repaired by eigenvalue
    flooring and a :class:`HessianRepairWarning` is issued.
    """
    H = 0.5 * (peak.hessian + peak.hessian.T)
    evals, evecs, repaired = repair_hessian(H, cfg.min_curvature)
    if repaired:
        warnings.warn(f"Hessian repaired: smallest eigenvalue raised to {evals[0]:.3g}",
                      HessianRepairWarning, stacklevel=2)
        cov = 0.5 * cfg.lam * (evecs / evals) @ evecs.T
    else:
        cov = 0.5 * cfg.lam * cho_solve(cho_factor(H, lower=True), np.eye(H.shape[0]))
    return GaussianComponent.from_cov(peak.location, cov)
