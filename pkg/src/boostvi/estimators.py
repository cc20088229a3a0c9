"""Monte Carlo estimators of the ELBO and of its derivative in the mixing weight.

Every density ratio is formed as a difference of log-densities.
"""
from dataclasses import dataclass

import numpy as np

from .gaussmix import gaussian_log_density, mixture_log_density, mixture_sample
from ._random import substreams

NONFINITE_LIMIT = 0.01


class SupportMismatchError(FloatingPointError):
    """Too many Monte Carlo draws landed where the target density is zero."""


@dataclass(frozen=True)
class MCEstimate:
    value: float
    std_error: float
    n: int
    n_nonfinite: int = 0


def _summarise(samples, what):
    samples = np.asarray(samples, dtype=float)
    ok = np.isfinite(samples)
    bad = int(samples.size - ok.sum())
    if bad > NONFINITE_LIMIT * samples.size:
        raise SupportMismatchError(
            f"{what}: {bad}/{samples.size} draws non-finite; "
            "the approximation puts mass where the target density is zero")
    vals = samples[ok]
    if vals.size < 2:
        raise SupportMismatchError(f"{what}: fewer than two finite draws")
    return MCEstimate(float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(vals.size)),
                      int(vals.size), bad)


def mix_log_density(q_prev, h, alpha, x, log_q=None, log_h=None):
    """log((1 - alpha) q_prev(x) + alpha h(x)), skipping a vanished term."""
    if alpha <= 0.0:
        return mixture_log_density(q_prev, x) if log_q is None else log_q
    if alpha >= 1.0:
        return gaussian_log_density(h, x) if log_h is None else log_h
    if log_q is None:
        log_q = mixture_log_density(q_prev, x)
    if log_h is None:
        log_h = gaussian_log_density(h, x)
    return np.logaddexp(np.log1p(-alpha) + log_q, np.log(alpha) + log_h)


def gamma(q_prev, h, alpha, target, x):
    """log((1 - alpha) q_prev + alpha h) - log f at ``x``.

    ``+inf`` where the target vanishes but the mixture does not.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha!r}")
    with np.errstate(invalid="ignore"):
        return mix_log_density(q_prev, h, alpha, x) - target.log_f(x)


def elbo_estimate(q, target, n, seed):
    """Monte Carlo ELBO ``mean(log f - log q)`` over draws from ``q``.

    The effective discrepancy is the negative of the returned value.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    theta = mixture_sample(q, n, seed)
    with np.errstate(invalid="ignore"):
        integrand = target.log_f(theta) - mixture_log_density(q, theta)
    return _summarise(integrand, "elbo_estimate")


def alpha_gradient_estimate(q_prev, h, alpha, target, n, seed):
    """Estimate d/d alpha of the effective discrepancy of (1 - alpha) q_prev + alpha h.

    Uses ``n`` draws from ``h`` and ``n`` independent draws from ``q_prev``
    (separate substreams of ``seed``) and averages ``gamma(th_h) - gamma(th_q)``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    rng_h, rng_q = substreams(seed, 2)
    th_h = _sample_gaussian(h, n, rng_h)
    th_q = mixture_sample(q_prev, n, rng_q)
    diff = gamma(q_prev, h, alpha, target, th_h) - gamma(q_prev, h, alpha, target, th_q)
    return _summarise(diff, "alpha_gradient_estimate")


def _sample_gaussian(h, n, rng):
    z = rng.standard_normal((n, h.dim))
    return h.mean + z @ h.chol.T


def mc_objective(q_prev, h, alpha, target, n, seed):
    """Effective discrepancy of the alpha-mixture with common random numbers.

    Draws fixed samples from ``h`` and ``q_prev`` (the same substreams as
    :func:`alpha_gradient_estimate`) and returns
    ``(1 - alpha) mean_q gamma + alpha mean_h gamma``, so that finite
    differences in ``alpha`` at a fixed seed are smooth.
    """
    rng_h, rng_q = substreams(seed, 2)
    th_h = _sample_gaussian(h, n, rng_h)
    th_q = mixture_sample(q_prev, n, rng_q)
    g_h = gamma(q_prev, h, alpha, target, th_h)
    g_q = gamma(q_prev, h, alpha, target, th_q)
    return float((1.0 - alpha) * np.mean(g_q) + alpha * np.mean(g_h))
