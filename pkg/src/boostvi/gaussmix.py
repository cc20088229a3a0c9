"""Dense Gaussians and finite Gaussian mixtures.

Covariances are kept together with their lower Cholesky factor; every
density evaluation goes through triangular solves, never an explicit inverse.
Points may be passed as a single ``(d,)`` vector (scalar result) or as an
``(n, d)`` batch (vector result).
"""
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve

from . import kernels
from ._random import as_generator

PD_REPAIR_DOUBLINGS = 10


class DimensionError(ValueError):
    pass


def _as_batch(x, d):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if x.ndim == 0:
        x = x.reshape(1)
        single = True
    batch = np.atleast_2d(x)
    if d == 1 and x.ndim == 1 and x.shape[0] != 1:
        # a flat vector of 1-D points
        batch = x.reshape(-1, 1)
        single = False
    if batch.shape[-1] != d:
        raise DimensionError(f"expected points of dimension {d}, got shape {x.shape}")
    return np.ascontiguousarray(batch), single


def _unbatch(values, single):
    return float(values[0]) if single else values


def cholesky_with_jitter(cov):
    """Lower Cholesky factor of ``cov``, adding diagonal jitter if needed.

    Returns ``(chol, cov_used)`` where ``cov_used`` is the (possibly jittered)
    matrix actually factorised. Jitter starts at ``1e-9 * trace / d`` and
    doubles up to ten times.
    """
    cov = np.array(cov, dtype=float, ndmin=2)
    if cov.shape[0] != cov.shape[1]:
        raise DimensionError(f"covariance must be square, got {cov.shape}")
    if not np.all(np.isfinite(cov)):
        raise ValueError("covariance has non-finite entries")
    cov = 0.5 * (cov + cov.T)
    d = cov.shape[0]
    try:
        return np.linalg.cholesky(cov), cov
    except np.linalg.LinAlgError:
        pass
    delta = 1e-9 * max(np.trace(cov), 0.0) / d
    if delta <= 0.0:
        delta = 1e-12
    for _ in range(PD_REPAIR_DOUBLINGS + 1):
        jittered = cov + delta * np.eye(d)
        try:
            return np.linalg.cholesky(jittered), jittered
        except np.linalg.LinAlgError:
            delta *= 2.0
    raise np.linalg.LinAlgError("covariance is not positive definite even after jitter")


@dataclass(frozen=True, eq=False)
class GaussianComponent:
    """A multivariate normal N(mean, cov) with cached lower factor ``chol``."""

    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray = field(repr=False)

    @classmethod
    def from_cov(cls, mean, cov):
        mean = np.array(mean, dtype=float, ndmin=1)
        if not np.all(np.isfinite(mean)):
            raise ValueError("mean has non-finite entries")
        chol, cov = cholesky_with_jitter(cov)
        if cov.shape[0] != mean.shape[0]:
            raise DimensionError("mean and covariance dimensions differ")
        mean.setflags(write=False)
        cov.setflags(write=False)
        chol.setflags(write=False)
        return cls(mean, cov, chol)

    @classmethod
    def isotropic(cls, mean, scale):
        mean = np.array(mean, dtype=float, ndmin=1)
        return cls.from_cov(mean, scale * np.eye(mean.shape[0]))

    @property
    def dim(self):
        return self.mean.shape[0]

    def log_density(self, x):
        return gaussian_log_density(self, x)

    def sample(self, n, seed):
        return mixture_sample(MixtureApproximation.single(self), n, seed)


@dataclass(frozen=True, eq=False)
class MixtureApproximation:
    """Finite mixture ``sum_j w_j N(mu_j, Sigma_j)`` with simplex weights."""

    weights: np.ndarray
    components: tuple

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, ndmin=1)
        comps = tuple(self.components)
        if len(comps) == 0 or w.shape != (len(comps),):
            raise ValueError("need one weight per component and at least one component")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        total = w.sum()
        if abs(total - 1.0) > 1e-8:
            raise ValueError(f"weights must sum to 1, got {total!r}")
        keep = w > 0
        if not keep.all():
            # dividing again when nothing was dropped would perturb the last
            # bits and break bit-exact round trips through JSON
            w = w[keep] / w[keep].sum()
            comps = tuple(c for c, k in zip(comps, keep) if k)
        d = comps[0].dim
        if any(c.dim != d for c in comps):
            raise DimensionError("components have different dimensions")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "_log_w", np.log(w))
        object.__setattr__(self, "_means", np.ascontiguousarray(np.stack([c.mean for c in comps])))
        object.__setattr__(self, "_chols", np.ascontiguousarray(np.stack([c.chol for c in comps])))

    @classmethod
    def single(cls, component):
        return cls(np.ones(1), (component,))

    @property
    def dim(self):
        return self.components[0].dim

    @property
    def k(self):
        return len(self.components)

    def log_density(self, x):
        return mixture_log_density(self, x)


def gaussian_log_density(c, x):
    """log N(x | mu, Sigma) via the stored factor."""
    batch, single = _as_batch(x, c.dim)
    return _unbatch(kernels.gauss_logpdf(batch, c.mean, c.chol), single)


def mixture_log_density(q, x):
    """log sum_j w_j N(x | mu_j, Sigma_j), stabilised by log-sum-exp."""
    batch, single = _as_batch(x, q.dim)
    if q.k == 1:
        return _unbatch(kernels.gauss_logpdf(batch, q._means[0], q._chols[0]), single)
    return _unbatch(kernels.mixture_logpdf(batch, q._log_w, q._means, q._chols), single)


def mixture_log_density_grad(q, x):
    """Gradient of ``mixture_log_density`` with respect to ``x``."""
    batch, single = _as_batch(x, q.dim)
    comp = np.stack([lw + kernels.gauss_logpdf(batch, m, L)
                     for lw, m, L in zip(q._log_w, q._means, q._chols)])
    resp = np.exp(comp - comp.max(axis=0))
    resp /= resp.sum(axis=0)
    grad = np.zeros_like(batch)
    for j, c in enumerate(q.components):
        prec_diff = cho_solve((c.chol, True), (batch - c.mean).T).T
        grad -= resp[j][:, None] * prec_diff
    return grad[0] if single else grad


def mixture_sample(q, n, rng_seed):
    """Draw ``n`` points: pick a component by weight, then ``mu + L z``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = as_generator(rng_seed)
    idx = rng.choice(q.k, size=n, p=q.weights) if q.k > 1 else np.zeros(n, dtype=int)
    z = rng.standard_normal((n, q.dim))
    out = np.empty((n, q.dim))
    for j in range(q.k):
        sel = idx == j
        if np.any(sel):
            out[sel] = q._means[j] + z[sel] @ q._chols[j].T
    return out


def mixture_extend(q, h, alpha):
    """``(1 - alpha) q + alpha h``; components whose weight vanishes are dropped."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha!r}")
    if h.dim != q.dim:
        raise DimensionError("new component has the wrong dimension")
    w = np.append((1.0 - alpha) * q.weights, alpha)
    w = w / w.sum()
    return MixtureApproximation(w, q.components + (h,))


def mixture_moments(q):
    """Exact mean and covariance of the mixture."""
    w = q.weights
    mean = w @ q._means
    second = sum(wj * (c.cov + np.outer(c.mean, c.mean)) for wj, c in zip(w, q.components))
    cov = second - np.outer(mean, mean)
    return mean, 0.5 * (cov + cov.T)


# --------------------------------------------------------------------------
# JSON
# --------------------------------------------------------------------------

def component_to_dict(c):
    return {"mean": c.mean.tolist(), "cov": c.cov.tolist()}


def component_from_dict(obj):
    return GaussianComponent.from_cov(obj["mean"], obj["cov"])


def mixture_to_dict(q):
    return {"weights": q.weights.tolist(),
            "components": [component_to_dict(c) for c in q.components]}


def mixture_from_dict(obj):
    try:
        comps = tuple(component_from_dict(c) for c in obj["components"])
        return MixtureApproximation(np.asarray(obj["weights"], dtype=float), comps)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed mixture document: {exc}") from exc


def dumps_mixture(q):
    return json.dumps(mixture_to_dict(q), indent=2) + "\n"


def loads_mixture(text):
    return mixture_from_dict(json.loads(text))
