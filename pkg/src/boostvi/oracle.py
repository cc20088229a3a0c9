"""Reference posteriors and accuracy metrics.

Grid quadrature covers d <= 2; above that a random-walk Metropolis chain
provides the reference mean.
"""
import csv
import json
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import logsumexp

from .gaussmix import mixture_log_density, mixture_moments
from ._random import as_generator

log = logging.getLogger(__name__)

BOUNDARY_MASS_LIMIT = 1e-4


class OracleError(RuntimeError):
    pass


@dataclass
class ReferencePosterior:
    source: str
    mean: np.ndarray
    cov: Optional[np.ndarray] = None
    samples: Optional[np.ndarray] = None
    log_normalizer: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"source": self.source, "mean": self.mean.tolist(),
               "diagnostics": self.diagnostics}
        if self.cov is not None:
            out["cov"] = self.cov.tolist()
        if self.log_normalizer is not None:
            out["log_normalizer"] = self.log_normalizer
        return out

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def save_samples(self, path):
        if self.samples is None:
            raise OracleError("reference has no samples")
        write_points_csv(path, self.samples)


def write_points_csv(path, points, names=None):
    points = np.atleast_2d(points)
    names = names or [f"x{i}" for i in range(points.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in points:
            w.writerow([repr(float(v)) for v in row])


# --------------------------------------------------------------------------
# quadrature
# --------------------------------------------------------------------------

def _trapezoid_weights(nodes):
    nodes = np.asarray(nodes, dtype=float)
    w = np.empty_like(nodes)
    gaps = np.diff(nodes)
    if np.any(gaps <= 0):
        raise ValueError("grid nodes must be strictly increasing")
    w[0] = gaps[0] / 2.0
    w[-1] = gaps[-1] / 2.0
    w[1:-1] = (gaps[:-1] + gaps[1:]) / 2.0
    return w


class Grid:
    """Tensor trapezoid rule on a box in one or two dimensions."""

    def __init__(self, box, grid_points):
        box = np.atleast_2d(np.asarray(box, dtype=float))
        d = box.shape[0]
        if d > 2:
            raise OracleError("grid quadrature supports at most two dimensions")
        if np.isscalar(grid_points) or np.ndim(grid_points) == 0:
            if int(grid_points) < 2:
                raise ValueError("need at least two grid points per axis")
            axes = [np.linspace(lo, hi, int(grid_points)) for lo, hi in box]
        else:
            axes = [np.asarray(a, dtype=float) for a in grid_points]
            if d == 1 and len(axes) != 1 and np.ndim(grid_points) == 1:
                axes = [np.asarray(grid_points, dtype=float)]
        self.axes = axes
        self.dim = d
        mesh = np.meshgrid(*axes, indexing="ij")
        self.points = np.column_stack([m.ravel() for m in mesh])
        wts = [_trapezoid_weights(a) for a in axes]
        W = wts[0] if d == 1 else np.outer(wts[0], wts[1])
        self.log_weights = np.log(W.ravel())
        edge = np.zeros(W.shape, dtype=bool)
        if d == 1:
            edge[[0, -1]] = True
        else:
            edge[[0, -1], :] = True
            edge[:, [0, -1]] = True
        self.edge = edge.ravel()

    def log_integral(self, log_values):
        return float(logsumexp(self.log_weights + log_values))


def quadrature_reference(target, box, grid_points):
    """Normaliser, mean and covariance of ``target`` by trapezoid quadrature."""
    if target.dim > 2:
        raise OracleError(f"quadrature needs d <= 2, target has d = {target.dim}")
    grid = Grid(box, grid_points)
    if grid.dim != target.dim:
        raise ValueError("box dimension does not match the target")
    lf = target.log_f(grid.points)
    log_z = grid.log_integral(lf)
    p = np.exp(grid.log_weights + lf - log_z)
    boundary = float(p[grid.edge].sum())
    if boundary > BOUNDARY_MASS_LIMIT:
        raise OracleError(f"box too small: {boundary:.2e} of the mass sits on its boundary")
    mean = p @ grid.points
    centred = grid.points - mean
    cov = (centred * p[:, None]).T @ centred
    return ReferencePosterior("quadrature-grid", mean, cov, log_normalizer=log_z,
                              diagnostics={"boundary_mass": boundary,
                                           "n_points": int(len(p))})


def quadrature_kl(q, target, box, grid_points, log_normalizer=None):
    """KL(q || p) on a grid; the normaliser is taken from the grid unless given."""
    grid = Grid(box, grid_points)
    lf = target.log_f(grid.points)
    lq = mixture_log_density(q, grid.points)
    if log_normalizer is None:
        log_normalizer = grid.log_integral(lf)
    qw = np.exp(grid.log_weights + lq)
    with np.errstate(invalid="ignore"):
        integrand = np.where(qw > 0, qw * (lq - lf), 0.0)
    return float(integrand.sum() + log_normalizer * qw.sum())


def quadrature_discrepancy(q, target, box, grid_points):
    """Effective discrepancy ``int q log(q / f)`` on a grid."""
    grid = Grid(box, grid_points)
    lf = target.log_f(grid.points)
    lq = mixture_log_density(q, grid.points)
    qw = np.exp(grid.log_weights + lq)
    with np.errstate(invalid="ignore"):
        return float(np.where(qw > 0, qw * (lq - lf), 0.0).sum())


# --------------------------------------------------------------------------
# random-walk Metropolis
# --------------------------------------------------------------------------

def batch_means_se(series, n_batches=50):
    """Standard error of the mean of a correlated series by batch means."""
    series = np.asarray(series, dtype=float)
    n = series.shape[0]
    size = n // n_batches
    if size < 1:
        raise ValueError("series too short for batch means")
    batches = series[: size * n_batches].reshape((n_batches, size) + series.shape[1:]).mean(axis=1)
    return batches.std(axis=0, ddof=1) / np.sqrt(n_batches)


def covariance_se(samples, n_batches=50):
    """Batch-means standard errors of each entry of the sample covariance."""
    samples = np.asarray(samples, dtype=float)
    centred = samples - samples.mean(axis=0)
    products = centred[:, :, None] * centred[:, None, :]
    return batch_means_se(products, n_batches)


def mh_reference(target, n_samples, step_scales=None, burn_in=None, seed=0, init=None,
                 n_chains=4, adapt_every=100, target_accept=0.25):
    """Random-walk Metropolis reference with burn-in step-size adaptation.

    ``n_chains`` chains advance in lockstep so the target is evaluated in
    batches. During burn-in the per-coordinate proposal scales follow the
    running posterior spread and a common multiplier is tuned towards
    ``target_accept``; both are frozen afterwards. ``n_samples`` counts the
    retained draws over all chains.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    d = target.dim
    rng = as_generator(seed)
    per_chain = int(np.ceil(n_samples / n_chains))
    burn_in = per_chain // 2 if burn_in is None else int(burn_in)
    if init is None:
        init = np.zeros(d) if target.box is None else 0.5 * (target.box[0] + target.box[1])
    x = np.array(np.broadcast_to(np.asarray(init, dtype=float), (n_chains, d)))
    lp = target.log_f(x)
    if not np.all(np.isfinite(lp)):
        raise OracleError("initial point has zero target density")
    shape = np.ones(d) if step_scales is None else np.broadcast_to(np.asarray(step_scales, float), (d,)).copy()
    log_mult = np.log(2.38 / np.sqrt(d)) if step_scales is None else 0.0
    if step_scales is None:
        shape *= 0.1

    history = np.empty((burn_in, n_chains, d))
    window_acc = 0
    n_adapt = 0
    for it in range(burn_in):
        prop = x + rng.standard_normal((n_chains, d)) * (np.exp(log_mult) * shape)
        lp_prop = target.log_f(prop)
        accept = np.log(rng.uniform(size=n_chains)) < lp_prop - lp
        x[accept] = prop[accept]
        lp[accept] = lp_prop[accept]
        window_acc += int(accept.sum())
        history[it] = x
        if (it + 1) % adapt_every == 0:
            n_adapt += 1
            rate = window_acc / (adapt_every * n_chains)
            log_mult += (rate - target_accept) * 2.0 / np.sqrt(n_adapt)
            window_acc = 0
            if it + 1 >= 10 * adapt_every:
                recent = history[(it + 1) // 2: it + 1].reshape(-1, d)
                sd = recent.std(axis=0)
                if np.all(sd > 0):
                    shape = sd
    scales = np.exp(log_mult) * shape

    chain = np.empty((per_chain, n_chains, d))
    n_acc = np.zeros(n_chains)
    for it in range(per_chain):
        prop = x + rng.standard_normal((n_chains, d)) * scales
        lp_prop = target.log_f(prop)
        accept = np.log(rng.uniform(size=n_chains)) < lp_prop - lp
        x[accept] = prop[accept]
        lp[accept] = lp_prop[accept]
        n_acc += accept
        chain[it] = x
    rates = n_acc / per_chain
    if np.any(rates < 0.05) or np.any(rates > 0.6):
        raise OracleError(f"acceptance rates {np.round(rates, 3).tolist()} outside [0.05, 0.6]")
    # chain-major order so each chain stays contiguous
    samples = chain.transpose(1, 0, 2).reshape(-1, d)
    per_chain_means = chain.mean(axis=0)
    mean = samples.mean(axis=0)
    se = np.sqrt(sum(batch_means_se(chain[:, c, :]) ** 2 for c in range(n_chains))) / n_chains
    var = samples.var(axis=0)
    ess = np.where(se > 0, var / np.maximum(se, 1e-300) ** 2, float(len(samples)))
    diag = {"acceptance": rates.tolist(), "step_scales": scales.tolist(),
            "mean_se": se.tolist(), "ess": ess.tolist(), "n_chains": n_chains,
            "burn_in": burn_in, "chain_means": per_chain_means.tolist()}
    return ReferencePosterior("mh-samples", mean, np.cov(samples, rowvar=False).reshape(d, d),
                              samples=samples, diagnostics=diag)


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

def rem(q, ref):
    """Relative l1 error of the mixture mean against a reference mean.

    ``ref`` is a :class:`ReferencePosterior` or a mean vector.
    """
    ref_mean = np.asarray(ref.mean if isinstance(ref, ReferencePosterior) else ref, dtype=float)
    mean, _ = mixture_moments(q)
    if mean.shape != ref_mean.shape:
        raise ValueError("mixture and reference dimensions differ")
    denom = np.abs(ref_mean).sum()
    if denom == 0:
        raise ValueError("reference mean has zero l1 norm")
    return float(np.abs(mean - ref_mean).sum() / denom)


def gaussian_kl(a, b):
    """Closed-form KL(N_a || N_b)."""
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    d = a.dim
    Lb = (b.chol, True)
    trace_term = np.trace(cho_solve(Lb, a.cov))
    diff = b.mean - a.mean
    maha = diff @ cho_solve(Lb, diff)
    logdet = 2.0 * (np.sum(np.log(np.diag(b.chol))) - np.sum(np.log(np.diag(a.chol))))
    return float(0.5 * (trace_term + maha - d + logdet))
