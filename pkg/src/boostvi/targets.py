"""Unnormalised log-posteriors: the benchmark targets and their data.

A :class:`TargetDensity` wraps a batch log-density ``log_f`` that accepts a
single ``(d,)`` point or an ``(n, d)`` batch, mirroring the mixture API.
"""
import csv
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional

import numpy as np

from . import kernels
from .gaussmix import (GaussianComponent, MixtureApproximation, _as_batch, _unbatch,
                       mixture_log_density, mixture_log_density_grad)
from ._random import as_generator

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TargetDensity:
    """An evaluable log of an unnormalised density on R^d.

    ``log_f_batch`` maps an ``(n, d)`` array to ``n`` values (``-inf`` allowed
    where the density vanishes). ``grad_log_f_batch`` is optional.
    ``box`` is an optional ``(lo, hi)`` pair of length-d arrays bounding the
    support or the region of interest.
    """

    dim: int
    log_f_batch: Callable
    log_normalizer: Optional[float] = None
    grad_log_f_batch: Optional[Callable] = None
    box: Optional[tuple] = None
    name: str = "target"
    meta: dict = field(default_factory=dict)

    def log_f(self, x):
        batch, single = _as_batch(x, self.dim)
        return _unbatch(np.asarray(self.log_f_batch(batch), dtype=float), single)

    def grad_log_f(self, x):
        if self.grad_log_f_batch is None:
            return None
        batch, single = _as_batch(x, self.dim)
        g = self.grad_log_f_batch(batch)
        return g[0] if single else g

    def log_density(self, x):
        """Normalised log-density; requires a known normaliser."""
        if self.log_normalizer is None:
            raise ValueError(f"{self.name}: log-normaliser unknown")
        return self.log_f(x) - self.log_normalizer


def _box(lo, hi, d):
    return (np.full(d, float(lo)) if np.isscalar(lo) else np.asarray(lo, float),
            np.full(d, float(hi)) if np.isscalar(hi) else np.asarray(hi, float))


# --------------------------------------------------------------------------
# toy targets
# --------------------------------------------------------------------------

def make_cauchy():
    """Cauchy density with scale 2: ``f(t) = 1 / (1 + (t/2)^2)``."""
    def log_f(x):
        return -np.log1p((x[:, 0] / 2.0) ** 2)

    def grad(x):
        t = x[:, :1]
        return -2.0 * (t / 4.0) / (1.0 + (t / 2.0) ** 2)

    return TargetDensity(1, log_f, log_normalizer=float(np.log(2.0 * np.pi)),
                         grad_log_f_batch=grad, name="cauchy")


def make_gmm(weights, means, covs):
    """Normalised Gaussian-mixture target (``log_normalizer = 0``)."""
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-8:
        raise ValueError("gmm weights must lie on the probability simplex")
    comps = tuple(GaussianComponent.from_cov(m, c) for m, c in zip(means, covs))
    mix = MixtureApproximation(weights, comps)
    return TargetDensity(mix.dim, lambda x: mixture_log_density(mix, x), log_normalizer=0.0,
                         grad_log_f_batch=lambda x: mixture_log_density_grad(mix, x),
                         name=f"gmm{mix.dim}d", meta={"mixture": mix})


GMM1D_WEIGHTS = (0.3, 0.2, 0.35, 0.15)
GMM1D_MEANS = (-8.0, -2.0, 3.0, 9.0)
GMM1D_SDS = (1.0, 0.7, 1.5, 1.0)


def make_gmm1d():
    """Four univariate Gaussians with distinct locations and scales."""
    return make_gmm(GMM1D_WEIGHTS, [[m] for m in GMM1D_MEANS], [[[s * s]] for s in GMM1D_SDS])


def make_gmm2d(seed=0, k=5):
    """Five bivariate Gaussians with random means and covariances."""
    rng = as_generator(seed)
    weights = rng.dirichlet(np.full(k, 5.0))
    means = rng.uniform(-6.0, 6.0, size=(k, 2))
    covs = []
    for _ in range(k):
        a = rng.normal(size=(2, 2))
        covs.append(0.3 * (a @ a.T) + 0.2 * np.eye(2))
    return make_gmm(weights, means, covs)


def make_banana(curvature=0.1):
    """``exp(-t1^2/200 - (t2 + B t1^2 - 100 B)^2 / 2)``; normaliser 20 pi."""
    B = float(curvature)

    def log_f(x):
        t1, t2 = x[:, 0], x[:, 1]
        return -t1 ** 2 / 200.0 - (t2 + B * t1 ** 2 - 100.0 * B) ** 2 / 2.0

    def grad(x):
        t1, t2 = x[:, 0], x[:, 1]
        u = t2 + B * t1 ** 2 - 100.0 * B
        return np.column_stack([-t1 / 100.0 - 2.0 * B * t1 * u, -u])

    return TargetDensity(2, log_f, log_normalizer=float(np.log(20.0 * np.pi)),
                         grad_log_f_batch=grad, name="banana", meta={"B": B})


# --------------------------------------------------------------------------
# sensor network localisation
# --------------------------------------------------------------------------

@dataclass(eq=False)
class SensorModel:
    """Observed sensor network: 3 anchors plus ``num_sensors - 3`` unknowns.

    ``Z`` is the symmetric 0/1 observation indicator, ``Y`` the measured
    distances (0 where unobserved). Rows/columns 0..2 are the anchors.
    """

    anchors: np.ndarray
    Z: np.ndarray
    Y: np.ndarray
    R: float = 0.3
    sigma: float = 0.02
    box: tuple = (-1.0, 2.0)
    truth: Optional[np.ndarray] = None

    def __post_init__(self):
        self.anchors = np.asarray(self.anchors, dtype=float).reshape(-1, 2)
        self.Z = np.asarray(self.Z, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        N = self.Z.shape[0]
        if self.anchors.shape[0] != 3:
            raise ValueError("exactly 3 anchor sensors are required")
        if self.Z.shape != (N, N) or self.Y.shape != (N, N) or N < 4:
            raise ValueError("Z and Y must be square and cover at least 4 sensors")
        if not np.array_equal(self.Z, self.Z.T) or np.any(np.diag(self.Z) != 0):
            raise ValueError("Z must be symmetric with a zero diagonal")
        if not np.all(np.isin(self.Z, (0.0, 1.0))):
            raise ValueError("Z must be binary")
        if not np.allclose(self.Y, self.Y.T):
            raise ValueError("Y must be symmetric")
        if np.any((self.Y > 0) != (self.Z == 1)):
            raise ValueError("Y must be positive exactly where Z is 1")
        if not (self.R > 0 and self.sigma > 0):
            raise ValueError("R and sigma must be positive")
        if not self.box[0] < self.box[1]:
            raise ValueError("box must satisfy lo < hi")
        if self.truth is not None:
            self.truth = np.asarray(self.truth, dtype=float).reshape(N, 2)

    @property
    def num_sensors(self):
        return self.Z.shape[0]

    @property
    def dim(self):
        return 2 * (self.num_sensors - 3)

    def to_dict(self):
        out = {"anchors": self.anchors.tolist(), "Z": self.Z.astype(int).tolist(),
               "Y": self.Y.tolist(), "R": self.R, "sigma": self.sigma,
               "box": list(self.box)}
        if self.truth is not None:
            out["truth"] = self.truth.tolist()
        return out

    @classmethod
    def from_dict(cls, obj):
        return cls(anchors=obj["anchors"], Z=obj["Z"], Y=obj["Y"], R=float(obj["R"]),
                   sigma=float(obj["sigma"]), box=tuple(obj.get("box", (-1.0, 2.0))),
                   truth=obj.get("truth"))


def simulate_sensor_model(num_sensors=11, R=0.3, sigma=0.02, seed=0, box=(-1.0, 2.0),
                          locations=None):
    """Draw observations ``Z``, ``Y`` from ground-truth locations.

    Locations default to uniform draws on the unit square; the first three
    are treated as anchors.
    """
    rng = as_generator(seed)
    if locations is None:
        locations = rng.uniform(0.0, 1.0, size=(num_sensors, 2))
    locations = np.asarray(locations, dtype=float)
    N = locations.shape[0]
    Z = np.zeros((N, N))
    Y = np.zeros((N, N))
    for i in range(N):
        for j in range(i + 1, N):
            dist = np.linalg.norm(locations[i] - locations[j])
            if rng.uniform() < np.exp(-dist ** 2 / (2.0 * R ** 2)):
                Z[i, j] = Z[j, i] = 1.0
                y = rng.normal(dist, sigma)
                while y <= 0:
                    y = rng.normal(dist, sigma)
                Y[i, j] = Y[j, i] = y
    return SensorModel(locations[:3], Z, Y, R=R, sigma=sigma, box=tuple(box), truth=locations)


def load_sensor_model(path):
    with open(path) as fh:
        return SensorModel.from_dict(json.load(fh))


def save_sensor_model(model, path):
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh, indent=2)
        fh.write("\n")


def bundled_sensor_model():
    """The 11-sensor instance shipped with the package (d = 16)."""
    with resources.files("boostvi").joinpath("data/sensor_n11.json").open() as fh:
        return SensorModel.from_dict(json.load(fh))


def make_sensor(model):
    """Sensor localisation posterior under a flat prior on ``model.box``."""
    anchors = np.ascontiguousarray(model.anchors)
    Z = np.ascontiguousarray(model.Z)
    Y = np.ascontiguousarray(model.Y)
    R, sigma = float(model.R), float(model.sigma)
    lo, hi = float(model.box[0]), float(model.box[1])

    def log_f(x):
        return kernels.sensor_loglik(x, anchors, Z, Y, R, sigma, lo, hi)

    return TargetDensity(model.dim, log_f, box=_box(lo, hi, model.dim), name="sensor",
                         meta={"model": model})


# --------------------------------------------------------------------------
# Bayesian logistic regression
# --------------------------------------------------------------------------

@dataclass(eq=False)
class LogisticModel:
    """Design matrix (intercept column included) and +/-1 labels."""

    design: np.ndarray
    labels: np.ndarray
    prior_scale: float = 1.0
    columns: tuple = ()

    def __post_init__(self):
        self.design = np.asarray(self.design, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        if self.design.ndim != 2 or self.labels.shape != (self.design.shape[0],):
            raise ValueError("design must be N x p with one label per row")
        if not np.all(np.isfinite(self.design)):
            raise ValueError("design contains NaN or inf")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if self.prior_scale <= 0:
            raise ValueError("prior_scale must be positive")

    @property
    def n_obs(self):
        return self.design.shape[0]

    @property
    def dim(self):
        return self.design.shape[1]


def make_logistic(model):
    """``-|b|^2 / (2 s^2) + sum_i log g(y_i x_i.b)`` with ``g`` the logistic."""
    yX = model.labels[:, None] * model.design
    s2 = model.prior_scale ** 2

    def log_f(beta):
        z = beta @ yX.T
        return -0.5 * np.sum(beta * beta, axis=1) / s2 - np.sum(np.logaddexp(0.0, -z), axis=1)

    def grad(beta):
        z = beta @ yX.T
        # d/dz log g(z) = g(-z)
        return -beta / s2 + np.exp(-np.logaddexp(0.0, z)) @ yX

    return TargetDensity(model.dim, log_f, grad_log_f_batch=grad, name="logistic",
                         meta={"model": model})


def load_csv_dataset(path, label_column=None, prior_scale=1.0):
    """Read a header-first CSV into a :class:`LogisticModel`.

    The label column (default: the last one) must hold +/-1 or 0/1 values;
    0 is mapped to -1. An intercept column is prepended to the predictors.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    if label_column is None:
        label_idx = len(header) - 1
    elif label_column in header:
        label_idx = header.index(label_column)
    else:
        raise ValueError(f"{path}: no column named {label_column!r}")
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            values.append([float(cell) for cell in row])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    data = np.asarray(values)
    labels = data[:, label_idx]
    if np.all(np.isin(labels, (0.0, 1.0))):
        labels = np.where(labels == 0.0, -1.0, 1.0)
    elif not np.all(np.isin(labels, (-1.0, 1.0))):
        raise ValueError(f"{path}: labels must be binary (0/1 or -1/+1)")
    predictors = np.delete(data, label_idx, axis=1)
    design = np.column_stack([np.ones(len(labels)), predictors])
    cols = ("intercept",) + tuple(h for i, h in enumerate(header) if i != label_idx)
    log.info("loaded %s: %d rows, %d columns (intercept included)", path, *design.shape)
    return LogisticModel(design, labels, prior_scale=prior_scale, columns=cols)


def load_nodal(prior_scale=1.0):
    """The Nodal prostate-cancer data: 53 rows, 5 predictors plus intercept."""
    with resources.as_file(resources.files("boostvi").joinpath("data/nodal.csv")) as path:
        return load_csv_dataset(path, label_column="r", prior_scale=prior_scale)


def simulate_logistic_model(n_obs=53, n_features=6, seed=0, prior_scale=1.0):
    """Synthetic logistic data with an intercept; coefficients drawn from the prior."""
    rng = as_generator(seed)
    X = np.column_stack([np.ones(n_obs), rng.normal(size=(n_obs, n_features - 1))])
    beta = rng.normal(scale=prior_scale, size=n_features)
    p = 1.0 / (1.0 + np.exp(-X @ beta))
    y = np.where(rng.uniform(size=n_obs) < p, 1.0, -1.0)
    return LogisticModel(X, y, prior_scale=prior_scale)
