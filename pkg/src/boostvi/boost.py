"""The boosting loop: alternate component search and weight solve.

Randomness for iteration ``t`` comes from ``(master_seed, t, stage)`` so a run
can be stopped and resumed without changing its outcome.
"""
import hashlib
import json
import logging
import time
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .estimators import SupportMismatchError, elbo_estimate
from .gaussmix import (GaussianComponent, MixtureApproximation, component_from_dict,
                       component_to_dict, mixture_extend, mixture_from_dict, mixture_to_dict)
from .search import (DegenerateHessianError, HessianRepairWarning, PeakSearchError,
                     SearchConfig, build_component, find_peak)
from .weights import SgdConfig, solve_alpha

log = logging.getLogger(__name__)

STAGE_INIT, STAGE_SEARCH, STAGE_ALPHA, STAGE_ELBO = 0, 1, 2, 3


class BoostError(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    T: int = 30
    init_mean: Optional[tuple] = None
    init_cov_scale: float = 100.0
    search: SearchConfig = field(default_factory=SearchConfig)
    sgd: SgdConfig = field(default_factory=SgdConfig)
    elbo_eval_n: int = 1000
    master_seed: int = 0
    prune_threshold: float = 1e-6
    residual_scale: str = "auto"

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("RunConfig.T must be at least 1")
        if not self.init_cov_scale > 0:
            raise ValueError("RunConfig.init_cov_scale must be positive")
        if self.elbo_eval_n < 2:
            raise ValueError("RunConfig.elbo_eval_n must be at least 2")
        if self.residual_scale not in ("auto", "none"):
            raise ValueError("RunConfig.residual_scale must be 'auto' or 'none'")

    def to_dict(self):
        out = asdict(self)
        if self.init_mean is not None:
            out["init_mean"] = [float(v) for v in self.init_mean]
        return out

    @classmethod
    def from_dict(cls, obj):
        obj = dict(obj)
        search = SearchConfig(**obj.pop("search", {}))
        sgd = SgdConfig(**obj.pop("sgd", {}))
        if obj.get("init_mean") is not None:
            obj["init_mean"] = tuple(float(v) for v in obj["init_mean"])
        return cls(search=search, sgd=sgd, **obj)

    def hash(self):
        """Digest of everything except the iteration budget."""
        body = self.to_dict()
        body.pop("T")
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


@dataclass
class IterationRecord:
    t: int
    alpha: float
    mean: list
    cov: list
    elbo: Optional[float]
    elbo_se: Optional[float]
    sgd_iters: int
    sgd_converged: bool
    peak_value: Optional[float]
    flags: list = field(default_factory=list)
    wall_ms: float = 0.0

    def to_dict(self, timing=False):
        out = asdict(self)
        if not timing:
            out.pop("wall_ms")
        return out


@dataclass
class BoostTrace:
    """Per-iteration history of a run, plus the initial component."""

    initial: dict
    initial_elbo: Optional[float] = None
    initial_elbo_se: Optional[float] = None
    records: list = field(default_factory=list)
    status: str = "running"
    last_t: int = 1

    def to_dict(self, timing=False):
        return {"initial": self.initial, "initial_elbo": self.initial_elbo,
                "initial_elbo_se": self.initial_elbo_se, "status": self.status,
                "last_t": self.last_t,
                "records": [r.to_dict(timing) for r in self.records]}

    @classmethod
    def from_dict(cls, obj):
        recs = [IterationRecord(**r) for r in obj["records"]]
        return cls(obj["initial"], obj.get("initial_elbo"), obj.get("initial_elbo_se"),
                   recs, obj.get("status", "running"), obj.get("last_t", 1))

    def timing(self):
        return [{"t": r.t, "wall_ms": r.wall_ms, "elbo": r.elbo} for r in self.records]

    def elbos(self):
        out = [self.initial_elbo] + [r.elbo for r in self.records]
        return np.array([np.nan if v is None else v for v in out], dtype=float)


def initial_component(target, cfg):
    mean = np.zeros(target.dim) if cfg.init_mean is None else np.asarray(cfg.init_mean, float)
    if mean.shape != (target.dim,):
        raise ValueError(f"init_mean has length {mean.shape[0]}, target dimension is {target.dim}")
    return GaussianComponent.isotropic(mean, cfg.init_cov_scale)


def _elbo(q, target, cfg, t, flags):
    try:
        est = elbo_estimate(q, target, cfg.elbo_eval_n, (cfg.master_seed, t, STAGE_ELBO))
    except SupportMismatchError as exc:
        flags.append("elbo_nonfinite")
        log.warning("t=%d: %s", t, exc)
        return None, None
    if est.n_nonfinite:
        flags.append(f"elbo_dropped_{est.n_nonfinite}")
    return est.value, est.std_error


def _residual_scale(target, trace, cfg):
    if cfg.residual_scale == "none":
        return 0.0
    if target.log_normalizer is not None:
        return float(target.log_normalizer)
    # ELBO <= log Z, so the best ELBO so far never over-shrinks f
    elbos = trace.elbos()
    elbos = elbos[np.isfinite(elbos)]
    return float(elbos.max()) if elbos.size else 0.0


def _apply(q, component, alpha, cfg):
    if alpha < cfg.prune_threshold:
        return q
    return mixture_extend(q, component, alpha)


def _step(q, trace, target, cfg, t):
    flags = []
    start = time.perf_counter()
    scale = _residual_scale(target, trace, cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", HessianRepairWarning)
        try:
            peak = find_peak(q, target, cfg.search, (cfg.master_seed, t, STAGE_SEARCH), scale)
            h = build_component(peak, cfg.search)
        except (PeakSearchError, np.linalg.LinAlgError, ValueError) as exc:
            log.warning("t=%d: component search failed (%s); skipping", t, exc)
            rec = IterationRecord(t, 0.0, [], [], None, None, 0, False, None,
                                  ["search_failed"])
            return q, rec, start
    if any(issubclass(w.category, HessianRepairWarning) for w in caught):
        flags.append("hessian_repaired")
    if not peak.converged:
        flags.append("peak_not_converged")
    try:
        res = solve_alpha(q, h, target, cfg.sgd, seed=(cfg.master_seed, t, STAGE_ALPHA))
        alpha, iters, conv = res.alpha, res.iters, res.converged
    except SupportMismatchError as exc:
        log.warning("t=%d: weight solve aborted (%s); skipping", t, exc)
        alpha, iters, conv = 0.0, 0, False
        flags.append("support_mismatch")
    if not conv:
        flags.append("sgd_not_converged")
    q_new = _apply(q, h, alpha, cfg)
    if alpha < cfg.prune_threshold:
        flags.append("pruned")
    elbo, se = _elbo(q_new, target, cfg, t, flags)
    rec = IterationRecord(t, float(alpha), h.mean.tolist(), h.cov.tolist(), elbo, se,
                          int(iters), bool(conv), float(peak.value), flags)
    return q_new, rec, start


def _iterate(q, trace, target, cfg, t_end):
    for t in range(trace.last_t + 1, t_end + 1):
        try:
            q_new, rec, start = _step(q, trace, target, cfg, t)
        except DegenerateHessianError as exc:
            log.info("t=%d: %s; stopping", t, exc)
            trace.status = f"residual_flat at t={t}"
            return q, trace
        except Exception as exc:
            raise BoostError(f"iteration {t}: {exc}") from exc
        rec.wall_ms = 1000.0 * (time.perf_counter() - start)
        trace.records.append(rec)
        trace.last_t = t
        q = q_new
        log.debug("t=%d alpha=%.4g elbo=%s k=%d", t, rec.alpha, rec.elbo, q.k)
    trace.status = "ok"
    return q, trace


def run_bvi(target, cfg):
    """Boost a Gaussian mixture towards ``target`` for ``cfg.T`` iterations.

    Returns ``(q_T, trace)``. Iterations whose search or weight solve fails
    are recorded with ``alpha = 0`` and skipped; a flat residual (no
    curvature at the peak) ends the run early with the status recorded.
    """
    h1 = initial_component(target, cfg)
    q = MixtureApproximation.single(h1)
    flags = []
    elbo, se = _elbo(q, target, cfg, 1, flags)
    trace = BoostTrace(component_to_dict(h1), elbo, se)
    return _iterate(q, trace, target, cfg, cfg.T)


def replay(trace, cfg):
    """Rebuild the mixture a trace describes."""
    q = MixtureApproximation.single(component_from_dict(trace.initial))
    for rec in trace.records:
        if rec.alpha >= cfg.prune_threshold:
            q = mixture_extend(q, GaussianComponent.from_cov(rec.mean, rec.cov), rec.alpha)
    return q


def resume(q_prev, trace, target, cfg, extra_T):
    """Continue a run for ``extra_T`` more iterations.

    Seeds depend only on ``(master_seed, t, stage)``, so resuming reproduces
    the uninterrupted run exactly.
    """
    if extra_T < 0:
        raise ValueError("extra_T must be non-negative")
    rebuilt = replay(trace, cfg)
    if (rebuilt.k != q_prev.k or not np.allclose(rebuilt.weights, q_prev.weights, rtol=1e-12)
            or not all(np.allclose(a.mean, b.mean) and np.allclose(a.cov, b.cov)
                       for a, b in zip(rebuilt.components, q_prev.components))):
        raise CheckpointError("mixture does not match the trace it is resumed with")
    if extra_T == 0 or trace.status.startswith("residual_flat"):
        return q_prev, trace
    return _iterate(q_prev, trace, target, cfg, trace.last_t + extra_T)


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------

def save_checkpoint(path, q, trace, config_hash):
    # per-iteration timings travel with the checkpoint so resumed runs keep them
    doc = {"config_hash": config_hash, "mixture": mixture_to_dict(q),
           "trace": trace.to_dict(timing=True)}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_checkpoint(path, config_hash=None):
    with open(path) as fh:
        doc = json.load(fh)
    if config_hash is not None and doc.get("config_hash") != config_hash:
        raise CheckpointError(f"{path}: checkpoint was written for a different configuration")
    return mixture_from_dict(doc["mixture"]), BoostTrace.from_dict(doc["trace"]), doc.get("config_hash")


def with_T(cfg, T):
    return replace(cfg, T=T)
