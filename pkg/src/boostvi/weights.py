"""Projected stochastic gradient descent for the new component's weight."""
import logging
from dataclasses import dataclass, field

from .estimators import alpha_gradient_estimate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SgdConfig:
    n: int = 100
    b: float = 0.1
    eps: float = 1e-4
    max_iters: int = 10_000
    seed: int = 0

    def __post_init__(self):
        for name in ("n", "b", "eps", "max_iters"):
            if not getattr(self, name) > 0:
                raise ValueError(f"SgdConfig.{name} must be positive")
        if self.n < 2:
            raise ValueError("SgdConfig.n must be at least 2")


@dataclass
class AlphaResult:
    alpha: float
    iters: int
    converged: bool
    trace: list = field(default_factory=list)   # (k, alpha_k, grad_k)


def solve_alpha(q_prev, h, target, cfg, seed=None, grad=None):
    """Minimise the effective discrepancy over alpha in [0, 1].

    Starts from alpha = 0 and iterates
    ``alpha <- clip(alpha - (b / k) * g_k, 0, 1)`` with a fresh Monte Carlo
    gradient ``g_k`` per step, stopping once an update moves alpha by less
    than ``cfg.eps``. Hitting ``cfg.max_iters`` is reported through
    ``converged=False``, not raised.

    ``grad(alpha, k)`` may replace the Monte Carlo estimate (e.g. with an
    exact quadrature gradient). ``seed`` overrides ``cfg.seed``.
    """
    base = cfg.seed if seed is None else seed
    base = tuple(base) if isinstance(base, (tuple, list)) else (base,)
    alpha = 0.0
    trace = []
    for k in range(1, cfg.max_iters + 1):
        if grad is None:
            g = alpha_gradient_estimate(q_prev, h, alpha, target, cfg.n, base + (k,)).value
        else:
            g = float(grad(alpha, k))
        new = min(max(alpha - (cfg.b / k) * g, 0.0), 1.0)
        trace.append((k, new, g))
        step = abs(new - alpha)
        alpha = new
        if step < cfg.eps:
            return AlphaResult(alpha, k, True, trace)
    log.warning("solve_alpha: no convergence within %d iterations (alpha=%.4g)",
                cfg.max_iters, alpha)
    return AlphaResult(alpha, cfg.max_iters, False, trace)
