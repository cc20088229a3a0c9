import numpy as np
import pytest

from boostvi.gaussmix import GaussianComponent, MixtureApproximation
from boostvi.targets import make_gmm


def gauss1d(mean, var):
    return GaussianComponent.isotropic([float(mean)], float(var))


def single(mean, var):
    return MixtureApproximation.single(gauss1d(mean, var))


@pytest.fixture
def gaussian_triple():
    """q = N(0, 1), h = N(3, 1), f = 0.8 N(0, 1) + 0.2 N(3, 1) (normalised)."""
    f = make_gmm([0.8, 0.2], [[0.0], [3.0]], [[[1.0]], [[1.0]]])
    return single(0.0, 1.0), gauss1d(3.0, 1.0), f


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, d, scale=1.0):
    A = rng.normal(size=(d, d))
    return scale * (A @ A.T / d + 0.5 * np.eye(d))


def crn_derivative_se(q, h, alpha, n, seed):
    """Standard error of the extra term in d/d alpha of ``mc_objective``.

    Differentiating the fixed-sample objective also differentiates gamma
    itself, adding ``(1 - a) mean_q[dg] + a mean_h[dg]`` with
    ``dg = (h - q) / q_a``; that term has mean zero but its own noise.
    """
    from boostvi._random import substreams
    from boostvi.estimators import _sample_gaussian, mix_log_density
    from boostvi.gaussmix import gaussian_log_density, mixture_log_density, mixture_sample

    rng_h, rng_q = substreams(seed, 2)
    th_h = _sample_gaussian(h, n, rng_h)
    th_q = mixture_sample(q, n, rng_q)

    def dg(x):
        lq, lh = mixture_log_density(q, x), gaussian_log_density(h, x)
        la = mix_log_density(q, h, alpha, x)
        return np.exp(lh - la) - np.exp(lq - la)

    var = ((1 - alpha) ** 2 * dg(th_q).var(ddof=1) + alpha ** 2 * dg(th_h).var(ddof=1)) / n
    return float(np.sqrt(var))


# one line per acceptance criterion, repeated at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
