"""Hot numeric kernels, each in a numba and a pure-numpy flavour.

The public names (``gauss_logpdf``, ``mixture_logpdf``, ``sensor_loglik``)
point at whichever flavour ``boostvi._accel`` selected at import time. Both
flavours are always importable so they can be cross-checked and benchmarked.

All kernels take points as a 2-D ``(n, d)`` float64 array.
"""
import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from ._accel import USE_NUMBA, njit

LOG_2PI = np.log(2.0 * np.pi)


# --------------------------------------------------------------------------
# Gaussian log-density from a lower Cholesky factor
# --------------------------------------------------------------------------

def gauss_logpdf_numpy(x, mean, chol):
    d = mean.shape[0]
    z = solve_triangular(chol, (x - mean).T, lower=True, check_finite=False)
    logdet = np.sum(np.log(np.diag(chol)))
    return -0.5 * d * LOG_2PI - logdet - 0.5 * np.sum(z * z, axis=0)


@njit
def gauss_logpdf_numba(x, mean, chol):
    n, d = x.shape
    out = np.empty(n)
    logdet = 0.0
    for i in range(d):
        logdet += np.log(chol[i, i])
    const = -0.5 * d * np.log(2.0 * np.pi) - logdet
    z = np.empty(d)
    for r in range(n):
        sq = 0.0
        for i in range(d):
            s = x[r, i] - mean[i]
            for j in range(i):
                s -= chol[i, j] * z[j]
            z[i] = s / chol[i, i]
            sq += z[i] * z[i]
        out[r] = const - 0.5 * sq
    return out


# --------------------------------------------------------------------------
# Mixture log-density (log-sum-exp over components)
# --------------------------------------------------------------------------

def mixture_logpdf_numpy(x, log_w, means, chols):
    comp = np.empty((log_w.shape[0], x.shape[0]))
    for j in range(log_w.shape[0]):
        comp[j] = log_w[j] + gauss_logpdf_numpy(x, means[j], chols[j])
    return logsumexp(comp, axis=0)


@njit
def mixture_logpdf_numba(x, log_w, means, chols):
    k = log_w.shape[0]
    n = x.shape[0]
    comp = np.empty((k, n))
    for j in range(k):
        comp[j] = log_w[j] + gauss_logpdf_numba(x, means[j], chols[j])
    out = np.empty(n)
    for r in range(n):
        m = -np.inf
        for j in range(k):
            if comp[j, r] > m:
                m = comp[j, r]
        if m == -np.inf:
            out[r] = -np.inf
            continue
        s = 0.0
        for j in range(k):
            s += np.exp(comp[j, r] - m)
        out[r] = m + np.log(s)
    return out


# --------------------------------------------------------------------------
# Sensor-network localisation log-likelihood
# --------------------------------------------------------------------------

def _sensor_positions(x, anchors):
    n = x.shape[0]
    free = x.reshape(n, -1, 2)
    fixed = np.broadcast_to(anchors, (n,) + anchors.shape)
    return np.concatenate([fixed, free], axis=1)


def sensor_loglik_numpy(x, anchors, Z, Y, R, sigma, lo, hi):
    pos = _sensor_positions(x, anchors)
    N = pos.shape[1]
    iu, ju = np.triu_indices(N, k=1)
    diff = pos[:, iu, :] - pos[:, ju, :]
    D = np.sum(diff * diff, axis=-1)
    z = Z[iu, ju]
    y = Y[iu, ju]
    scaled = D / (2.0 * R * R)
    with np.errstate(divide="ignore"):
        seen = -scaled - (y - np.sqrt(D)) ** 2 / (2.0 * sigma * sigma)
        unseen = np.log(-np.expm1(-scaled))
    terms = np.where(z > 0.5, seen, unseen)
    out = np.sum(terms, axis=1)
    outside = np.any((x < lo) | (x > hi), axis=1)
    out[outside] = -np.inf
    return out


@njit
def sensor_loglik_numba(x, anchors, Z, Y, R, sigma, lo, hi):
    n, d = x.shape
    m = d // 2
    na = anchors.shape[0]
    N = na + m
    out = np.empty(n)
    px = np.empty(N)
    py = np.empty(N)
    two_r2 = 2.0 * R * R
    two_s2 = 2.0 * sigma * sigma
    for r in range(n):
        inside = True
        for i in range(d):
            if x[r, i] < lo or x[r, i] > hi:
                inside = False
        if not inside:
            out[r] = -np.inf
            continue
        for i in range(na):
            px[i] = anchors[i, 0]
            py[i] = anchors[i, 1]
        for i in range(m):
            px[na + i] = x[r, 2 * i]
            py[na + i] = x[r, 2 * i + 1]
        total = 0.0
        for i in range(N):
            for j in range(i + 1, N):
                dx = px[i] - px[j]
                dy = py[i] - py[j]
                D = dx * dx + dy * dy
                if Z[i, j] > 0.5:
                    e = Y[i, j] - np.sqrt(D)
                    total += -D / two_r2 - e * e / two_s2
                else:
                    total += np.log(-np.expm1(-D / two_r2))
        out[r] = total
    return out


if USE_NUMBA:
    gauss_logpdf = gauss_logpdf_numba
    mixture_logpdf = mixture_logpdf_numba
    sensor_loglik = sensor_loglik_numba
else:
    gauss_logpdf = gauss_logpdf_numpy
    mixture_logpdf = mixture_logpdf_numpy
    sensor_loglik = sensor_loglik_numpy
