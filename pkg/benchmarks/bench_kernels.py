"""Time the numba kernels against their pure-numpy counterparts.

Usage::

    python benchmarks/bench_kernels.py [--repeat 20] [--n 1 100 1000 10000]

Each kernel is called once to trigger compilation before timing. The table
reports the median wall time per call and the numpy/numba ratio; the max
absolute difference between flavours is printed as a sanity check.
"""
import argparse
import time

import numpy as np

from boostvi import kernels
from boostvi.gaussmix import GaussianComponent, MixtureApproximation
from boostvi.targets import bundled_sensor_model


def median_time(fn, args, repeat):
    fn(*args)  # warm-up / compile
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def cases(n, rng):
    d = 16
    comp = GaussianComponent.from_cov(rng.normal(size=d), np.cov(rng.normal(size=(4 * d, d)), rowvar=False))
    x = rng.normal(size=(n, d))
    yield "gauss_logpdf d=16", (kernels.gauss_logpdf_numpy, kernels.gauss_logpdf_numba), \
        (x, comp.mean, comp.chol)

    comps = tuple(GaussianComponent.isotropic(rng.normal(size=d), rng.uniform(0.5, 2.0)) for _ in range(30))
    q = MixtureApproximation(np.full(30, 1 / 30), comps)
    yield "mixture_logpdf k=30 d=16", (kernels.mixture_logpdf_numpy, kernels.mixture_logpdf_numba), \
        (x, q._log_w, q._means, q._chols)

    m = bundled_sensor_model()
    xs = rng.uniform(0.0, 1.0, size=(n, m.dim))
    yield "sensor_loglik N=11", (kernels.sensor_loglik_numpy, kernels.sensor_loglik_numba), \
        (xs, m.anchors, m.Z, m.Y, m.R, m.sigma, m.box[0], m.box[1])


def main():
    ap = argparse.ArgumentParser(description="numba vs numpy kernel timings")
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--n", type=int, nargs="+", default=[1, 100, 1000, 10000])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    print(f"{'kernel':28s} {'n':>6s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s} {'max |diff|':>11s}")
    for n in args.n:
        for name, (f_np, f_nb), fargs in cases(n, rng):
            t_np = median_time(f_np, fargs, args.repeat)
            t_nb = median_time(f_nb, fargs, args.repeat)
            a, b = f_np(*fargs), f_nb(*fargs)
            finite = np.isfinite(a) & np.isfinite(b)
            diff = float(np.max(np.abs(a[finite] - b[finite]))) if finite.any() else 0.0
            print(f"{name:28s} {n:6d} {1e3 * t_np:10.3f} {1e3 * t_nb:10.3f} "
                  f"{t_np / t_nb:8.1f} {diff:11.2e}")


if __name__ == "__main__":
    main()
