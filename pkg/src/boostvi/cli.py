"""Command-line front end: ``boostvi run | resume | eval | grid | sample``.

Exit status is 0 on success, 2 when an input does not validate (bad spec
field, stale checkpoint, impossible grid or sample size) and 3 when the
computation itself fails.
"""
import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from ._accel import backend
from .boost import CheckpointError, load_checkpoint, resume, run_bvi, save_checkpoint
from .estimators import elbo_estimate
from .experiments import SpecError, load_spec, reference_for
from .gaussmix import (DimensionError, dumps_mixture, mixture_from_dict, mixture_log_density,
                       mixture_sample)
from .oracle import rem, write_points_csv

log = logging.getLogger("boostvi")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3


class UsageError(ValueError):
    pass


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "alpha", "elbo", "elbo_se", "sgd_iters", "flags"])
        w.writerow([1, repr(1.0), repr(trace.initial_elbo), repr(trace.initial_elbo_se), 0, ""])
        for r in trace.records:
            w.writerow([r.t, repr(r.alpha), repr(r.elbo), repr(r.elbo_se), r.sgd_iters,
                        ";".join(r.flags)])


def _write_run_artifacts(out_dir, q, trace, cfg):
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = trace.to_dict()
    doc["config_hash"] = cfg.hash()
    _write_json(out_dir / "trace.json", doc)
    (out_dir / "mixture.json").write_text(dumps_mixture(q))
    save_checkpoint(out_dir / "checkpoint.json", q, trace, cfg.hash())
    timing = trace.timing()
    _write_json(out_dir / "timing.json", {"backend": backend(),
                                          "total_ms": float(sum(r["wall_ms"] for r in timing)),
                                          "iterations": timing})
    _write_trace_csv(out_dir / "trace.csv", trace)


def _load_mixture(path, config_hash=None):
    """Mixture from ``mixture.json`` or ``checkpoint.json``; also returns run wall time."""
    path = Path(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc
    try:
        return _mixture_from_doc(path, doc, config_hash)
    except (ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise UsageError(f"{path}: {exc}") from exc


def _mixture_from_doc(path, doc, config_hash):
    if not isinstance(doc, dict):
        raise ValueError("not a mixture or checkpoint document")
    if "config_hash" in doc:
        if config_hash is not None and doc["config_hash"] != config_hash:
            raise CheckpointError(f"{path}: checkpoint was written for a different configuration")
        wall = sum(r.get("wall_ms", 0.0) for r in doc["trace"]["records"])
        return mixture_from_dict(doc["mixture"]), wall
    wall = None
    timing = path.with_name("timing.json")
    if timing.is_file():
        with open(timing) as fh:
            wall = json.load(fh).get("total_ms")
    return mixture_from_dict(doc), wall


def cmd_run(args):
    spec, target = load_spec(args.spec)
    out_dir = Path(args.output_dir) if args.output_dir else spec.output_dir
    q, trace = run_bvi(target, spec.run)
    _write_run_artifacts(out_dir, q, trace, spec.run)
    print(f"{target.name}: {len(trace.records)} iterations, k={q.k}, status {trace.status}; "
          f"artifacts in {out_dir}")
    return EXIT_OK


def cmd_resume(args):
    if args.extra_T < 0:
        raise UsageError("--extra-T must be non-negative")
    spec, target = load_spec(args.spec)
    q, trace, _ = load_checkpoint(args.checkpoint, spec.run.hash())
    out_dir = Path(args.output_dir) if args.output_dir else spec.output_dir
    q, trace = resume(q, trace, target, spec.run, args.extra_T)
    _write_run_artifacts(out_dir, q, trace, spec.run)
    print(f"{target.name}: resumed to t={trace.last_t}, k={q.k}, status {trace.status}")
    return EXIT_OK


def cmd_eval(args):
    spec, target = load_spec(args.spec)
    q, run_ms = _load_mixture(args.mixture, spec.run.hash())
    if q.dim != target.dim:
        raise DimensionError(f"mixture has dimension {q.dim}, target has {target.dim}")
    start = time.perf_counter()
    n = args.n or spec.run.elbo_eval_n
    est = elbo_estimate(q, target, n, (spec.run.master_seed, args.seed))
    ref = reference_for(spec, target)
    metrics = {"elbo": est.value, "elbo_se": est.std_error, "rem": None, "k": q.k,
               "wall_ms": run_ms, "n": n, "n_nonfinite": est.n_nonfinite,
               "reference": None if ref is None else ref.source}
    log_z = target.log_normalizer
    if log_z is None and ref is not None:
        log_z = ref.log_normalizer
    if log_z is not None:
        metrics["kl"] = log_z - est.value
    out_dir = Path(args.out) if args.out else Path(args.mixture).resolve().parent
    out_dir.mkdir(parents=True, exist_ok=True)
    if ref is not None:
        metrics["rem"] = rem(q, ref)
        ref.save(out_dir / "reference.json")
    metrics["eval_ms"] = 1000.0 * (time.perf_counter() - start)
    _write_json(out_dir / "metrics.json", metrics)
    print(json.dumps({k: metrics[k] for k in ("elbo", "elbo_se", "rem", "k")}))
    return EXIT_OK


def cmd_grid(args):
    q, _ = _load_mixture(args.mixture)
    if q.dim > 2:
        raise UsageError(f"grid export needs d <= 2, mixture has d = {q.dim}")
    if len(args.box) != 2 * q.dim:
        raise UsageError(f"--box needs {2 * q.dim} numbers (lo hi per axis) for d = {q.dim}")
    if args.resolution < 2:
        raise UsageError("--resolution must be at least 2")
    box = np.asarray(args.box, dtype=float).reshape(q.dim, 2)
    if np.any(box[:, 1] <= box[:, 0]):
        raise UsageError("--box needs lo < hi on every axis")
    axes = [np.linspace(lo, hi, args.resolution) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    lq = mixture_log_density(q, pts)
    out = Path(args.out) if args.out else Path(args.mixture).resolve().parent / "grid.csv"
    names = ["x", "y"][: q.dim] + ["log_q"]
    write_points_csv(out, np.column_stack([pts, lq]), names)
    print(f"wrote {len(pts)} grid rows to {out}")
    return EXIT_OK


def cmd_sample(args):
    if args.n <= 0:
        raise UsageError("--n must be positive")
    q, _ = _load_mixture(args.mixture)
    x = mixture_sample(q, args.n, args.seed)
    out = Path(args.out) if args.out else Path(args.mixture).resolve().parent / "samples.csv"
    write_points_csv(out, x)
    print(f"wrote {args.n} samples to {out}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="boostvi", description="Boosting variational inference.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment spec")
    p.add_argument("spec")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("resume", help="continue a run from its checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("spec")
    p.add_argument("--extra-T", type=int, required=True)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("eval", help="ELBO and REM of a mixture or checkpoint")
    p.add_argument("mixture")
    p.add_argument("spec")
    p.add_argument("--n", type=int, default=None, help="ELBO sample size (default: run.elbo_eval_n)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory (default: next to the mixture)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid", help="log q on a regular grid (d <= 2)")
    p.add_argument("mixture")
    p.add_argument("--box", type=float, nargs="+", required=True, metavar="LO_HI")
    p.add_argument("--resolution", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("sample", help="draw samples from a mixture")
    p.add_argument("mixture")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else (logging.INFO if args.verbose == 1 else logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SpecError, UsageError, CheckpointError, DimensionError) as exc:
        print(f"boostvi {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - every runtime failure maps to one exit code
        log.debug("traceback", exc_info=True)
        print(f"boostvi {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
