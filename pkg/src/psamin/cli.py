"""Command-line front end.

Subcommands:

* ``psa``      — pseudospectral abscissa of a single Matrix Market matrix.
* ``minimize`` — minimize the abscissa of a family given by a JSON
                 descriptor (static-output-feedback triple or generic
                 affine family); writes a trace CSV and a JSON summary.
* ``bench``    — run a suite of problems (synthetic or descriptor-based),
                 optionally with a direct-minimization baseline.
* ``boundary`` — emit level-set polylines as CSV (re, im, component_id).

Exit codes: 0 success, 1 input error, 2 non-convergence (or a failed
suite entry), 3 inner-solver failure (partial trace preserved).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import __version__
from .abscissa import PsaConfig, boundary_polyline, psa_auto
from .families import (ContractViolation, load_descriptor, read_matrix,
                       sof_to_family)
from .optimizers import OptimizerConfig
from .subspace import FrameworkConfig, minimize, minimize_extended
from .synth import _dense_at, direct_minimize_grid, generate


def _fmt(v):
    return f"{v:.10g}"


def _add_shared(p):
    p.add_argument("--eps", type=float, default=None,
                   help="pseudospectrum level (required unless the "
                        "descriptor provides one)")
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--eta", type=int, default=10)
    p.add_argument("--max-iters", type=int, default=30)
    p.add_argument("--gamma", type=float, default=-400.0)
    p.add_argument("--size-switch", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--extended", action="store_true",
                   help="use the extended iteration with offset points")
    p.add_argument("--out-dir", type=Path, default=Path("."))
    p.add_argument("--format", choices=["csv", "json"], default="json")


def _framework_config(args, eps):
    return FrameworkConfig(
        eps=eps, eta=args.eta, tol=args.tol, max_iters=args.max_iters,
        extended=args.extended, seed=args.seed,
        size_switch=args.size_switch,
        inner=OptimizerConfig(gamma=args.gamma, seed=args.seed))


def _require_eps(args):
    if args.eps is None or args.eps <= 0:
        raise ContractViolation("--eps must be given and positive")
    return args.eps


def _meta(args):
    return {"version": __version__, "seed": args.seed,
            "argv": sys.argv[1:]}


# ---------------------------------------------------------------------------

def cmd_psa(args):
    eps = _require_eps(args)
    A = read_matrix(args.matrix)
    cfg = PsaConfig(size_switch=args.size_switch)
    res = psa_auto(A, eps, cfg)
    residual = abs(res.triplet.sigma - eps) if res.triplet else float("nan")
    print(f"alpha     {_fmt(res.alpha)}")
    print(f"z         {_fmt(res.z.real)} {'+' if res.z.imag >= 0 else '-'} "
          f"{_fmt(abs(res.z.imag))}i")
    print(f"iterations {res.iterations}")
    print(f"level residual {residual:.3e}")
    if args.report:
        report = {"alpha": res.alpha, "z": [res.z.real, res.z.imag],
                  "iterations": res.iterations, "converged": res.converged,
                  "level_residual": residual, "eps": eps, "meta": _meta(args)}
        args.out_dir.mkdir(parents=True, exist_ok=True)
        with open(args.out_dir / "psa_report.json", "w") as fh:
            json.dump(report, fh, indent=2)
    return 0 if res.converged else 2


def cmd_minimize(args):
    family, box, desc_eps, meta = load_descriptor(args.descriptor)
    kind = meta["type"]
    eps = args.eps if args.eps is not None else desc_eps
    if eps is None or eps <= 0:
        raise ContractViolation("no positive eps in descriptor or --eps")
    cfg = _framework_config(args, eps)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    runner = minimize_extended if args.extended else minimize
    t0 = time.perf_counter()
    try:
        x_hat, z_hat, alpha_hat, trace = runner(family, box, cfg)
    except Exception as exc:
        print(f"inner solver failure: {exc}", file=sys.stderr)
        return 3
    elapsed = time.perf_counter() - t0
    trace.to_csv(args.out_dir / "trace.csv")
    summary = {
        "x": [float(v) for v in x_hat],
        "alpha": alpha_hat,
        "z": [z_hat.real, z_hat.imag],
        "converged": trace.converged,
        "iterations": len(trace.records),
        "subspace_dim": trace.records[-1].subspace_dim if trace.records else 0,
        "time_total": elapsed,
        "time_reduced": sum(r.t_reduced for r in trace.records),
        "time_psa": sum(r.t_full for r in trace.records),
        "eps": eps,
        "problem_kind": kind,
        "config": trace.config,
        "meta": _meta(args),
    }
    if kind == "sof":
        x0 = np.zeros(box.d)
        res0 = psa_auto(family.eval(x0), eps,
                        PsaConfig(size_switch=args.size_switch))
        summary["alpha_at_origin"] = res0.alpha
    with open(args.out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    print(f"x*     {' '.join(_fmt(v) for v in x_hat)}")
    print(f"alpha  {_fmt(alpha_hat)}")
    if "alpha_at_origin" in summary:
        print(f"alpha at x=0  {_fmt(summary['alpha_at_origin'])}")
    return 0 if trace.converged else 2


def cmd_bench(args):
    with open(args.suite) as fh:
        suite = json.load(fh)
    problems = suite.get("problems", [])
    if not problems:
        raise ContractViolation("suite lists no problems")
    baseline = bool(suite.get("baseline", False)) or args.baseline
    rows = []
    failed = False
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for spec in problems:
        try:
            rows.append(_bench_one(spec, args, baseline))
        except Exception as exc:
            failed = True
            rows.append({"problem": spec.get("name", str(spec)),
                         "error": str(exc)})
    out = {"meta": _meta(args), "results": rows}
    if args.format == "json":
        with open(args.out_dir / "bench.json", "w") as fh:
            json.dump(out, fh, indent=2)
    else:
        cols = ["problem", "n", "eps", "x", "alpha", "iterations",
                "time", "time_reduced", "time_psa", "direct_alpha",
                "direct_time", "error"]
        with open(args.out_dir / "bench.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
            writer.writeheader()
            writer.writerows(rows)
    for row in rows:
        if "error" in row:
            print(f"{row['problem']}: FAILED ({row['error']})")
        else:
            print(f"{row['problem']}: x*={row['x']} "
                  f"alpha={_fmt(row['alpha'])} "
                  f"iters={row['iterations']} time={row['time']:.1f}s")
    return 2 if failed else 0


def _bench_one(spec, args, baseline):
    kind = spec.get("type")
    if kind == "synthetic":
        n = int(spec["n"])
        seed = int(spec.get("seed", args.seed))
        eps = float(spec.get("eps", args.eps or 0.1))
        prob = generate(n, seed=seed, eps=eps,
                        interval=tuple(spec.get("interval", (-1.0, 1.0))))
        family, box = prob.family, prob.box
        name = spec.get("name", f"synthetic-n{n}-s{seed}")
    elif kind == "descriptor":
        family, box, desc_eps, _meta = load_descriptor(spec["path"])
        eps = float(spec.get("eps", desc_eps or args.eps or 0.0))
        if eps <= 0:
            raise ContractViolation("no positive eps for descriptor problem")
        name = spec.get("name", Path(spec["path"]).stem)
    else:
        raise ContractViolation(f"unknown problem type {kind!r}")
    cfg = _framework_config(args, eps)
    runner = minimize_extended if args.extended else minimize
    t0 = time.perf_counter()
    x_hat, _, alpha_hat, trace = runner(family, box, cfg)
    elapsed = time.perf_counter() - t0
    row = {"problem": name, "n": family.n, "eps": eps,
           "x": " ".join(_fmt(v) for v in x_hat), "alpha": alpha_hat,
           "iterations": len(trace.records), "time": elapsed,
           "time_reduced": sum(r.t_reduced for r in trace.records),
           "time_psa": sum(r.t_full for r in trace.records)}
    if baseline and box.d == 1 and family.n <= 400:
        t1 = time.perf_counter()
        _, d_alpha = direct_minimize_grid(
            lambda t: _dense_at(family, t), box, eps,
            points=int(spec.get("baseline_points", 100)))
        row["direct_alpha"] = d_alpha
        row["direct_time"] = time.perf_counter() - t1
    return row


def cmd_boundary(args):
    eps = _require_eps(args)
    A = read_matrix(args.matrix)
    A = A.toarray() if sp.issparse(A) else np.asarray(A)
    try:
        window = tuple(float(v) for v in args.window.split(","))
        if len(window) != 4:
            raise ValueError
    except ValueError:
        raise ContractViolation(
            "--window must be re_min,re_max,im_min,im_max") from None
    polys = boundary_polyline(A, eps, window, resolution=args.resolution)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    path = args.out_dir / "boundary.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["re", "im", "component_id"])
        for cid, poly in enumerate(polys):
            for z in poly:
                writer.writerow([_fmt(z.real), _fmt(z.imag), cid])
    print(f"{len(polys)} polylines -> {path}")
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="psamin",
        description="Pseudospectral abscissa computation and minimization")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("psa", help="abscissa of one matrix")
    p.add_argument("matrix", type=Path, help="Matrix Market file")
    p.add_argument("--report", action="store_true",
                   help="also write psa_report.json")
    _add_shared(p)
    p.set_defaults(fn=cmd_psa)

    p = sub.add_parser("minimize", help="minimize over a family")
    p.add_argument("descriptor", type=Path, help="JSON problem descriptor")
    _add_shared(p)
    p.set_defaults(fn=cmd_minimize)

    p = sub.add_parser("bench", help="run a problem suite")
    p.add_argument("suite", type=Path, help="JSON suite configuration")
    p.add_argument("--baseline", action="store_true",
                   help="also run the direct-minimization baseline")
    _add_shared(p)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("boundary", help="level-set polylines as CSV")
    p.add_argument("matrix", type=Path, help="Matrix Market file")
    p.add_argument("--window", required=True,
                   help="re_min,re_max,im_min,im_max")
    p.add_argument("--resolution", type=int, default=200)
    _add_shared(p)
    p.set_defaults(fn=cmd_boundary)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ContractViolation, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
