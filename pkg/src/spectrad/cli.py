"""Command-line surface: generate, learn, evaluate, check-grad, bench.

Every run writes exactly one manifest.json recording the command, the fully
resolved configuration, sha256 digests of the input files, the tool version,
wall time, and the output paths.  Progress goes to stderr; data files and
reports go to the output directory (--out-dir, else $SPECTRAD_OUT_DIR,
else the current directory).

Exit codes: 0 success, 1 failed check, 2 usage or parse error, 3 numeric
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__, bench, datagen, evaluation, learner, plotting, sparse
from .acyclicity import PowerIterationError, gradient_check
from .learner import LearnConfig, NumericsError

PROFILES = {
    # B resolved to the sample count after the data is loaded; the small
    # benchmark protocol stops on the exact acyclicity measure
    "bench-small": {"batch_size": "full", "theta": 0.0, "lam": 0.5,
                    "termination": "exact"},
    "bench-large": {"batch_size": 1000, "theta": 1e-3, "epsilon": 1e-8},
}


def _progress(line):
    print(line, file=sys.stderr, flush=True)


def _out_dir(args):
    out = args.out_dir or os.environ.get("SPECTRAD_OUT_DIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(out_dir, command, config, inputs, outputs, wall_time):
    manifest = {
        "command": command,
        "config": config,
        "input_digests": {os.path.basename(p): _sha256(p) for p in inputs},
        "tool_version": __version__,
        "wall_time": wall_time,
        "outputs": sorted(os.path.basename(p) for p in outputs),
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _write_json(path, payload):
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _write_trace_csv(path, trace):
    with open(path, "w") as f:
        f.write("iteration,delta,h,loss,rho,eta,nnz,seconds\n")
        for rec in trace:
            h = "" if rec.h is None else repr(float(rec.h))
            f.write(f"{rec.outer},{rec.delta!r},{h},{rec.loss!r},"
                    f"{rec.rho!r},{rec.eta!r},{rec.nnz},{rec.seconds!r}\n")
    return path


# ---------------------------------------------------------------------------
# learn config plumbing

_CONFIG_FLAGS = (
    ("zeta", float), ("lam", float), ("epsilon", float), ("k", int),
    ("alpha", float), ("batch_size", int), ("theta", float),
    ("t_outer", int), ("t_inner", int), ("lr", float), ("rho_init", float),
    ("eta_init", float), ("rho_growth", float), ("rho_max", float),
    ("seed", int), ("theta_grow", float),
)


def _add_config_flags(p):
    for name, typ in _CONFIG_FLAGS:
        p.add_argument("--" + name.replace("_", "-"), type=typ, default=None)
    p.add_argument("--engine", choices=("sparse", "dense"), default=None)
    p.add_argument("--termination", choices=("bound", "exact"), default=None)
    p.add_argument("--warm-start", dest="warm_start", action="store_true",
                   default=None)
    p.add_argument("--no-warm-start", dest="warm_start", action="store_false")
    p.add_argument("--oracle-trace", action="store_true", default=None)
    p.add_argument("--profile", choices=sorted(PROFILES), default=None)


def _resolve_config(args, n_samples):
    """Explicit flags win over the profile, which wins over defaults."""
    merged = {}
    if args.profile:
        merged.update(PROFILES[args.profile])
        if merged.get("batch_size") == "full":
            merged["batch_size"] = n_samples
    for name, _ in _CONFIG_FLAGS:
        val = getattr(args, name, None)
        if val is not None:
            merged[name] = val
    for name in ("engine", "termination", "warm_start", "oracle_trace"):
        val = getattr(args, name, None)
        if val is not None:
            merged[name] = val
    return LearnConfig(**merged)


def _load_samples(path, center):
    x = datagen.load_samples(path)
    if center:
        x = x - x.mean(axis=0, keepdims=True)
    return x


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args):
    t0 = time.perf_counter()
    out = _out_dir(args)
    n = args.n if args.n is not None else 10 * args.d
    case = datagen.generate_case(
        d=args.d, model=args.model, avg_degree=args.degree, noise=args.noise,
        n=n, seed=args.seed, centered=not args.raw_noise)
    paths = datagen.save_case(case, out)
    config = {"d": args.d, "model": args.model, "degree": args.degree,
              "noise": args.noise, "n": n, "seed": args.seed,
              "centered_noise": not args.raw_noise}
    _write_manifest(out, "generate", config, [], list(paths.values()),
                    time.perf_counter() - t0)
    _progress(f"generated case d={case.d} n={case.n} "
              f"edges={case.adjacency.nnz} -> {out}")
    return 0


def cmd_learn(args):
    t0 = time.perf_counter()
    out = _out_dir(args)
    x = _load_samples(args.input, args.center)
    cfg = _resolve_config(args, x.shape[0])
    result = learner.least(x, cfg, progress=_progress)
    w_path = os.path.join(out, "w.mtx")
    sparse.write_matrix_market(w_path, result.w)
    trace_path = _write_trace_csv(os.path.join(out, "trace.csv"),
                                  result.trace)
    outputs = [w_path, trace_path]
    if result.trace:
        outputs.append(plotting.save_trace_chart(
            os.path.join(out, "trace.svg"), result.trace,
            f"Optimization trace (d={result.w.n_rows})"))
    final_delta = result.trace[-1].delta if result.trace else None
    report = {
        "converged": result.converged,
        "outer_iterations": result.outer_iterations,
        "final_delta": final_delta,
        "nnz": result.w.nnz,
        "d": result.w.n_rows,
        "n": int(x.shape[0]),
    }
    report_path = _write_json(os.path.join(out, "report.json"), report)
    outputs.append(report_path)
    _write_manifest(out, "learn", dataclasses.asdict(cfg), [args.input],
                    outputs, time.perf_counter() - t0)
    _progress(f"learned W: nnz={result.w.nnz} converged={result.converged}")
    return 0


def _report_dict(rep):
    d = dataclasses.asdict(rep)
    for key, val in d.items():
        if isinstance(val, float) and not np.isfinite(val):
            d[key] = None
    return d


def cmd_evaluate(args):
    t0 = time.perf_counter()
    out = _out_dir(args)
    truth = sparse.read_matrix_market(args.truth)
    inputs = [args.truth]
    outputs = []
    if args.grid:
        if not args.input:
            raise ValueError("--grid needs --input samples")
        x = _load_samples(args.input, args.center)
        inputs.append(args.input)
        cfg = _resolve_config(args, x.shape[0])
        eps_grid = [float(v) for v in args.eps_grid.split(",")]
        tau_grid = [float(v) for v in args.tau_grid.split(",")]
        outcome = evaluation.grid_search_detailed(
            x, truth, cfg, eps_grid, tau_grid, jobs=args.jobs,
            progress=_progress)
        w_path = os.path.join(out, "w_best.mtx")
        sparse.write_matrix_market(w_path, outcome.w_best)
        outputs.append(w_path)
        payload = {"best": _report_dict(outcome.report),
                   "cells": [_report_dict(c) for c in outcome.cells]}
        config = {"mode": "grid", "eps_grid": eps_grid, "tau_grid": tau_grid,
                  "learn": dataclasses.asdict(cfg)}
    else:
        if not args.learned:
            raise ValueError("need --learned W (or --grid with --input)")
        learned = sparse.read_matrix_market(args.learned)
        inputs.append(args.learned)
        cut = learner.post_threshold(learned, args.tau)
        rep = evaluation.compare_graphs(cut, truth)
        rep.auc_roc = evaluation.auc_roc(learned, truth)
        rep.best_tau = args.tau
        payload = {"best": _report_dict(rep), "tau": args.tau,
                   "is_dag": evaluation.is_dag(cut)}
        config = {"mode": "single", "tau": args.tau}
    report_path = _write_json(os.path.join(out, "report.json"), payload)
    outputs.append(report_path)
    _write_manifest(out, "evaluate", config, inputs, outputs,
                    time.perf_counter() - t0)
    best = payload["best"]
    _progress(f"f1={best['f1']:.4f} shd={best['shd']}")
    return 0


def cmd_check_grad(args):
    t0 = time.perf_counter()
    out = _out_dir(args)
    report = gradient_check(d=args.d, density=args.density, k=args.k,
                            alpha=args.alpha, trials=args.trials,
                            seed=args.seed, step=args.step, tol=args.tol)
    report_path = _write_json(os.path.join(out, "gradcheck.json"), report)
    _write_manifest(out, "check-grad",
                    {k: getattr(args, k) for k in
                     ("d", "density", "k", "alpha", "trials", "seed",
                      "step", "tol")},
                    [], [report_path], time.perf_counter() - t0)
    if report["vacuous"]:
        print("vacuous pass: no support entries to check")
        return 0
    print(f"max_rel_err={report['max_rel_err']:.6e} "
          f"entries={report['entries_checked']} "
          f"{'PASS' if report['passed'] else 'FAIL'}")
    return 0 if report["passed"] else 1


def _parse_int_list(text):
    return [int(v) for v in text.split(",") if v]


def cmd_bench(args):
    t0 = time.perf_counter()
    out = _out_dir(args)
    if args.suite == "accuracy":
        report = bench.accuracy_suite(
            out, models=tuple(args.models.split(",")),
            noises=tuple(args.noises.split(",")),
            d_list=tuple(_parse_int_list(args.d_list)),
            seeds=range(args.seeds), jobs=args.jobs, progress=_progress)
        config = {"suite": "accuracy", "models": args.models,
                  "noises": args.noises, "d_list": args.d_list,
                  "seeds": args.seeds}
    elif args.suite == "timing":
        report = bench.timing_suite(out,
                                    d_list=tuple(_parse_int_list(args.d_list)),
                                    seed=args.seed, progress=_progress)
        config = {"suite": "timing", "d_list": args.d_list, "seed": args.seed}
    else:
        points = []
        for part in args.points.split(","):
            d_str, nnz_str = part.split(":")
            points.append((int(d_str), int(nnz_str)))
        report = bench.scale_suite(out, points=tuple(points), k=args.k,
                                   reps=args.reps, progress=_progress)
        config = {"suite": "scale", "points": args.points, "k": args.k,
                  "reps": args.reps}
    outputs = [os.path.join(out, name) for name in os.listdir(out)
               if name != "manifest.json"]
    _write_manifest(out, f"bench-{args.suite}", config, [], outputs,
                    time.perf_counter() - t0)
    failed = report.get("failed", 0)
    _progress(f"bench {args.suite} done"
              + (f" ({failed} cells failed)" if failed else ""))
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(
        prog="spectrad",
        description="Sparse DAG structure learning with a spectral-radius "
                    "acyclicity bound")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    g = sub.add_parser("generate", help="synthesize a benchmark case")
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--model", choices=datagen.MODELS, required=True)
    g.add_argument("--degree", type=float, required=True)
    g.add_argument("--noise", choices=datagen.NOISES, required=True)
    g.add_argument("--n", type=int, default=None, help="default 10*d")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--raw-noise", action="store_true",
                   help="skip mean-centering of exp/gumbel noise")
    g.add_argument("--out-dir", default=None)
    g.set_defaults(func=cmd_generate)

    l = sub.add_parser("learn", help="run the structure learner")
    l.add_argument("--input", required=True, help="samples CSV, row = sample")
    l.add_argument("--center", action="store_true",
                   help="subtract per-column means first")
    l.add_argument("--out-dir", default=None)
    _add_config_flags(l)
    l.set_defaults(func=cmd_learn)

    e = sub.add_parser("evaluate", help="score a learned graph, or grid-search")
    e.add_argument("--truth", required=True, help="true adjacency (.mtx)")
    e.add_argument("--learned", default=None, help="learned W (.mtx)")
    e.add_argument("--tau", type=float, default=0.3)
    e.add_argument("--grid", action="store_true")
    e.add_argument("--input", default=None, help="samples CSV for --grid")
    e.add_argument("--center", action="store_true")
    e.add_argument("--eps-grid", default="1e-1,1e-2,1e-3,1e-4")
    e.add_argument("--tau-grid", default="0.1,0.2,0.3,0.4,0.5")
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--out-dir", default=None)
    _add_config_flags(e)
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("check-grad", help="finite-difference gradient check")
    c.add_argument("--d", type=int, default=20)
    c.add_argument("--density", type=float, default=0.2)
    c.add_argument("--k", type=int, default=5)
    c.add_argument("--alpha", type=float, default=0.9)
    c.add_argument("--trials", type=int, default=10)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--step", type=float, default=1e-6)
    c.add_argument("--tol", type=float, default=1e-6)
    c.add_argument("--out-dir", default=None)
    c.set_defaults(func=cmd_check_grad)

    b = sub.add_parser("bench", help="benchmark suites")
    b.add_argument("--suite", choices=("accuracy", "timing", "scale"),
                   required=True)
    b.add_argument("--models", default="er,sf")
    b.add_argument("--noises", default="gauss,exp,gumbel")
    b.add_argument("--d-list", default="10,20,50,100")
    b.add_argument("--seeds", type=int, default=5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--points",
                   default="10000:100000,10000:200000,100000:1000000",
                   help="scale suite d:nnz pairs")
    b.add_argument("--k", type=int, default=5)
    b.add_argument("--reps", type=int, default=3)
    b.add_argument("--out-dir", default=None)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except (NumericsError, PowerIterationError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
