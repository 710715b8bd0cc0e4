"""Command-line entry point: ``gpclust {simulate,fit,eval,bench}``.

Exit codes: 0 success, 1 I/O failure, 2 usage or validation error,
3 numerical or model failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .datasets import (
    load_csv,
    moving_average,
    read_labels,
    scenario,
    simulate_mixture,
    write_csv,
    write_labels,
)
from .em import DegenerateComponentError, FitConfig, fit
from .errors import DomainError, GPClustError, NumericalError, ParseError
from .metrics import nmi

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _add_fit_options(p):
    p.add_argument("--G", type=int, default=2, help="number of clusters")
    p.add_argument("--kernel", choices=["sqexp", "matern12"], default="sqexp")
    p.add_argument("--lr", type=float, default=FitConfig.learning_rate, help="learning rate")
    p.add_argument("--max-iters", type=int, default=FitConfig.max_iters)
    p.add_argument("--tol", type=float, default=FitConfig.tol)
    p.add_argument("--restarts", type=int, default=FitConfig.restarts)
    p.add_argument("--gradient", choices=["analytic", "fd"], default="analytic")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpclust", description="Gaussian-process mixture clustering")
    parser.add_argument("--threads", type=int, default=None, help="cap on BLAS worker threads")
    parser.add_argument("--config", type=Path, default=None, help="JSON file of option defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a two-cluster GP mixture")
    p.add_argument("--scenario", type=int, choices=[1, 2], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=int, default=300, help="grid length")
    p.add_argument("--n-per-cluster", type=int, default=10)
    p.add_argument("--kernel", choices=["sqexp", "matern12"], default="sqexp")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--labels-out", type=Path, default=None, help="default: <out stem>.truth.csv")

    p = sub.add_parser("fit", help="cluster the curves of a CSV dataset")
    p.add_argument("data", type=Path)
    p.add_argument("--backend", choices=["exact", "vecchia"], default="exact")
    p.add_argument("--m", type=int, default=None, help="conditioning-set size (vecchia)")
    p.add_argument("--window", type=int, default=1, help="centered moving-average window")
    p.add_argument("--out-json", type=Path, default=None, help="default: <data stem>.fit.json")
    p.add_argument("--labels-out", type=Path, default=None, help="default: <data stem>.labels.csv")
    _add_fit_options(p)

    p = sub.add_parser("eval", help="NMI between two label files")
    p.add_argument("labels_a", type=Path)
    p.add_argument("labels_b", type=Path)

    p = sub.add_parser("bench", help="paired exact-vs-Vecchia timing and accuracy")
    p.add_argument("--scenario", type=int, choices=[1, 2], default=2)
    p.add_argument("--p", type=int, default=300)
    p.add_argument("--n-per-cluster", type=int, default=10)
    p.add_argument("--ms", type=int, nargs="+", default=[30])
    p.add_argument("--trials", type=int, default=25)
    p.add_argument("--out", type=Path, required=True)
    _add_fit_options(p)
    return parser


def _apply_config(parser, argv):
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        config = json.loads(args.config.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}")
    if not isinstance(config, dict):
        raise UsageError("config must be a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions} - {"help"}
    unknown = sorted(set(config) - known)
    if unknown:
        raise UsageError(f"unknown config keys for {args.command!r}: {', '.join(unknown)}")
    sub.set_defaults(**config)
    return parser.parse_args(argv)


def _fit_config(args, backend="exact", m=None) -> FitConfig:
    return FitConfig(
        backend=backend,
        m=m,
        kernel=args.kernel,
        learning_rate=args.lr,
        max_iters=args.max_iters,
        tol=args.tol,
        restarts=args.restarts,
        seed=args.seed,
        gradient=args.gradient,
    )


def cmd_simulate(args) -> int:
    spec = scenario(args.scenario, p=args.p, n_per_cluster=args.n_per_cluster, seed=args.seed, family=args.kernel)
    ds = simulate_mixture(spec)
    labels_out = args.labels_out or args.out.with_suffix(".truth.csv")
    write_csv(ds, args.out)
    write_labels(ds.truth, labels_out, list(ds.names))
    print(f"scenario {args.scenario}: N={ds.N} p={ds.p} seed={args.seed} -> {args.out}, {labels_out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    if args.backend == "vecchia" and args.m is None:
        raise UsageError("--backend vecchia requires --m")
    ds = load_csv(args.data)
    if args.window != 1:
        ds = moving_average(ds, args.window)
    cfg = _fit_config(args, args.backend, args.m if args.backend == "vecchia" else None)
    result = fit(ds, args.G, cfg)
    stem = args.data.with_suffix("")
    out_json = args.out_json or Path(f"{stem}.fit.json")
    labels_out = args.labels_out or Path(f"{stem}.labels.csv")
    payload = result.to_dict()
    payload["curves"] = list(ds.names)
    payload["p"] = ds.p
    out_json.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_labels(result.labels, labels_out, list(ds.names))
    print(
        f"{result.backend} fit: G={args.G} iterations={result.iterations} "
        f"loglik={result.loglik:.6f} labels={' '.join(map(str, result.labels))}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    a = read_labels(args.labels_a)
    b = read_labels(args.labels_b)
    if a.size != b.size:
        raise UsageError(f"label files differ in length ({a.size} vs {b.size})")
    print(f"{nmi(a, b):.6f}")
    return EXIT_OK


BENCH_COLUMNS = ["trial", "backend", "m", "p", "iterations", "seconds_per_iteration", "nmi"]


def run_bench(scenario_number, p, ms, trials, cfg: FitConfig, n_per_cluster=10, seed=0):
    """Paired exact and Vecchia fits on the same simulated data and seeds."""
    rows = []
    for t in range(trials):
        ds = simulate_mixture(scenario(scenario_number, p=p, n_per_cluster=n_per_cluster, seed=seed + t))
        base = FitConfig(**{**cfg.__dict__, "seed": seed + t, "backend": "exact", "m": None})
        runs = [("exact", None)] + [("vecchia", m) for m in ms]
        for backend, m in runs:
            res = fit(ds, 2, FitConfig(**{**base.__dict__, "backend": backend, "m": m}))
            rows.append(
                {
                    "trial": t,
                    "backend": backend,
                    "m": "" if m is None else m,
                    "p": p,
                    "iterations": res.iterations,
                    "seconds_per_iteration": res.seconds_per_iteration,
                    "nmi": nmi(res.labels, ds.truth),
                }
            )
    return rows


def median_ratios(rows, ms):
    """Median over trials of Vecchia / exact seconds per iteration, per m."""
    exact = {r["trial"]: r["seconds_per_iteration"] for r in rows if r["backend"] == "exact"}
    out = {}
    for m in ms:
        ratios = [r["seconds_per_iteration"] / exact[r["trial"]] for r in rows if r["backend"] == "vecchia" and r["m"] == m]
        out[m] = float(np.median(ratios))
    return out


def cmd_bench(args) -> int:
    cfg = _fit_config(args)
    rows = run_bench(args.scenario, args.p, args.ms, args.trials, cfg, args.n_per_cluster, args.seed)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({**r, "seconds_per_iteration": f"{r['seconds_per_iteration']:.6e}", "nmi": f"{r['nmi']:.6f}"})
    args.out.write_text(buf.getvalue(), encoding="utf-8")
    for m, ratio in median_ratios(rows, args.ms).items():
        print(f"p={args.p} m={m}: median vecchia/exact seconds per iteration = {ratio:.3f}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "eval": cmd_eval, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except UsageError as exc:
        print(f"gpclust: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    limiter = None
    if args.threads is not None:
        if args.threads < 1:
            print("gpclust: error: --threads must be >= 1", file=sys.stderr)
            return EXIT_USAGE
        from threadpoolctl import threadpool_limits

        limiter = threadpool_limits(limits=args.threads)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"gpclust: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateComponentError, NumericalError, np.linalg.LinAlgError) as exc:
        print(f"gpclust: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ParseError, DomainError, GPClustError) as exc:
        print(f"gpclust: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"gpclust: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    finally:
        if limiter is not None:
            limiter.unregister()


if __name__ == "__main__":
    sys.exit(main())
