"""Command-line entry point: ``lcmopt {simulate,fit,bench,project,report}``.

Exit codes: 0 success, 2 bad arguments or unreadable input, 3 when ``fit``
ends with a method whose best run did not converge.
"""

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import bench
from .em import EmConfig
from .model import InputError
from .pqn import PqnConfig
from .lbfgs import SIGMA_CONVENTIONS
from .simplex import ProductSimplex
from .simulate import bundle_registry, get_bundle, sample
from .sqp import SqpConfig

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED = 0, 2, 3


class UsageError(Exception):
    """Bad flag combination or unreadable input; maps to exit code 2."""


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {v}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _source_flags(p, *, params=False):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--bundle", help="benchmark bundle id, e.g. 1A")
    src.add_argument("--data", help="CSV of category labels, one observation per row")
    if params:
        src.add_argument("--params", help="JSON file with K, eta and pi")
    p.add_argument("--zero-based", action="store_true",
                   help="labels in the CSV start at 0 instead of 1")


def _solver_flags(p):
    p.add_argument("--method", choices=["em", "sqp", "pqn", "all"], default="all")
    p.add_argument("--classes", "-K", type=_positive_int,
                   help="number of latent classes (required with --data)")
    p.add_argument("--restarts", type=_positive_int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=_positive_float,
                   help="EM and PQN stopping tolerance (default 1e-4)")
    p.add_argument("--max-iter", type=_positive_int, help="iteration cap for every method")
    p.add_argument("--memory", type=_positive_int, default=5, help="PQN curvature pairs")
    p.add_argument("--sigma-convention", choices=SIGMA_CONVENTIONS, default="curvature")
    p.add_argument("--kkt-tol", type=_positive_float, help="SQP stopping tolerance (default 1e-6)")
    p.add_argument("--jobs", type=_positive_int, default=1, help="worker processes")
    p.add_argument("--format", choices=["json", "csv"], default="csv")
    p.add_argument("--ci", action="store_true",
                   help="95%% intervals from the best PQN/SQP run's Hessian approximation")


def build_parser():
    parser = argparse.ArgumentParser(prog="lcmopt", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file whose keys mirror the long flags")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a dataset from a bundle or parameter file")
    _source_flags(p, params=True)
    p.add_argument("--n", type=_positive_int, help="sample size (default: the bundle's N)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.add_argument("--emit-labels", action="store_true", help="append the latent class column")
    p.add_argument("--registry", action="store_true",
                   help="write the bundle registry as JSON instead of sampling")

    for name, text in (("fit", "fit a model and report the best run per method"),
                       ("bench", "run the multi-restart comparison and write reports")):
        p = sub.add_parser(name, help=text)
        _source_flags(p)
        _solver_flags(p)
        p.add_argument("--out", default=None if name == "fit" else "bench_out",
                       help="report directory")

    p = sub.add_parser("project", help="project a vector onto a product of simplexes")
    p.add_argument("--values", type=_float_list, required=True)
    p.add_argument("--sizes", type=_int_list, help="block sizes (default: one block)")
    p.add_argument("--format", choices=["json", "csv"], default="json")

    p = sub.add_parser("report", help="rebuild summary tables from a runs.json file")
    p.add_argument("--runs", required=True, help="runs.json written by fit or bench")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--format", choices=["json", "csv"], default="csv")
    p.add_argument("--bundle", help="add the true parameters of this bundle to the tables")
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        with open(known.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {known.config}: {exc}")
    if not isinstance(cfg, dict):
        parser.error("config must be a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    used = set()
    for sp in subparsers.choices.values():
        dests = {a.dest for a in sp._actions}
        mine = {k: v for k, v in cfg.items() if k in dests}
        sp.set_defaults(**mine)
        used |= set(mine)
    unknown = sorted(set(cfg) - used)
    if unknown:
        parser.error(f"unknown config keys: {', '.join(unknown)}")


def _load_source(args):
    """Dataset, class count, dataset id and (for bundles) the true parameters."""
    if args.bundle:
        try:
            spec = get_bundle(args.bundle)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
        data = sample(spec.params, spec.n, args.seed)
        return data, args.classes or spec.K, spec.id, spec.params
    if args.data:
        if not args.classes:
            raise UsageError("--classes is required with --data")
        data = bench.ingest_csv(args.data, zero_based=args.zero_based)
        return data, args.classes, os.path.basename(args.data), None
    raise UsageError("one of --bundle or --data is required")


def _settings(args):
    em, pqn, sqp = EmConfig(), PqnConfig(), SqpConfig()
    if args.epsilon is not None:
        em, pqn = replace(em, epsilon=args.epsilon), replace(pqn, epsilon=args.epsilon)
    if args.max_iter is not None:
        em = replace(em, max_iter=args.max_iter)
        pqn = replace(pqn, max_iter=args.max_iter)
        sqp = replace(sqp, max_iter=args.max_iter)
    if args.kkt_tol is not None:
        sqp = replace(sqp, kkt_tol=args.kkt_tol)
    pqn = replace(pqn, m=args.memory, sigma_convention=args.sigma_convention)
    return bench.SolverSettings(em=em, pqn=pqn, sqp=sqp)


def _methods(args):
    return bench.METHODS if args.method == "all" else (args.method,)


def _dump_rows(rows, fmt, out=None):
    out = sys.stdout if out is None else out
    if fmt == "json":
        json.dump(rows, out, indent=1)
        out.write("\n")
        return
    if not rows:
        return
    w = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)


def cmd_simulate(args):
    if args.registry:
        payload = {bid: spec.to_dict() for bid, spec in bundle_registry().items()}
        text = json.dumps(payload, indent=1) + "\n"
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    if args.bundle:
        try:
            spec = get_bundle(args.bundle)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
        params, n = spec.params, args.n or spec.n
    elif args.params:
        params = bench.read_params(args.params)
        if not args.n:
            raise UsageError("--n is required with --params")
        n = args.n
    else:
        raise UsageError("one of --bundle or --params is required")
    data, labels = sample(params, n, args.seed, return_labels=True)
    labels = labels + 1 if args.emit_labels else None
    if args.out:
        bench.write_dataset(args.out, data, labels)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"y{j + 1}" for j in range(data.scheme.d)] + (["class"] if args.emit_labels else []))
        for i, row in enumerate(data.rows):
            w.writerow(list(row) + ([int(labels[i])] if args.emit_labels else []))
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def _run(args):
    data, K, dataset_id, truth = _load_source(args)
    records = bench.run_experiment(
        data, K, _methods(args), args.restarts, args.seed,
        dataset_id=dataset_id, settings=_settings(args), jobs=args.jobs,
    )
    return data, truth, records


def _print_ci(records, fmt):
    labels = None
    for m in ("pqn", "sqp"):
        pool = [r for r in records if r.method == m]
        if not pool:
            continue
        best = bench.best_of(pool)
        labels = labels or bench.parameter_labels(best.params.K, best.params.scheme)
        try:
            rows = bench.confidence_report(best)
        except ValueError as exc:
            print(f"# {m}: {exc}", file=sys.stderr)
            continue
        for row in rows:
            row["method"] = m
            row["parameter"] = labels[row.pop("index")]
        _dump_rows([{k: r[k] for k in ("method", "parameter", "estimate", "se", "lower", "upper")}
                    for r in rows], fmt)


def cmd_fit(args):
    data, truth, records = _run(args)
    summary = bench.summary_rows(records, data=data, truth=truth)
    _dump_rows(summary, args.format)
    if args.ci:
        _print_ci(records, args.format)
    if args.out:
        bench.emit_report(records, args.out, args.format, data=data, truth=truth)
    not_converged = [m for m in _methods(args) if not bench.best_of(records, m).converged]
    if not_converged:
        print(f"best run did not converge for: {', '.join(not_converged)}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_bench(args):
    data, truth, records = _run(args)
    paths = bench.emit_report(records, args.out, args.format, data=data, truth=truth)
    _dump_rows(bench.summary_rows(records, data=data, truth=truth), args.format)
    if args.ci:
        _print_ci(records, args.format)
    for p in paths:
        print(f"# wrote {p}", file=sys.stderr)
    return EXIT_OK


def cmd_project(args):
    x = np.asarray(args.values, dtype=np.float64)
    sizes = args.sizes or [x.size]
    try:
        geom = ProductSimplex(sizes)
        y = geom.project(x)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.format == "json":
        print(json.dumps(y.tolist()))
    else:
        print(",".join(repr(float(v)) for v in y))
    return EXIT_OK


def cmd_report(args):
    try:
        records = bench.load_records(args.runs)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise UsageError(f"cannot read {args.runs}: {exc}") from None
    truth = None
    if args.bundle:
        try:
            truth = get_bundle(args.bundle).params
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
        if records and (records[0].params.scheme, records[0].params.K) != (truth.scheme, truth.K):
            raise UsageError(f"runs do not match the shape of bundle {args.bundle}")
    paths = bench.emit_report(records, args.out, args.format, truth=truth)
    for p in paths:
        print(f"# wrote {p}", file=sys.stderr)
    _dump_rows(bench.summary_rows(records), args.format)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "bench": cmd_bench,
            "project": cmd_project, "report": cmd_report}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (UsageError, InputError, FileNotFoundError) as exc:
        print(f"lcmopt {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
