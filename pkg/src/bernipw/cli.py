"""Command-line interface: estimate curves from CSV data, select the
smoothing degree, tabulate asymptotic quantities, and run simulation
studies.  Every output file gets a manifest sufficient to re-run the
command bit-identically."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bernstein import smooth
from .data import Dataset, RescaleSpec, SchemaError, ingest_csv
from .ipw import EstimationError, PropensityModel, estimate_propensity, ipw_ecdf, ipw_weights, known_propensity
from .lscv import DegreeGrid, LscvTrace, select_degree
from .simulate import ESTIMATORS, MarBetaDgp, SimConfig, run_study
from .theory import (
    beta_mar_context,
    feasible_variance,
    optimal_degree_pointwise,
    propensity_estimation_gain,
    pseudo_variance,
    smoothing_bias,
    smoothing_variance_reduction,
    uniform_context,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_COMPUTE = 2


class CliUsageError(Exception):
    """Bad command line; maps to the input-error exit code."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors are input errors
        raise CliUsageError(message)


def _load_config_file(path: str) -> dict[str, str]:
    """Simple key=value file; keys use the long flag spelling without dashes."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliUsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _merge_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> argparse.Namespace:
    """Apply config-file values for flags the user did not set explicitly."""
    if getattr(args, "config", None) is None:
        return args
    file_values = _load_config_file(args.config)
    known = {}
    for action in parser._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                known[opt[2:]] = action
    for key, raw in file_values.items():
        if key not in known:
            raise CliUsageError(f"unknown config key {key!r}")
        action = known[key]
        if getattr(args, action.dest) is not None:
            continue  # flags override the file
        if isinstance(action, argparse._AppendAction):
            setattr(args, action.dest, [action.type(v) if action.type else v
                                        for v in raw.split(",")])
        elif action.type is not None:
            setattr(args, action.dest, action.type(raw))
        else:
            setattr(args, action.dest, raw)
    return args


def _defaulted(args: argparse.Namespace, defaults: dict) -> argparse.Namespace:
    for key, value in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    return args


def _write_manifest(path: Path, command: str, flags: dict, extra: dict) -> None:
    manifest = {
        "tool": "bernipw",
        "version": __version__,
        "command": command,
        "flags": flags,
        **extra,
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _flag_dict(args: argparse.Namespace) -> dict:
    skip = {"func", "defaults", "parser"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _parse_propensity_flags(pairs, csv_path, data: Dataset) -> PropensityModel | None:
    """Known propensities from repeated label=prob flags or a 2-column CSV;
    the special label 'all' applies one probability to every cell."""
    table: dict[str, float] = {}
    if csv_path:
        with open(csv_path, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row or row[0].startswith("#"):
                    continue
                if len(row) != 2:
                    raise SchemaError(f"{csv_path}: expected 2 columns, got {row}")
                table[row[0].strip()] = float(row[1])
    for pair in pairs or ():
        if "=" not in pair:
            raise CliUsageError(f"--propensity expects LABEL=PROB, got {pair!r}")
        label, prob = pair.split("=", 1)
        table[label.strip()] = float(prob)
    if not table:
        return None
    label_to_code = {label: code for code, label in data.cell_labels.items()}
    probs: dict[int, float] = {}
    if "all" in table:
        probs = {code: table["all"] for code in data.cells}
    for label, prob in table.items():
        if label == "all":
            continue
        if label not in label_to_code:
            raise SchemaError(f"propensity given for unknown cell label {label!r}")
        probs[label_to_code[label]] = prob
    missing = [data.label_of(c) for c in sorted(data.cells) if c not in probs]
    if missing:
        raise SchemaError(f"no propensity supplied for cells: {missing}")
    return known_propensity(probs)


def _ingest(args) -> Dataset:
    spec = None
    if (args.rescale_a is None) != (args.rescale_b is None):
        raise CliUsageError("--rescale-a and --rescale-b must be given together")
    if args.rescale_a is not None:
        spec = RescaleSpec(a=args.rescale_a, b=args.rescale_b)
    return ingest_csv(args.input, y_col=args.y_col, x_col=args.x_col,
                      delta_col=args.delta_col, rescale_spec=spec)


def _propensity_for(args, data: Dataset) -> PropensityModel:
    model = _parse_propensity_flags(args.propensity_known, args.propensity_csv, data)
    return model if model is not None else estimate_propensity(data)


def _write_trace(path: str, trace: LscvTrace, flags: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "lscv"])
        for m, value in zip(trace.degrees, trace.criteria):
            writer.writerow([m, repr(value)])
    _write_manifest(Path(path).with_suffix(Path(path).suffix + ".manifest.json"),
                    "select-degree", flags,
                    {"selected_degree": trace.selected, "criterion": trace.criterion})


def _add_io_flags(p: _Parser) -> None:
    p.add_argument("--input", required=True, help="input CSV path")
    p.add_argument("--y-col", default=None, help="response column name (default y)")
    p.add_argument("--x-col", default=None, help="covariate column name (default x)")
    p.add_argument("--delta-col", default=None, help="observation-flag column name (default delta)")
    p.add_argument("--rescale-a", type=float, default=None, help="lower cap in original units")
    p.add_argument("--rescale-b", type=float, default=None, help="upper cap in original units")
    p.add_argument("--propensity", action="append", default=None, metavar="LABEL=PROB", dest="propensity_known",
                   help="declare a cell's observation probability (repeatable; 'all=P' covers every cell)")
    p.add_argument("--propensity-csv", default=None, help="two-column CSV of cell label, probability")
    p.add_argument("--config", default=None, help="key=value file supplying defaults for any flag")


_IO_DEFAULTS = {"y_col": "y", "x_col": "x", "delta_col": "delta"}


def cmd_estimate(args) -> int:
    _defaulted(args, {**_IO_DEFAULTS, "grid": 512})
    data = _ingest(args)
    model = _propensity_for(args, data)
    weights = ipw_weights(data, model)
    ecdf = ipw_ecdf(data, model)
    trace = None
    if args.degree is not None:
        m_star = args.degree
    else:
        grid = DegreeGrid(m_min=args.m_min or 1, m_cap=args.m_cap or 300,
                          growth=args.m_growth or 3.0)
        trace = select_degree(data, weights, grid)
        m_star = trace.selected
    curve = smooth(ecdf, m_star)
    ys = np.linspace(0.0, 1.0, args.grid)
    smoothed = curve.evaluate(ys)
    stepped = ecdf.evaluate(ys)
    out = Path(args.out)
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y", "unsmoothed", "smoothed"])
        for row in zip(ys, stepped, smoothed):
            writer.writerow([repr(float(v)) for v in row])
    if args.emit_trace and trace is not None:
        _write_trace(args.emit_trace, trace, _flag_dict(args))
    _write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "estimate",
                    _flag_dict(args), {
                        "n": data.n,
                        "observed_rate": data.observed_rate,
                        "degree": m_star,
                        "degree_from_lscv": trace is not None,
                        "propensity": {
                            "kind": model.kind,
                            "per_cell": {data.label_of(c): model.probs[c]
                                         for c in sorted(data.cells)},
                        },
                        "grid_points": args.grid,
                        "outputs": [str(out)],
                    })
    print(f"n={data.n} observed_rate={data.observed_rate:.4f} m={m_star} -> {out}")
    return EXIT_OK


def cmd_select_degree(args) -> int:
    _defaulted(args, _IO_DEFAULTS)
    data = _ingest(args)
    model = _propensity_for(args, data)
    weights = ipw_weights(data, model)
    grid = DegreeGrid(m_min=args.m_min or 1, m_cap=args.m_cap or 300,
                      growth=args.m_growth or 3.0)
    trace = select_degree(data, weights, grid, workers=args.workers or os.cpu_count() or 1)
    if args.emit_trace:
        _write_trace(args.emit_trace, trace, _flag_dict(args))
    print(f"selected m={trace.selected} criterion={trace.criterion:.6g} "
          f"candidates={trace.degrees[0]}..{trace.degrees[-1]}")
    return EXIT_OK


def cmd_theory(args) -> int:
    _defaulted(args, {"y_grid": 99, "model": "beta25-mar"})
    if args.model == "beta25-mar":
        ctx = beta_mar_context()
    elif args.model == "uniform":
        ctx = uniform_context()
    else:
        raise CliUsageError(f"unknown model {args.model!r} (choose beta25-mar or uniform)")
    if args.n is None or args.n < 1:
        raise CliUsageError("--n is required and must be >= 1")
    grid_size = args.y_grid
    # quantities below are defined on the open interval; endpoints are excluded
    ys = (np.arange(grid_size) + 1.0) / (grid_size + 1.0)
    out = Path(args.out)
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y", "bias", "sigma2", "reduction", "gain", "nu2", "m_opt"])
        degenerate = 0
        for y in ys:
            y = float(y)
            try:
                m_opt = repr(optimal_degree_pointwise(ctx, y, args.n))
            except ValueError:
                m_opt = "nan"
                degenerate += 1
            writer.writerow([
                repr(y),
                repr(smoothing_bias(ctx, y)),
                repr(pseudo_variance(ctx, y)),
                repr(smoothing_variance_reduction(ctx, y)),
                repr(propensity_estimation_gain(ctx, y)),
                repr(feasible_variance(ctx, y)),
                m_opt,
            ])
    _write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "theory",
                    _flag_dict(args), {
                        "model": args.model,
                        "n": args.n,
                        "grid_points": grid_size,
                        "degenerate_points": degenerate,
                        "outputs": [str(out)],
                    })
    print(f"theory table for {args.model} (n={args.n}) -> {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    _defaulted(args, {
        "reps": None, "grid_size": 512, "roster": ["all"],
        "workers": os.cpu_count() or 1,
        "m_min": 1, "m_cap": 300, "m_growth": 3.0,
        "kde_h_min": 1e-3, "kde_h_max": 1.0, "kde_h_count": 40,
    })
    if not args.n:
        raise CliUsageError("at least one --n is required")
    if args.reps is None:
        raise CliUsageError("--reps is required")
    if args.seed is None:
        raise CliUsageError("--seed is required (randomized commands have no default seed)")
    config = SimConfig(
        sample_sizes=tuple(args.n),
        replications=args.reps,
        base_seed=args.seed,
        grid_size=args.grid_size,
        estimators=tuple(args.roster),
        dgp=MarBetaDgp(),
        degree_grid=DegreeGrid(m_min=args.m_min, m_cap=args.m_cap, growth=args.m_growth),
        bandwidth_count=args.kde_h_count,
        bandwidth_lo=args.kde_h_min,
        bandwidth_hi=args.kde_h_max,
        kde_grid_size=2048,
        workers=args.workers,
    )
    started = time.perf_counter()
    result = run_study(config)
    out = Path(f"{args.out}_summary.csv")
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "estimator", "reps", "failures",
                         "median_ise", "iqr_ise", "mean_ise", "variance_ise"])
        for s in result.summaries:
            writer.writerow([s.n, s.estimator, s.reps, s.failures,
                             repr(s.median), repr(s.iqr), repr(s.mean), repr(s.variance)])
    _write_manifest(Path(f"{args.out}_manifest.json"), "simulate",
                    _flag_dict(args), {
                        "base_seed": config.base_seed,
                        "grid_size": config.grid_size,
                        "estimators": list(config.estimators),
                        "failure_counts": {f"{n}/{e}": result.failures[(n, e)]
                                           for n in config.sample_sizes
                                           for e in config.estimators},
                        "wall_clock_seconds": time.perf_counter() - started,
                        "outputs": [str(out)],
                    })
    print(f"{len(result.summaries)} summary rows -> {out}")
    return EXIT_OK


def cmd_version(_args) -> int:
    print(f"bernipw {__version__}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="bernipw", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", parents=[], help="fit the smoothed CDF from a CSV file")
    _add_io_flags(p)
    p.add_argument("--degree", type=int, default=None,
                   help="fixed smoothing degree (skips cross-validation)")
    p.add_argument("--m-min", type=int, default=None)
    p.add_argument("--m-cap", type=int, default=None)
    p.add_argument("--m-growth", type=float, default=None)
    p.add_argument("--grid", type=int, default=None, help="output grid points (default 512)")
    p.add_argument("--emit-trace", default=None, help="write the (m, criterion) trace CSV here")
    p.add_argument("--out", required=True, help="output curve CSV path")
    p.set_defaults(func=cmd_estimate, parser=p)

    p = sub.add_parser("select-degree", help="run degree cross-validation only")
    _add_io_flags(p)
    p.add_argument("--m-min", type=int, default=None)
    p.add_argument("--m-cap", type=int, default=None)
    p.add_argument("--m-growth", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--emit-trace", default=None, help="write the (m, criterion) trace CSV here")
    p.set_defaults(func=cmd_select_degree, parser=p)

    p = sub.add_parser("theory", help="tabulate asymptotic quantities for a built-in model")
    p.add_argument("--model", default=None, help="beta25-mar (default) or uniform")
    p.add_argument("--y-grid", type=int, default=None, help="interior grid size (default 99)")
    p.add_argument("--n", type=int, default=None, help="sample size for the optimal degree")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_theory, parser=p)

    p = sub.add_parser("simulate", help="run the Monte Carlo study")
    p.add_argument("--n", type=int, action="append", default=None, help="sample size (repeatable)")
    p.add_argument("--reps", type=int, default=None, help="replications per sample size")
    p.add_argument("--seed", type=int, default=None, help="base seed (required)")
    p.add_argument("--roster", action="append", default=None,
                   help=f"estimator or alias (repeatable); names: {', '.join(ESTIMATORS)}, "
                        f"aliases: all, pseudo-all, feasible-all")
    p.add_argument("--grid-size", type=int, default=None, help="ISE grid points (default 512)")
    p.add_argument("--m-min", type=int, default=None)
    p.add_argument("--m-cap", type=int, default=None)
    p.add_argument("--m-growth", type=float, default=None)
    p.add_argument("--kde-h-min", type=float, default=None)
    p.add_argument("--kde-h-max", type=float, default=None)
    p.add_argument("--kde-h-count", type=int, default=None)
    p.add_argument("--workers", type=int, default=None, help="process-pool size (default 1)")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(func=cmd_simulate, parser=p)

    p = sub.add_parser("version", help="print the package version")
    p.set_defaults(func=cmd_version, parser=p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _merge_config(args, args.parser)
        return args.func(args)
    except CliUsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SchemaError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EstimationError as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except RuntimeError as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
