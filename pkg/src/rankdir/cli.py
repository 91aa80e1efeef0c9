"""Command line interface.

Subcommands: ``fit`` (estimate a direction from a CSV), ``ci`` (confidence
intervals), ``simulate`` (Monte Carlo scenarios), and ``check`` (numerical
verification suite). All outputs are CSV with a leading '#' comment line
recording the package version, the command line, and the seed, so a result
file is self-describing and a rerun of the same invocation is byte-identical.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure,
5 verification check failure. The environment variable RANKDIR_THREADS caps
worker threads for resampling and simulation (default 1, serial).
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import shlex
import sys

import numpy as np
import pandas as pd

from . import __version__
from ._validation import DataError, NumericalError, drop_incomplete_rows
from .estimators import make_estimator
from .inference import (
    anderson_darling_normality,
    bootstrap_ci,
    jackknife_angles,
    jackknife_normal_ci,
    percentile_jackknife_ci,
    studentized_ci,
)
from .simulate import load_scenario_config, preset_scenarios, run_scenario, summarize_trials, write_summary_csv
from .verify import run_all_checks

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4
EXIT_CHECK_FAILED = 5


class UsageError(Exception):
    """Bad flag combination or reference to something not in the input."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankdir",
        description="Direction estimation for monotone single-index models from response ranks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_args(p):
        p.add_argument("--input", required=True, help="input CSV with a header row")
        p.add_argument("--response", required=True, help="response column name")
        p.add_argument("--covariates", required=True,
                       help="comma-separated covariate column names")
        p.add_argument("--group", default=None,
                       help="optional grouping column; responses are ranked within groups")
        p.add_argument("--method", default="tgqr",
                       choices=["gqr", "tgqr", "eqr", "spearmax", "ols"],
                       help="estimator (default tgqr)")
        p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        p.add_argument("--output", default=None, help="output CSV path (default stdout)")

    p_fit = sub.add_parser("fit", help="fit a direction estimator on CSV data")
    add_data_args(p_fit)

    p_ci = sub.add_parser("ci", help="confidence intervals for the fitted direction")
    add_data_args(p_ci)
    p_ci.add_argument("--ci", default="bootstrap", dest="ci_method",
                      choices=["bootstrap", "jackknife", "jackknife-bc",
                               "percentile-jackknife", "studentized"],
                      help="interval method (default bootstrap)")
    p_ci.add_argument("--replicates", type=int, default=1000,
                      help="bootstrap resamples (default 1000; jackknife methods always use n)")
    p_ci.add_argument("--level", type=float, default=0.95,
                      help="confidence level (default 0.95)")

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo scenario")
    p_sim.add_argument("--scenario", default=None,
                       help="preset name: gaussian_grid, skew_sweep, stability_sweep")
    p_sim.add_argument("--config", default=None, help="scenario config file (INI)")
    p_sim.add_argument("--trials", type=int, default=None, help="override trial count")
    p_sim.add_argument("--seed", type=int, default=None, help="override scenario seed")
    p_sim.add_argument("--output", default=None, help="output CSV path (default stdout)")

    p_check = sub.add_parser("check", help="run the numerical verification suite")
    p_check.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p_check.add_argument("--perturb", type=float, default=1.0,
                         help="scale each check's target identity (negative-control aid)")
    p_check.add_argument("--output", default=None, help="optional CSV report path")

    return parser


def _thread_count() -> int:
    raw = os.environ.get("RANKDIR_THREADS")
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"RANKDIR_THREADS must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise UsageError(f"RANKDIR_THREADS must be a positive integer, got {raw!r}")
    return value


def _load_table(args):
    """Read the input CSV and pull out (X, y, groups, covariate names)."""
    try:
        frame = pd.read_csv(args.input, comment="#")
    except FileNotFoundError:
        raise DataError(f"cannot read input file {args.input!r}") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"malformed CSV {args.input!r}: {exc}") from exc
    covariates = [c.strip() for c in args.covariates.split(",") if c.strip()]
    if not covariates:
        raise UsageError("--covariates must name at least one column")
    wanted = [args.response] + covariates + ([args.group] if args.group else [])
    missing = [c for c in wanted if c not in frame.columns]
    if missing:
        raise UsageError(f"unknown column(s) {missing} not in CSV header {list(frame.columns)}")
    numeric = {}
    for col in [args.response] + covariates:
        try:
            numeric[col] = pd.to_numeric(frame[col], errors="raise").to_numpy(dtype=float)
        except (ValueError, TypeError) as exc:
            raise DataError(f"malformed CSV: column {col!r} is not numeric ({exc})") from exc
    X = np.column_stack([numeric[c] for c in covariates])
    y = numeric[args.response]
    groups = frame[args.group].to_numpy() if args.group else None
    return X, y, groups, covariates


def _make_cli_estimator(args):
    if args.method == "spearmax":
        return make_estimator(args.method, random_state=args.seed)
    return make_estimator(args.method)


def _comment_line(argv, seed) -> str:
    return f"# rankdir {__version__} | command: {shlex.join(argv)} | seed: {seed}"


def _write_csv(output, comment, header, rows):
    def emit(fp):
        fp.write(comment + "\n")
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)

    if output:
        with open(output, "w", newline="") as fp:
            emit(fp)
    else:
        emit(sys.stdout)


def _fmt(x) -> str:
    return f"{float(x):.12g}"


def cmd_fit(args, argv, threads) -> int:
    X, y, groups, names = _load_table(args)
    est = _make_cli_estimator(args)
    est.fit(X, y, groups)
    if est.n_dropped_:
        print(
            f"note: dropped {est.n_dropped_} incomplete row(s); "
            f"n_effective={est.n_effective_}",
            file=sys.stderr,
        )
    rows = []
    for j, name in enumerate(names):
        rows.append([name, _fmt(est.coef_[j]), _fmt(est.direction_[j])])
    rows.append(["intercept", _fmt(est.intercept_), ""])
    if len(names) == 2 and est.angle_ is not None:
        rows.append(["angle_degrees", _fmt(math.degrees(est.angle_)), ""])
    Xc, yc, gc, _ = drop_incomplete_rows(X, y, groups)
    if yc.size >= 8:
        try:
            ad = anderson_darling_normality(est.predict(Xc))
            rows.append(["ad_statistic", _fmt(ad.statistic), ""])
            rows.append(["ad_reject_at_0.001", "1" if ad.reject_at_001 else "0", ""])
        except DataError as exc:
            print(f"note: index normality diagnostic skipped ({exc})", file=sys.stderr)
    else:
        print("note: index normality diagnostic needs at least 8 rows, skipped", file=sys.stderr)
    _write_csv(args.output, _comment_line(argv, args.seed), ["term", "estimate", "direction"], rows)
    return EXIT_OK


def _excludes_zero(lower: float, upper: float) -> bool:
    return lower > 0.0 or upper < 0.0


def cmd_ci(args, argv, threads) -> int:
    if not 0.0 < args.level < 1.0:
        raise UsageError("--level must be strictly between 0 and 1")
    if args.replicates < 2:
        raise UsageError("--replicates must be at least 2")
    X, y, groups, names = _load_table(args)
    est = _make_cli_estimator(args)
    rows = []
    if args.ci_method == "bootstrap":
        intervals = bootstrap_ci(
            X, y, est, B=args.replicates, level=args.level,
            seed=args.seed, groups=groups, threads=threads,
        )
        for name, iv in zip(names, intervals):
            rows.append(
                [name, _fmt(iv.point), _fmt(iv.lower), _fmt(iv.upper),
                 "*" if _excludes_zero(iv.lower, iv.upper) else ""]
            )
    else:
        if X.shape[1] != 2:
            raise UsageError(f"--ci {args.ci_method} applies to the angle and needs exactly 2 covariates")
        if args.ci_method == "studentized":
            iv = studentized_ci(X, y, est, level=args.level, groups=groups, threads=threads)
        else:
            fitted = _make_cli_estimator(args).fit(X, y, groups)
            angles = jackknife_angles(X, y, est, groups=groups, threads=threads)
            if args.ci_method == "jackknife":
                iv = jackknife_normal_ci(fitted.angle_, angles, level=args.level)
            elif args.ci_method == "jackknife-bc":
                iv = jackknife_normal_ci(fitted.angle_, angles, level=args.level, bias_correct=True)
            else:
                iv = percentile_jackknife_ci(angles, level=args.level)
        rows.append(
            ["angle_degrees", _fmt(math.degrees(iv.point)), _fmt(math.degrees(iv.lower)),
             _fmt(math.degrees(iv.upper)),
             "*" if _excludes_zero(iv.lower, iv.upper) else ""]
        )
    _write_csv(
        args.output, _comment_line(argv, args.seed),
        ["term", "estimate", "lower", "upper", "excludes_zero"], rows,
    )
    return EXIT_OK


def cmd_simulate(args, argv, threads) -> int:
    if bool(args.scenario) == bool(args.config):
        raise UsageError("provide exactly one of --scenario or --config")
    if args.scenario:
        presets = preset_scenarios()
        if args.scenario not in presets:
            raise UsageError(
                f"unknown scenario {args.scenario!r}; presets: {', '.join(sorted(presets))}"
            )
        config = presets[args.scenario]
    else:
        config = load_scenario_config(args.config)
    from dataclasses import replace as _replace

    if args.trials is not None:
        if args.trials < 1:
            raise UsageError("--trials must be at least 1")
        config = _replace(config, trials=args.trials)
    if args.seed is not None:
        config = _replace(config, seed=args.seed)
    records = run_scenario(config, threads=threads)
    summaries = summarize_trials(records)
    comment = _comment_line(argv, config.seed)
    if args.output:
        with open(args.output, "w", newline="") as fp:
            write_summary_csv(summaries, fp, comment=comment)
    else:
        write_summary_csv(summaries, sys.stdout, comment=comment)
    return EXIT_OK


def cmd_check(args, argv, threads) -> int:
    reports = run_all_checks(seed=args.seed, perturb=args.perturb)
    width = max(len(r.check_name) for r in reports)
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        print(
            f"{status}  {r.check_name:<{width}}  statistic={r.statistic:.6g}  "
            f"threshold={r.threshold:.6g}  n={r.n_used}  replicates={r.replicates}"
        )
    if args.output:
        rows = [
            [r.check_name, _fmt(r.statistic), _fmt(r.threshold),
             "1" if r.passed else "0", r.n_used, r.replicates]
            for r in reports
        ]
        _write_csv(
            args.output, _comment_line(argv, args.seed),
            ["check_name", "statistic", "threshold", "passed", "n_used", "replicates"], rows,
        )
    failed = [r.check_name for r in reports if not r.passed]
    if failed:
        print(f"failed checks: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        threads = _thread_count()
        if args.command == "fit":
            return cmd_fit(args, argv, threads)
        if args.command == "ci":
            return cmd_ci(args, argv, threads)
        if args.command == "simulate":
            return cmd_simulate(args, argv, threads)
        if args.command == "check":
            return cmd_check(args, argv, threads)
        raise UsageError(f"unknown command {args.command!r}")  # pragma: no cover
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
