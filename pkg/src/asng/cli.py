"""Command line front end for the toy benchmark.

Three subcommands:

``run``
    One experiment cell.  Writes ``runs.csv`` and ``summary.csv`` to the
    output directory, plus ``run.png`` with a histogram of hit iterations
    unless figures are disabled.

``sweep``
    A grid over algorithms and step sizes, the robustness study layout.
    Writes pooled ``runs.csv`` and ``summary.csv``, the plot data as
    ``sweep.dat`` and the rendered ``sweep.png``.

``summarize``
    Re-aggregates existing run CSVs (pooling across files) and writes a
    summary table to stdout or ``--out``.  When a run file sits next to a
    ``summary.csv``, the stored summaries are cross-checked against the
    recomputed ones and mismatches are reported as warnings.

Step-size flags are per algorithm (``--delta-init`` for asng,
``--delta-fixed`` for sng, ``--adam-step`` for adam-ng) so a flag that
silently means something else cannot be passed by accident; a mismatch is
a usage error.  Identical invocations produce byte-identical CSV and dat
files, including across ``--jobs`` settings.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time

from . import reporting
from .reporting import CellKey, CsvFormatError, PlotSeries
from .toy_bench import BenchConfig, summarize as summarize_records, run_experiment

log = logging.getLogger("asng.cli")

ALGOS = ("asng", "sng", "adam-ng")

# public CLI spelling -> internal identifier
_INTERNAL = {"asng": "asng", "sng": "sng", "adam-ng": "adam_ng"}
_STEP_FLAG = {"asng": "--delta-init", "sng": "--delta-fixed", "adam-ng": "--adam-step"}
_STEP_ATTR = {"--delta-init": "delta_init", "--delta-fixed": "delta_fixed",
              "--adam-step": "adam_step"}
_STEP_DEFAULT = {"asng": 1.0, "sng": 1.0, "adam-ng": 1e-3}

DEFAULT_ALPHA = 1.5
# 10^-2 .. 10^2 in half-decade steps, the robustness-study grid
DEFAULT_STEP_GRID = [10.0 ** (e / 2.0) for e in range(-4, 5)]


def _default_out() -> str:
    return os.environ.get("ASNG_BENCH_OUT", "results")


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _float_list(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    return values


def _add_bench_args(parser: argparse.ArgumentParser):
    parser.add_argument("--d", type=_positive_int, default=30,
                        help="number of categorical variables (default 30)")
    parser.add_argument("--k", type=_positive_int, default=5,
                        help="categories per variable (default 5)")
    parser.add_argument("--eps-x", type=float, default=0.05,
                        help="initial learning rate for the differentiable part")
    parser.add_argument("--runs", type=_positive_int, default=100,
                        help="independent runs per cell (default 100)")
    parser.add_argument("--max-iters", type=_nonneg_int, default=100_000,
                        help="iteration budget per run (default 100000)")
    parser.add_argument("--seed", type=_nonneg_int, default=0,
                        help="base seed; run i uses seed + i")
    parser.add_argument("--jobs", type=_positive_int, default=None,
                        help="worker processes (default: all cores)")
    parser.add_argument("--out", default=None,
                        help="output directory (default: $ASNG_BENCH_OUT or ./results)")
    parser.add_argument("--no-figure", action="store_true",
                        help="skip rendering png figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asng-bench",
        description="Toy benchmark for joint continuous plus categorical optimization.",
    )
    parser.add_argument("--quiet", action="store_true", help="log warnings only")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment cell")
    _add_bench_args(p_run)
    p_run.add_argument("--algo", choices=ALGOS, default="asng")
    p_run.add_argument("--delta-init", type=float, default=None,
                       help="initial trust parameter (asng only, default 1.0)")
    p_run.add_argument("--delta-fixed", type=float, default=None,
                       help="fixed step size (sng only, default 1.0)")
    p_run.add_argument("--adam-step", type=float, default=None,
                       help="step size (adam-ng only, default 0.001)")
    p_run.add_argument("--alpha", type=float, default=None,
                       help="adaptation threshold (asng only, default 1.5)")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="grid over algorithms and step sizes")
    _add_bench_args(p_sweep)
    p_sweep.add_argument("--algos", default="asng,sng,adam-ng",
                         help="comma-separated subset of: " + ", ".join(ALGOS))
    p_sweep.add_argument("--step-grid", type=_float_list, default=None,
                         help="comma-separated step sizes "
                              "(default: 0.01..100, half-decade spacing)")
    p_sweep.add_argument("--alpha-grid", type=_float_list, default=None,
                         help="asng adaptation thresholds (default: 1.5)")
    p_sweep.add_argument("--eps-x-grid", type=_float_list, default=None,
                         help="learning rates for the differentiable part "
                              "(default: the --eps-x value)")
    p_sweep.set_defaults(func=cmd_sweep)

    p_sum = sub.add_parser("summarize", help="re-aggregate existing run CSVs")
    p_sum.add_argument("paths", nargs="+", help="run CSV files to pool")
    p_sum.add_argument("--out", default=None,
                       help="write the summary CSV here instead of stdout")
    p_sum.set_defaults(func=cmd_summarize)

    return parser


def _resolve_step_args(parser, args) -> tuple[float, float | None]:
    """Returns (theta step value, alpha or None), rejecting flags that do
    not belong to the selected algorithm."""
    own_flag = _STEP_FLAG[args.algo]
    given = {flag: getattr(args, attr) for flag, attr in _STEP_ATTR.items()
             if getattr(args, attr) is not None}
    wrong = sorted(set(given) - {own_flag})
    if wrong:
        parser.error(f"{', '.join(wrong)} does not apply to --algo {args.algo}; "
                     f"its step size flag is {own_flag}")
    if args.alpha is not None and args.algo != "asng":
        parser.error(f"--alpha does not apply to --algo {args.algo}")
    step = given.get(own_flag, _STEP_DEFAULT[args.algo])
    alpha = (args.alpha if args.alpha is not None else DEFAULT_ALPHA) \
        if args.algo == "asng" else None
    return step, alpha


def _bench_config(args, algo: str, step: float, alpha: float | None,
                  eps_x: float) -> BenchConfig:
    return BenchConfig(
        d=args.d,
        k=args.k,
        algo=_INTERNAL[algo],
        theta_step=step,
        alpha=alpha if alpha is not None else DEFAULT_ALPHA,
        eps_x=eps_x,
        max_iters=args.max_iters,
        n_runs=args.runs,
        base_seed=args.seed,
        jobs=args.jobs,
    )


def _cell_key(algo: str, args, step: float, alpha: float | None,
              eps_x: float) -> CellKey:
    return CellKey(algo=algo, d=args.d, k=args.k, eps_x=eps_x,
                   theta_step_param=step, alpha=alpha)


def _run_cell(args, algo: str, step: float, alpha: float | None, eps_x: float):
    config = _bench_config(args, algo, step, alpha, eps_x)
    started = time.perf_counter()
    records = run_experiment(config)
    summary = summarize_records(records)
    log.info(
        "cell algo=%s step=%g%s eps_x=%g: rate %.2f, ert %s (%.1fs)",
        algo, step, "" if alpha is None else f" alpha={alpha:g}", eps_x,
        summary.success_rate,
        "failed" if summary.ert is None else f"{summary.ert:.1f}",
        time.perf_counter() - started,
    )
    return records, summary


def _out_dir(args) -> str:
    out = args.out if args.out is not None else _default_out()
    os.makedirs(out, exist_ok=True)
    return out


def cmd_run(args) -> int:
    parser = build_parser()
    step, alpha = _resolve_step_args(parser, args)
    out = _out_dir(args)
    key = _cell_key(args.algo, args, step, alpha, args.eps_x)

    records, summary = _run_cell(args, args.algo, step, alpha, args.eps_x)

    reporting.write_run_csv(os.path.join(out, "runs.csv"),
                            [(key, r) for r in records])
    reporting.write_summary_csv(os.path.join(out, "summary.csv"), [(key, summary)])
    if not args.no_figure:
        from .figures import render_run_figure

        title = f"{args.algo} step={step:g} d={args.d} k={args.k}"
        render_run_figure(os.path.join(out, "run.png"), records, title)
    log.info("wrote %s", out)
    return 0


def cmd_sweep(args) -> int:
    parser = build_parser()
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    for algo in algos:
        if algo not in ALGOS:
            parser.error(f"unknown algorithm {algo!r}; choose from {', '.join(ALGOS)}")
    if not algos:
        parser.error("--algos named no algorithms")
    step_grid = args.step_grid if args.step_grid is not None else DEFAULT_STEP_GRID
    alpha_grid = args.alpha_grid if args.alpha_grid is not None else [DEFAULT_ALPHA]
    eps_grid = args.eps_x_grid if args.eps_x_grid is not None else [args.eps_x]
    out = _out_dir(args)

    run_rows = []
    summary_rows = []
    series = []
    for algo in algos:
        for eps_x in eps_grid:
            # alpha only varies for asng; other algorithms get one line
            for alpha in (alpha_grid if algo == "asng" else [None]):
                costs = []
                for step in step_grid:
                    key = _cell_key(algo, args, step, alpha, eps_x)
                    records, summary = _run_cell(args, algo, step, alpha, eps_x)
                    run_rows.extend((key, r) for r in records)
                    summary_rows.append((key, summary))
                    costs.append(math.nan if summary.ert is None else summary.ert)
                label = algo
                if alpha is not None and len(alpha_grid) > 1:
                    label += f" alpha={alpha:g}"
                if len(eps_grid) > 1:
                    label += f" eps_x={eps_x:g}"
                series.append(PlotSeries(label=label, x=list(step_grid), y=costs))

    reporting.write_run_csv(os.path.join(out, "runs.csv"), run_rows)
    reporting.write_summary_csv(os.path.join(out, "summary.csv"), summary_rows)
    reporting.write_plot_data(os.path.join(out, "sweep.dat"), series,
                              x_name="theta_step", y_name="ert")
    if not args.no_figure:
        from .figures import render_sweep_figure

        render_sweep_figure(os.path.join(out, "sweep.png"), series,
                            d=args.d, k=args.k)
    log.info("wrote %s", out)
    return 0


def _check_stored_summaries(path, pooled: dict):
    """Compare a sibling summary.csv, if any, against recomputed values."""
    sibling = os.path.join(os.path.dirname(os.path.abspath(path)), "summary.csv")
    if not os.path.isfile(sibling):
        return
    try:
        stored = reporting.read_summary_csv(sibling)
    except CsvFormatError as exc:
        log.warning("could not cross-check %s: %s", sibling, exc)
        return
    fmt = reporting.format_float
    for key, s in stored:
        if key not in pooled:
            continue
        r = pooled[key]
        diffs = []
        if s.n_runs != r.n_runs:
            diffs.append(f"n_runs {s.n_runs} != {r.n_runs}")
        if s.n_success != r.n_success:
            diffs.append(f"n_success {s.n_success} != {r.n_success}")
        for name in ("success_rate", "median_hit_iteration", "ert"):
            a, b = getattr(s, name), getattr(r, name)
            same = (a is None and b is None) or \
                   (a is not None and b is not None and fmt(a) == fmt(b))
            if not same:
                diffs.append(f"{name} {a} != {b}")
        if diffs:
            log.warning("%s disagrees with pooled runs for %s: %s",
                        sibling, key, "; ".join(diffs))


def cmd_summarize(args) -> int:
    rows = []
    try:
        for path in args.paths:
            rows.extend(reporting.read_run_csv(path))
    except (CsvFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    groups = reporting.group_records(rows)
    pooled = {key: summarize_records(records) for key, records in groups.items()}
    out_rows = list(pooled.items())

    for path in args.paths:
        _check_stored_summaries(path, pooled)

    if args.out is None:
        reporting.write_summary_csv(sys.stdout, out_rows)
    else:
        reporting.write_summary_csv(args.out, out_rows)
        log.info("wrote %s", args.out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
