"""Delimited output for benchmark results (schema version 1).

Run rows carry the full grid key so files from different cells or machines
concatenate cleanly; summary rows are recomputable from run rows, which is
what ``asng-bench summarize`` does to cross-check a results directory.

Every float is serialized with ``repr``, which round-trips exactly in
binary64.  Fields with no value are empty, except the ``ert`` summary cell
which shows ``failed`` when no run of the cell succeeded.  ``wall_ms`` is
intentionally left empty on disk: files produced by identical invocations
must be byte-identical, and timing is not reproducible.  Timings stay
available on the in-memory records and in the log.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .joint_loop import TraceRow
from .toy_bench import RunRecord, Summary

__all__ = [
    "SCHEMA_VERSION",
    "RUN_COLUMNS",
    "SUMMARY_COLUMNS",
    "CsvFormatError",
    "CellKey",
    "PlotSeries",
    "format_float",
    "write_run_csv",
    "read_run_csv",
    "write_summary_csv",
    "read_summary_csv",
    "write_trace_csv",
    "write_plot_data",
    "group_records",
]

SCHEMA_VERSION = 1

KEY_COLUMNS = ["algo", "d", "k", "eps_x", "theta_step_param", "alpha"]
RUN_COLUMNS = KEY_COLUMNS + [
    "run_id",
    "seed",
    "success",
    "hit_iteration",
    "final_true_objective",
    "wall_ms",
]
SUMMARY_COLUMNS = KEY_COLUMNS + [
    "n_runs",
    "n_success",
    "success_rate",
    "median_hit_iteration",
    "ert",
]

FAILED_SENTINEL = "failed"


class CsvFormatError(ValueError):
    """Malformed results file; the message carries path and line number."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


@dataclass(frozen=True)
class CellKey:
    """Grid coordinates shared by every row of one experiment cell."""

    algo: str
    d: int
    k: int
    eps_x: float
    theta_step_param: float
    alpha: float | None  # None for algorithms without an alpha


@dataclass(frozen=True)
class PlotSeries:
    label: str
    x: Sequence[float]
    y: Sequence[float]


def format_float(x: float) -> str:
    return repr(float(x))


def _opt(value, fmt) -> str:
    return "" if value is None else fmt(value)


def _key_cells(key: CellKey) -> list[str]:
    return [
        key.algo,
        str(key.d),
        str(key.k),
        format_float(key.eps_x),
        format_float(key.theta_step_param),
        _opt(key.alpha, format_float),
    ]


def _write_csv(dest, header: list[str], rows: Iterable[list[str]]):
    # dest is a path or an open text stream (the CLI summarizes to stdout)
    if hasattr(dest, "write"):
        writer = csv.writer(dest, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return
    with open(dest, "w", newline="") as fh:
        _write_csv(fh, header, rows)


def write_run_csv(path, rows: Sequence[tuple[CellKey, RunRecord]]):
    def cells(key, rec):
        return _key_cells(key) + [
            str(rec.run_id),
            str(rec.seed),
            "1" if rec.success else "0",
            _opt(rec.hit_iteration, str),
            format_float(rec.final_true_objective),
            "",  # wall_ms: kept off disk for byte-reproducibility
        ]

    _write_csv(path, RUN_COLUMNS, (cells(k, r) for k, r in rows))


def write_summary_csv(path, rows: Sequence[tuple[CellKey, Summary]]):
    def cells(key, s):
        return _key_cells(key) + [
            str(s.n_runs),
            str(s.n_success),
            format_float(s.success_rate),
            _opt(s.median_hit_iteration, format_float),
            FAILED_SENTINEL if s.ert is None else format_float(s.ert),
        ]

    _write_csv(path, SUMMARY_COLUMNS, (cells(k, s) for k, s in rows))


class _RowReader:
    """csv.reader wrapper that validates the header and column counts and
    reports 1-based line numbers on every failure."""

    def __init__(self, path, columns):
        self.path = path
        self.columns = columns
        self.line = 0

    def __enter__(self):
        self._fh = open(self.path, newline="")
        self._rows = csv.reader(self._fh)
        header = self._next_row()
        if header is None:
            raise CsvFormatError(self.path, 1, "missing header row")
        if header != self.columns:
            raise CsvFormatError(
                self.path, 1, f"header {header!r} does not match schema {self.columns!r}"
            )
        return self

    def __exit__(self, *exc):
        self._fh.close()

    def _next_row(self):
        try:
            row = next(self._rows, None)
        except csv.Error as exc:
            raise CsvFormatError(self.path, self.line + 1, str(exc)) from exc
        if row is not None:
            self.line = self._rows.line_num
            if len(row) != len(self.columns):
                raise CsvFormatError(
                    self.path,
                    self.line,
                    f"expected {len(self.columns)} columns, found {len(row)}",
                )
        return row

    def __iter__(self):
        while True:
            row = self._next_row()
            if row is None:
                return
            yield self.line, row

    def fail(self, message):
        raise CsvFormatError(self.path, self.line, message)


def _parse_int(reader, cell, column):
    try:
        return int(cell)
    except ValueError:
        reader.fail(f"column {column}: not an integer: {cell!r}")


def _parse_float(reader, cell, column):
    try:
        return float(cell)
    except ValueError:
        reader.fail(f"column {column}: not a number: {cell!r}")


def _parse_key(reader, row) -> CellKey:
    return CellKey(
        algo=row[0],
        d=_parse_int(reader, row[1], "d"),
        k=_parse_int(reader, row[2], "k"),
        eps_x=_parse_float(reader, row[3], "eps_x"),
        theta_step_param=_parse_float(reader, row[4], "theta_step_param"),
        alpha=None if row[5] == "" else _parse_float(reader, row[5], "alpha"),
    )


def read_run_csv(path) -> list[tuple[CellKey, RunRecord]]:
    out = []
    with _RowReader(path, RUN_COLUMNS) as reader:
        for _, row in reader:
            key = _parse_key(reader, row)
            success_cell = row[8]
            if success_cell not in ("0", "1"):
                reader.fail(f"column success: expected 0 or 1, found {success_cell!r}")
            success = success_cell == "1"
            hit = None if row[9] == "" else _parse_int(reader, row[9], "hit_iteration")
            if success != (hit is not None):
                reader.fail("success flag inconsistent with hit_iteration")
            out.append(
                (
                    key,
                    RunRecord(
                        run_id=_parse_int(reader, row[6], "run_id"),
                        seed=_parse_int(reader, row[7], "seed"),
                        success=success,
                        hit_iteration=hit,
                        final_true_objective=_parse_float(
                            reader, row[10], "final_true_objective"
                        ),
                        wall_ms=math.nan
                        if row[11] == ""
                        else _parse_float(reader, row[11], "wall_ms"),
                    ),
                )
            )
    return out


def read_summary_csv(path) -> list[tuple[CellKey, Summary]]:
    out = []
    with _RowReader(path, SUMMARY_COLUMNS) as reader:
        for _, row in reader:
            key = _parse_key(reader, row)
            median = (
                None if row[9] == "" else _parse_float(reader, row[9], "median_hit_iteration")
            )
            ert = (
                None
                if row[10] == FAILED_SENTINEL
                else _parse_float(reader, row[10], "ert")
            )
            out.append(
                (
                    key,
                    Summary(
                        n_runs=_parse_int(reader, row[6], "n_runs"),
                        n_success=_parse_int(reader, row[7], "n_success"),
                        success_rate=_parse_float(reader, row[8], "success_rate"),
                        median_hit_iteration=median,
                        ert=ert,
                    ),
                )
            )
    return out


def group_records(
    rows: Sequence[tuple[CellKey, RunRecord]]
) -> dict[CellKey, list[RunRecord]]:
    """Group run rows by cell, preserving first-appearance order."""
    groups: dict[CellKey, list[RunRecord]] = {}
    for key, rec in rows:
        groups.setdefault(key, []).append(rec)
    return groups


def write_trace_csv(path, trace: Sequence[TraceRow]):
    columns = ["t", "delta_theta", "beta", "g_fisher_norm", "snr", "big_delta", "hit"]

    def cells(row: TraceRow):
        return [
            str(row.t),
            format_float(row.delta_theta),
            format_float(row.beta),
            format_float(row.g_fisher_norm),
            format_float(row.snr),
            format_float(row.big_delta),
            "1" if row.hit else "0",
        ]

    _write_csv(path, columns, (cells(r) for r in trace))


def write_plot_data(path, series: Sequence[PlotSeries], x_name: str, y_name: str):
    """Whitespace-separated series blocks with a comment header.

    Blocks are separated by blank lines; each block starts with a
    ``# series:`` comment naming it, so the file plots directly with
    gnuplot-style index selection.  Points with a non-finite y are left
    out: a cell that never succeeded shows up as a gap, not a number.
    """
    lines = [f"# columns: {x_name} {y_name}"]
    for s in series:
        lines.append("")
        lines.append(f"# series: {s.label}")
        for xv, yv in zip(s.x, s.y):
            if math.isfinite(yv):
                lines.append(f"{format_float(xv)} {format_float(yv)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
