"""Byte-stable CSV and Markdown emission of study reports."""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .rates import CellResult, RateReport

CELL_COLUMNS = ["n", "d", "s_star", "metric", "mean", "se", "predicted_rate"]
SLOPE_COLUMNS = ["metric", "axis", "slice", "slope", "intercept", "r_squared", "points"]


def _num(v) -> str:
    return repr(float(v))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def cells_csv(report: RateReport) -> str:
    rows = [[c.n, c.d, c.s_star, c.metric, _num(c.mean), _num(c.se), _num(c.predicted_rate)] for c in report.cells]
    return _csv_text(CELL_COLUMNS, rows)


def slopes_csv(report: RateReport) -> str:
    rows = [
        [r.metric, r.axis, r.slice, _num(r.fit.slope), _num(r.fit.intercept), _num(r.fit.r_squared), r.fit.points]
        for r in report.slope_fits
    ]
    return _csv_text(SLOPE_COLUMNS, rows)


def report_markdown(report: RateReport) -> str:
    lines = [f"# {report.title.capitalize()}", ""]
    status = "PASS" if report.passed else "FAIL"
    lines += [f"Overall: **{status}** ({sum(c.passed for c in report.checks)}/{len(report.checks)} checks)", ""]
    if report.notes:
        lines += ["## Notes", ""] + [f"- {note}" for note in report.notes] + [""]
    lines += [
        "The rate constant is calibrated separately per design kind and prior;",
        "the theory only asserts that some constant exists.",
        "",
        "## Checks",
        "",
        "| check | result | detail |",
        "| --- | --- | --- |",
    ]
    for c in report.checks:
        lines.append(f"| {c.name} | {'pass' if c.passed else 'FAIL'} | {c.detail} |")
    lines += ["", "## Cells", "", "| n | d | s* | metric | mean | se | predicted rate |", "| --- | --- | --- | --- | --- | --- | --- |"]
    for c in report.cells:
        lines.append(f"| {c.n} | {c.d} | {c.s_star} | {c.metric} | {c.mean:.6g} | {c.se:.3g} | {c.predicted_rate:.6g} |")
    lines += ["", "## Slope fits", "", "| metric | axis | slice | slope | intercept | R^2 |", "| --- | --- | --- | --- | --- | --- |"]
    for r in report.slope_fits:
        f = r.fit
        lines.append(f"| {r.metric} | {r.axis} | {r.slice} | {f.slope:.4f} | {f.intercept:.4f} | {f.r_squared:.4f} |")
    lines += [
        "",
        "Plot-ready data: `cells.csv` has one row per (cell, metric); for gnuplot,",
        "filter a metric and plot `log(n)` against `log(mean)`.",
        "",
    ]
    return "\n".join(lines)


def emit_report(report: RateReport, out_dir) -> dict:
    """Write ``cells.csv``, ``slopes.csv`` and ``report.md``; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, text in (
        ("cells.csv", cells_csv(report)),
        ("slopes.csv", slopes_csv(report)),
        ("report.md", report_markdown(report)),
    ):
        path = out / name
        with path.open("w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        paths[name] = path
    return paths


def read_cells(path) -> list:
    """Parse a ``cells.csv`` back into :class:`CellResult` records (without replicate values)."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [
            CellResult(
                int(row["n"]),
                int(row["d"]),
                int(row["s_star"]),
                row["metric"],
                float(row["mean"]),
                float(row["se"]),
                float(row["predicted_rate"]),
            )
            for row in reader
        ]
