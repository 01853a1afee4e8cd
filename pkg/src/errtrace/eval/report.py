"""Markdown and CSV renderings of evaluation results."""

from __future__ import annotations

import csv
import io
from typing import Mapping

from .metrics import BUCKETS, AccuracyReport, PrecisionReport, TimingReport


def _cell(c: int, n: int) -> str:
    if n == 0:
        return "–"
    return f"{c}/{n} ({100.0 * c / n:.1f}%)"


def accuracy_grid(rows: Mapping[str, AccuracyReport], external: Mapping[str, Mapping[str, str]] | None = None) -> str:
    """Hop-bucketed accuracy table with one row per backend.

    ``external`` adds rows for tools scored elsewhere, keyed by bucket name
    plus ``"overall"``; missing cells render as a dash.
    """
    head = "| Method | " + " | ".join(f"Hop {b}" for b in BUCKETS) + " | Overall |"
    sep = "|---" * (len(BUCKETS) + 2) + "|"
    lines = [head, sep]
    for name, rep in rows.items():
        cells = [_cell(*rep.per_bucket.get(b, (0, 0))) for b in BUCKETS]
        lines.append(f"| {name} | " + " | ".join(cells) + f" | {_cell(rep.correct, rep.total)} |")
    for name, cells in (external or {}).items():
        vals = [cells.get(b, "–") for b in BUCKETS] + [cells.get("overall", "–")]
        lines.append(f"| {name} | " + " | ".join(vals) + " |")
    return "\n".join(lines)


def precision_line(p: PrecisionReport) -> str:
    line = f"Static precision: {p.mean:.4f} over {len(p.per_template)} templates"
    if p.capped:
        line += f" ({len(p.capped)} capped at 1.0: candidate set smaller than the path)"
    return line


def timing_lines(t: TimingReport) -> list[str]:
    s = t.summary()
    if not s.get("n"):
        return ["Timing: no traces recorded"]
    out = [f"Timing over {s['n']} traces (seconds): median {s['median']:.4f}, "
           f"quartiles {s['q1']:.4f}/{s['q3']:.4f}, max {s['max']:.4f}"]
    steps = t.median_steps_by_bucket()
    if steps:
        out.append("Median tracer steps by hop bucket: " + ", ".join(f"{b}: {v:g}" for b, v in steps.items()))
    return out


def markdown_report(rows: Mapping[str, AccuracyReport], precision: PrecisionReport | None = None,
                    timing: TimingReport | None = None, title: str = "Error path reconstruction") -> str:
    parts = [f"# {title}", "", "## Accuracy by propagation hop", "", accuracy_grid(rows), ""]
    if precision is not None:
        parts += [precision_line(precision), ""]
    if timing is not None:
        parts += timing_lines(timing) + [""]
    return "\n".join(parts)


def csv_report(rows: Mapping[str, AccuracyReport], precision: PrecisionReport | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "bucket", "correct", "total", "accuracy"])
    for name, rep in rows.items():
        for b in BUCKETS:
            c, n = rep.per_bucket.get(b, (0, 0))
            w.writerow([name, b, c, n, f"{c / n:.6f}" if n else ""])
        w.writerow([name, "overall", rep.correct, rep.total, f"{rep.overall:.6f}"])
    if precision is not None:
        w.writerow(["static_precision", "overall", "", len(precision.per_template), f"{precision.mean:.6f}"])
    return buf.getvalue()
