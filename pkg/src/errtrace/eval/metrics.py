"""Accuracy, static precision and timing over generator ground truth."""

from __future__ import annotations

import csv
import io
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .generator import GroundTruth, GroundTruthEntry

BUCKETS = ("0", "1", "2", "3", "≥4")


def hop_bucket(hops: int) -> str:
    return str(hops) if hops < 4 else "≥4"


def align_truth(templates: Iterable, truth: GroundTruth) -> dict[str, GroundTruthEntry]:
    """Map template ids to ground-truth errors through the log origin."""
    by_key = truth.by_key()
    out = {}
    for t in templates:
        if t.origin is None:
            continue
        e = by_key.get(f"{t.origin[0]}:{t.origin[1]}")
        if e is not None:
            out[t.template_id] = e
    return out


@dataclass
class AccuracyReport:
    correct: int
    total: int
    per_bucket: dict[str, tuple[int, int]]
    wrong: list[str] = field(default_factory=list)

    @property
    def overall(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def bucket_ratio(self, b: str) -> float | None:
        c, n = self.per_bucket.get(b, (0, 0))
        return c / n if n else None


def accuracy(predicted: Mapping[str, Sequence[str] | None], truth: Mapping[str, GroundTruthEntry]) -> AccuracyReport:
    """Rank-1 exact path match; ``predicted`` maps template id to its best
    path as function-id strings (None when the trace failed)."""
    per: dict[str, list[int]] = {b: [0, 0] for b in BUCKETS}
    correct = 0
    wrong = []
    for tid, gt in sorted(truth.items()):
        b = hop_bucket(gt.hop_count)
        per[b][1] += 1
        pred = predicted.get(tid)
        if pred is not None and list(pred) == list(gt.path):
            per[b][0] += 1
            correct += 1
        else:
            wrong.append(tid)
    return AccuracyReport(correct, len(truth), {b: (c, n) for b, (c, n) in per.items()}, wrong)


@dataclass
class PrecisionReport:
    mean: float
    per_template: dict[str, float]
    capped: list[str]


def static_precision(candidates: Mapping[str, Iterable[str]], truth: Mapping[str, GroundTruthEntry]) -> PrecisionReport:
    """Mean of |ground-truth path| / |candidate functions|, each capped at 1."""
    ratios = {}
    capped = []
    for tid, gt in sorted(truth.items()):
        cands = set(candidates.get(tid, ()))
        path = set(gt.path)
        if not cands:
            ratios[tid] = 0.0
            continue
        r = len(path) / len(cands)
        if r > 1.0:
            capped.append(tid)
            r = 1.0
        ratios[tid] = r
    mean = sum(ratios.values()) / len(ratios) if ratios else 0.0
    return PrecisionReport(mean, ratios, capped)


@dataclass
class TimingRow:
    template_id: str
    hop_bucket: str
    seconds: float
    steps: int


@dataclass
class TimingReport:
    rows: list[TimingRow]

    def summary(self) -> dict[str, float]:
        xs = sorted(r.seconds for r in self.rows)
        if not xs:
            return {"n": 0}
        if len(xs) >= 2:
            q1, med, q3 = statistics.quantiles(xs, n=4, method="inclusive")
        else:
            q1 = med = q3 = xs[0]
        return {"n": len(xs), "min": xs[0], "q1": q1, "median": med, "q3": q3, "max": xs[-1],
                "mean": sum(xs) / len(xs)}

    def median_steps_by_bucket(self) -> dict[str, float]:
        out = {}
        for b in BUCKETS:
            s = [r.steps for r in self.rows if r.hop_bucket == b]
            if s:
                out[b] = statistics.median(s)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["template_id", "hop_bucket", "seconds", "steps"])
        for r in self.rows:
            w.writerow([r.template_id, r.hop_bucket, f"{r.seconds:.6f}", r.steps])
        return buf.getvalue()


def time_traces(templates: Iterable, trace: Callable, truth: Mapping[str, GroundTruthEntry] | None = None,
                clock: Callable[[], float] = time.perf_counter) -> tuple[TimingReport, dict]:
    """Time ``trace(template)`` per template (it must return a TraceResult).

    Only the call itself is inside the timed region.
    """
    rows = []
    results = {}
    for t in templates:
        t0 = clock()
        res = trace(t)
        dt = clock() - t0
        results[t.template_id] = res
        gt = truth.get(t.template_id) if truth else None
        hops = gt.hop_count if gt is not None else (res.best.hop_count if res.best else 0)
        rows.append(TimingRow(t.template_id, hop_bucket(hops), dt, res.steps))
    return TimingReport(rows), results
