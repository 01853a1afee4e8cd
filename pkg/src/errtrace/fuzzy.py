"""Longest-common-subsequence similarity for keyword search over constants."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .frontend import FunctionId, StringConstant

DEFAULT_THRESHOLD = 0.6


def lcs_length(a: str, b: str) -> int:
    """LCS length via the bit-vector recurrence (one big-int step per char of ``b``)."""
    if not a or not b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    masks: dict[str, int] = {}
    for i, ch in enumerate(a):
        masks[ch] = masks.get(ch, 0) | (1 << i)
    full = (1 << len(a)) - 1
    v = full
    for ch in b:
        u = v & masks.get(ch, 0)
        v = ((v + u) | (v - u)) & full
    return len(a) - bin(v).count("1")


def lcs_ratio(a: str, b: str) -> float:
    """``2 * LCS / (|a| + |b|)``; 1.0 for identical strings."""
    if not a and not b:
        return 1.0
    return 2.0 * lcs_length(a, b) / (len(a) + len(b))


@dataclass(frozen=True)
class FuzzyHit:
    function: FunctionId
    constant: StringConstant
    score: float


def fuzzy_search(keyword: str, constants: Iterable[tuple[FunctionId, StringConstant]],
                 threshold: float = DEFAULT_THRESHOLD) -> list[FuzzyHit]:
    if not keyword:
        raise ValueError("fuzzy search needs a non-empty keyword")
    hits = []
    k = len(keyword)
    for f, c in constants:
        n = len(c.raw)
        # the ratio can never exceed 2*min/(sum); skip hopeless lengths cheaply
        if 2.0 * min(k, n) / (k + n) < threshold:
            continue
        score = lcs_ratio(keyword, c.raw)
        if score >= threshold:
            hits.append(FuzzyHit(f, c, score))
    hits.sort(key=lambda h: (-h.score, str(h.function), h.constant.raw))
    return hits
