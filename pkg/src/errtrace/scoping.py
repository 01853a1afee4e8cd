"""Candidate scoping: which functions can have contributed to a template.

Fragments are aligned against template tokens rather than raw text so
that parameter slots behave as gaps. A fragment of several words must
line up with consecutive template tokens: its first word may be the tail
of a token, its last word the head of one, and everything between must
match whole tokens. Parameter slots can absorb an interior word (this is
what lets a constant still match after the log miner turned one of its
keywords into a parameter), but half of the fragment's characters must
still be matched literally.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

from .constindex import Index
from .frontend import FunctionId, StringConstant
from .logtemplate import PARAM, LogTemplate

MIN_LITERAL_RATIO = 0.5


# ---------------------------------------------------------------------------
# token-level alignment
# ---------------------------------------------------------------------------


def _cover_static(ft: str, tt: str, left: bool, right: bool) -> int | None:
    if left and right:
        ok = ft == tt
    elif left:
        ok = tt.startswith(ft)
    elif right:
        ok = tt.endswith(ft)
    else:
        ok = ft in tt
    return len(ft) if ok else None


def _cover_param(ft: str, p: str, s: str, left: bool, right: bool) -> int | None:
    """Literal characters of ``ft`` matched when placed on ``p <any> s``.

    ``left``/``right`` pin ``ft`` to the start/end of the token. Returns
    None when no placement exists.
    """
    n = len(ft)
    # wholly inside the prefix (pinning right then needs an empty slot and suffix)
    for i in range(len(p) - n + 1):
        if p.startswith(ft, i) and (not left or i == 0) and (not right or (i + n == len(p) and not s)):
            return n
    for i in range(len(s) - n + 1):
        if s.startswith(ft, i) and (not left or (i == 0 and not p)) and (not right or i + n == len(s)):
            return n
    # straddling the slot: ft = (suffix of p) + anything + (prefix of s)
    best = None
    for la in ([len(p)] if left else range(min(len(p), n) + 1)):
        if la > n or ft[:la] != p[len(p) - la:]:
            continue
        for lb in ([len(s)] if right else range(min(len(s), n - la) + 1)):
            if la + lb > n or ft[n - lb:] != s[:lb]:
                continue
            if best is None or la + lb > best:
                best = la + lb
    return best


@lru_cache(maxsize=1 << 16)
def token_cover(ft: str, tt: str, left: bool, right: bool) -> int | None:
    if PARAM not in tt:
        return _cover_static(ft, tt, left, right)
    p, s = tt.split(PARAM, 1)
    return _cover_param(ft, p, s, left, right)


@dataclass(frozen=True)
class FragmentSpan:
    fragment: str
    start: int  # first template token touched
    end: int  # last template token touched (inclusive)
    # per touched token: fragment characters matched against literal text
    parts: tuple[int, ...] = ()

    @property
    def literal(self) -> int:
        return sum(self.parts)


def _nonspace(s: str) -> int:
    return sum(1 for ch in s if not ch.isspace())


def _align_words(words: Sequence[str], need: float, fragment: str, tokens: Sequence[str], j: int) -> FragmentSpan | None:
    n = len(words)
    if j + n > len(tokens):
        return None
    if n == 1:
        got = token_cover(words[0], tokens[j], False, False)
        if not got:
            return None
        parts = [got]
    else:
        parts = []
        for i, w in enumerate(words):
            got = token_cover(w, tokens[j + i], i > 0, i < n - 1)
            if got is None:
                return None
            # an edge word swallowed whole by a slot proves nothing
            if got == 0 and i in (0, n - 1):
                return None
            parts.append(got)
    if sum(parts) < need:
        return None
    return FragmentSpan(fragment, j, j + n - 1, tuple(parts))


def align_fragment_at(fragment: str, tokens: Sequence[str], j: int) -> FragmentSpan | None:
    words = fragment.split()
    if not words:
        return None
    return _align_words(words, MIN_LITERAL_RATIO * _nonspace(fragment), fragment, tokens, j)


def prefix_span(fragment: str, tokens: Sequence[str]) -> FragmentSpan | None:
    """Align ``fragment`` so that it starts exactly at the first token."""
    words = fragment.split()
    if not words or len(words) > len(tokens):
        return None
    n = len(words)
    parts = []
    for i, w in enumerate(words):
        got = token_cover(w, tokens[i], True, i < n - 1)
        if not got and i in (0, n - 1):
            return None
        if got is None:
            return None
        parts.append(got)
    if sum(parts) < MIN_LITERAL_RATIO * _nonspace(fragment):
        return None
    return FragmentSpan(fragment, 0, n - 1, tuple(parts))


def find_fragment(fragment: str, tokens: Sequence[str], start: int = 0) -> FragmentSpan | None:
    """Leftmost alignment of ``fragment`` beginning at or after ``start``."""
    words = fragment.split()
    if not words:
        return None
    need = MIN_LITERAL_RATIO * _nonspace(fragment)
    for j in range(start, len(tokens) - len(words) + 1):
        span = _align_words(words, need, fragment, tokens, j)
        if span is not None:
            return span
    return None


def fragment_occurs(fragment: str, tokens: Sequence[str]) -> bool:
    return find_fragment(fragment, tokens) is not None


def align_constant(c: StringConstant, tokens: Sequence[str]) -> list[FragmentSpan] | None:
    """Place every fragment of ``c`` in order, leftmost first.

    A fragment may begin on the token where the previous one ended, since
    a format verb can sit inside a single whitespace token.
    """
    spans = []
    pos = 0
    for frag in c.fragments:
        span = find_fragment(frag, tokens, pos)
        if span is None:
            return None
        spans.append(span)
        pos = span.end
    return spans


def wrap_remainder(c: StringConstant, spans: list[FragmentSpan], tokens: Sequence[str]) -> tuple[str, ...]:
    """Tokens where ``c``'s wrapped error was rendered, given its alignment."""
    if c.wrap_gap is None:
        return ()
    g = c.wrap_gap
    lo = spans[g - 1].end + 1 if g > 0 else 0
    hi = spans[g].start if g < len(spans) else len(tokens)
    return tuple(tokens[lo:hi])


def union_coverage(spans: Iterable[FragmentSpan]) -> int:
    """Literal characters covered by ``spans``, counting each token once."""
    best: dict[int, int] = {}
    for sp in spans:
        for i, got in enumerate(sp.parts):
            k = sp.start + i
            if got > best.get(k, 0):
                best[k] = got
    return sum(best.values())


def fragment_spans(c: StringConstant, tokens: Sequence[str]) -> list[FragmentSpan] | None:
    """Leftmost independent placement of each fragment; None if any is missing."""
    out = []
    for frag in c.fragments:
        sp = find_fragment(frag, tokens)
        if sp is None:
            return None
        out.append(sp)
    return out


def literal_length(tokens: Iterable[str]) -> int:
    return sum(len(t.replace(PARAM, "")) for t in tokens)


def match_tokens(c: StringConstant, tokens: Sequence[str]) -> bool:
    return all(fragment_occurs(f, tokens) for f in c.fragments)


def match_format_string(c: StringConstant, t: LogTemplate) -> bool:
    """True iff every static fragment of ``c`` occurs in ``t``.

    Fragments are checked independently. A constant without fragments
    matches vacuously; callers that scope candidates skip those.
    """
    return match_tokens(c, t.tokens)


# ---------------------------------------------------------------------------
# candidate sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FunctionMeta:
    file: str
    line_start: int
    line_end: int
    source_text: str


@dataclass
class CandidateSet:
    template_id: str
    candidates: dict[FunctionId, tuple[StringConstant, ...]] = field(default_factory=dict)
    metadata_index: dict[FunctionId, FunctionMeta] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for f, cs in self.candidates.items():
            if not cs:
                raise ValueError(f"candidate {f} has no matched constant")

    def __len__(self) -> int:
        return len(self.candidates)

    def __contains__(self, f: object) -> bool:
        return f in self.candidates

    @property
    def functions(self) -> list[FunctionId]:
        return sorted(self.candidates)

    def to_json(self) -> dict:
        return {
            "template_id": self.template_id,
            "candidates": {str(f): [c.raw for c in self.candidates[f]] for f in self.functions},
            "scope": sorted(str(f) for f in self.metadata_index),
        }


def _reach(start: Iterable[FunctionId], adj: dict) -> set[FunctionId]:
    seen = set(start)
    queue = deque(seen)
    while queue:
        u = queue.popleft()
        for v in adj.get(u, ()):
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def candidate_functions(t: LogTemplate, index: Index, current_hash: str | None = None) -> CandidateSet:
    """Functions whose own error constants match ``t``.

    When ``current_hash`` is given it must equal the index's corpus hash.
    """
    if current_hash is not None:
        index.check_fresh(current_hash)
    cands: dict[FunctionId, tuple[StringConstant, ...]] = {}
    for f in sorted(index.constants.sigma):
        hit = tuple(c for c in index.constants.sigma[f] if c.fragments and match_format_string(c, t))
        if hit:
            cands[f] = hit
    # intermediaries: reachable from some candidate and reaching some candidate
    fwd = _reach(cands, index.graph.forward)
    bwd = _reach(cands, index.graph.reverse)
    scope = set(cands) | (fwd & bwd)
    meta = {}
    for f in sorted(scope):
        rec = index.records.get(f)
        if rec is not None:
            meta[f] = FunctionMeta(rec.file, rec.line_start, rec.line_end, rec.source_text)
    return CandidateSet(t.template_id, cands, meta)
