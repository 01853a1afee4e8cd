"""Error-log templating.

Logs are first bucketed by the source location that emitted them, then
each bucket is clustered with a fixed-depth prefix tree in the style of
Drain. Template tokens are plain strings; a token containing ``PARAM``
(a NUL character) is a parameter slot, and any text around the NUL is the
literal prefix/suffix shared by every value seen in that slot (so
``'settings.txt':`` and ``'app.conf':`` generalize to ``'\\0':``).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .config import DrainConfig

PARAM = "\x00"
FALLBACK_BUCKET = ("", 0)
ERROR_LEVELS = frozenset({"error", "err"})


@dataclass(frozen=True)
class LogRecord:
    message: str
    severity: str = "error"
    origin: tuple[str, int] | None = None
    timestamp: str | None = None

    def __post_init__(self) -> None:
        if not self.message:
            raise ValueError("log message must be non-empty")

    @classmethod
    def from_json(cls, d: dict) -> LogRecord:
        origin = None
        if d.get("file") and d.get("line") is not None:
            origin = (str(d["file"]), int(d["line"]))
        return cls(str(d["msg"]), str(d.get("level", "error")).lower(), origin, d.get("ts"))

    def to_json(self) -> dict:
        d: dict = {"msg": self.message, "level": self.severity}
        if self.origin:
            d["file"], d["line"] = self.origin
        if self.timestamp is not None:
            d["ts"] = self.timestamp
        return d


def read_logs(path: str | Path) -> list[LogRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(LogRecord.from_json(json.loads(line)))
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{n}: bad log record: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# token helpers
# ---------------------------------------------------------------------------


def tokenize_message(message: str) -> list[str]:
    """Whitespace tokens with digit-only tokens masked to parameters."""
    return [PARAM if tok.isdigit() else tok for tok in message.split()]


def is_param(token: str) -> bool:
    return PARAM in token


def _affixes(token: str) -> tuple[str, str, bool]:
    if PARAM in token:
        p, s = token.split(PARAM, 1)
        return p, s, True
    return token, token, False


def _common_prefix(a: str, b: str) -> str:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return a[:n]


def _common_suffix(a: str, b: str) -> str:
    n = 0
    for x, y in zip(reversed(a), reversed(b)):
        if x != y:
            break
        n += 1
    return a[len(a) - n:] if n else ""


def generalize(a: str, b: str) -> str:
    """Least general token covering both ``a`` and ``b``."""
    if a == b:
        return a
    pa, sa, a_param = _affixes(a)
    pb, sb, b_param = _affixes(b)
    p = _common_prefix(pa, pb)
    # the suffix may not overlap the prefix inside either concrete value
    rest_a = sa if a_param else a[len(p):]
    rest_b = sb if b_param else b[len(p):]
    s = _common_suffix(rest_a, rest_b)
    return p + PARAM + s


def token_matches(template_token: str, token: str) -> bool:
    if PARAM not in template_token:
        return template_token == token
    p, s = template_token.split(PARAM, 1)
    if token == PARAM:
        return True
    return len(token) >= len(p) + len(s) and token.startswith(p) and token.endswith(s)


def render_tokens(tokens: Iterable[str], placeholder: str = "<*>") -> str:
    return " ".join(t.replace(PARAM, placeholder) for t in tokens)


# ---------------------------------------------------------------------------
# templates
# ---------------------------------------------------------------------------


@dataclass
class LogTemplate:
    template_id: str
    tokens: tuple[str, ...]
    origin: tuple[str, int] | None = None
    member_count: int = 0
    sample: str = ""

    @property
    def text(self) -> str:
        return render_tokens(self.tokens)

    def static_tokens(self) -> list[str]:
        return [t for t in self.tokens if not is_param(t)]

    def matches(self, message: str) -> bool:
        toks = tokenize_message(message)
        return len(toks) == len(self.tokens) and all(map(token_matches, self.tokens, toks))

    def to_json(self) -> dict:
        d = {"id": self.template_id, "tokens": list(self.tokens), "text": self.text,
             "members": self.member_count, "sample": self.sample}
        if self.origin:
            d["origin"] = list(self.origin)
        return d

    @classmethod
    def from_json(cls, d: dict) -> LogTemplate:
        origin = tuple(d["origin"]) if d.get("origin") else None
        return cls(d["id"], tuple(d["tokens"]), origin, d.get("members", 0), d.get("sample", ""))


def template_id_for(origin: tuple[str, int] | None, tokens: Iterable[str]) -> str:
    h = hashlib.sha1()
    h.update(repr(origin).encode())
    for t in tokens:
        h.update(b"\x01")
        h.update(t.encode())
    return "t" + h.hexdigest()[:12]


@dataclass
class _Cluster:
    tokens: list[str]
    count: int = 0
    sample: str = ""


class _Node:
    __slots__ = ("children", "clusters")

    def __init__(self) -> None:
        self.children: dict[str, _Node] = {}
        self.clusters: list[int] = []


class DrainTree:
    """Fixed-depth prefix tree clustering for one stream of messages."""

    def __init__(self, config: DrainConfig | None = None) -> None:
        self.config = config or DrainConfig()
        self.root = _Node()
        self.clusters: list[_Cluster] = []

    def _leaf(self, tokens: list[str]) -> _Node:
        node = self.root.children.setdefault(str(len(tokens)), _Node())
        for i in range(min(self.config.depth - 2, len(tokens))):
            # tokens carrying digits are routed as variables, as Drain does
            key = PARAM if is_param(tokens[i]) or any(ch.isdigit() for ch in tokens[i]) else tokens[i]
            if key not in node.children:
                if len(node.children) >= self.config.max_children:
                    key = PARAM
                node.children.setdefault(key, _Node())
            node = node.children[key]
        return node

    @staticmethod
    def similarity(template: list[str], tokens: list[str]) -> tuple[float, int]:
        same = sum(1 for t, w in zip(template, tokens) if not is_param(t) and t == w)
        params = sum(1 for t in template if is_param(t))
        return same / len(tokens), params

    def insert(self, message: str) -> int:
        """Absorb ``message``; returns the index of its cluster."""
        tokens = tokenize_message(message)
        if not tokens:
            raise ValueError("cannot template an empty message")
        leaf = self._leaf(tokens)
        best = None
        best_key = (-1.0, -1)
        for cid in leaf.clusters:
            key = self.similarity(self.clusters[cid].tokens, tokens)
            if key[0] >= self.config.sim and key > best_key:
                best, best_key = cid, key
        if best is None:
            self.clusters.append(_Cluster(list(tokens), 1, message))
            leaf.clusters.append(len(self.clusters) - 1)
            return len(self.clusters) - 1
        cl = self.clusters[best]
        cl.tokens = [generalize(t, w) for t, w in zip(cl.tokens, tokens)]
        cl.count += 1
        return best


def drain_insert(tree: DrainTree, message: str) -> int:
    return tree.insert(message)


def bucket_by_origin(records: Iterable[LogRecord]) -> dict[tuple[str, int], list[LogRecord]]:
    """Group records by emitting source line; origin-less records share
    the ``FALLBACK_BUCKET`` key."""
    buckets: dict[tuple[str, int], list[LogRecord]] = {}
    for r in records:
        buckets.setdefault(r.origin or FALLBACK_BUCKET, []).append(r)
    return buckets


@dataclass
class TemplateRepository:
    templates: dict[str, LogTemplate] = field(default_factory=dict)
    # template id -> the stored trace result (see tracer.TraceResult.to_json)
    resolved: dict[str, dict] = field(default_factory=dict)

    def __post_init__(self) -> None:
        stray = set(self.resolved) - set(self.templates)
        if stray:
            raise ValueError(f"resolved entries for unknown templates: {sorted(stray)}")

    def get(self, template_id: str) -> LogTemplate:
        try:
            return self.templates[template_id]
        except KeyError:
            raise KeyError(f"unknown template id {template_id!r}") from None

    def __iter__(self) -> Iterator[LogTemplate]:
        return iter(self.templates[k] for k in sorted(self.templates))

    def __len__(self) -> int:
        return len(self.templates)

    def find(self, message: str, origin: tuple[str, int] | None = None) -> LogTemplate | None:
        """The template in ``origin``'s bucket that ``message`` token-matches."""
        for t in self:
            if (t.origin or None) == (origin or None) and t.matches(message):
                return t
        return None

    def mark_resolved(self, template_id: str, result: dict) -> None:
        self.get(template_id)
        self.resolved[template_id] = result

    def to_json(self) -> dict:
        return {
            "version": 1,
            "templates": [t.to_json() for t in self],
            "resolved": {k: self.resolved[k] for k in sorted(self.resolved)},
        }

    @classmethod
    def from_json(cls, d: dict) -> TemplateRepository:
        templates = {t["id"]: LogTemplate.from_json(t) for t in d["templates"]}
        return cls(templates, dict(d.get("resolved", {})))

    def save(self, path: str | Path) -> None:
        from .constindex import atomic_write_json

        atomic_write_json(path, self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> TemplateRepository:
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def extract_templates(records: Iterable[LogRecord], config: DrainConfig | None = None) -> TemplateRepository:
    config = config or DrainConfig()
    errors = [r for r in records if r.severity.lower() in ERROR_LEVELS]
    repo = TemplateRepository()
    buckets = bucket_by_origin(errors)
    for key in sorted(buckets, key=lambda k: (k == FALLBACK_BUCKET, k)):
        tree = DrainTree(config)
        for r in buckets[key]:
            tree.insert(r.message)
        origin = None if key == FALLBACK_BUCKET else key
        for cl in tree.clusters:
            tid = template_id_for(origin, cl.tokens)
            while tid in repo.templates:
                tid = template_id_for(origin, [tid, *cl.tokens])
            repo.templates[tid] = LogTemplate(tid, tuple(cl.tokens), origin, cl.count, cl.sample)
    return repo


def export_templates(repo: TemplateRepository, path: str | Path) -> None:
    repo.save(path)
    os.chmod(path, 0o644)
