"""Error-string index: per-function constants and their bounded closure.

``sigma(f)`` holds the error-creation and logging constants referenced
directly by ``f``. ``closure(f)`` extends it with every constant owned by
a function reachable from ``f`` in at most ``k`` calls, computed with one
backward BFS per owning function.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .callgraph import CallGraph, build_call_graph
from .config import SinkConfig
from .frontend import (
    CallSite,
    Diagnostic,
    FunctionId,
    FunctionRecord,
    SourceFile,
    StringConstant,
    parse_corpus,
    read_corpus,
)

INDEX_VERSION = 1
ERROR_SINKS = ("error-create", "log")


class StaleIndexError(RuntimeError):
    pass


class IndexFormatError(ValueError):
    pass


def default_depth() -> int:
    return 3


@dataclass(frozen=True)
class ClosureEntry:
    constant: StringConstant
    owner: FunctionId
    depth: int
    # first-hop callees toward ``owner``; empty at depth 0
    via: tuple[FunctionId, ...] = ()

    @property
    def key(self) -> tuple[FunctionId, str]:
        return (self.owner, self.constant.raw)


@dataclass
class ConstantIndex:
    sigma: dict[FunctionId, list[StringConstant]]
    closure: dict[FunctionId, dict[tuple[FunctionId, str], ClosureEntry]]
    k: int

    def closure_of(self, f: FunctionId) -> list[ClosureEntry]:
        entries = self.closure.get(f, {})
        return sorted(entries.values(), key=lambda e: (e.depth, str(e.owner), e.constant.raw))

    def stats(self) -> dict[str, float]:
        sizes = [len(v) for v in self.closure.values()] or [0]
        return {
            "functions": len(self.closure),
            "sigma_constants": sum(len(v) for v in self.sigma.values()),
            "closure_entries": sum(sizes),
            "closure_max": max(sizes),
            "closure_mean": sum(sizes) / len(sizes),
        }


def build_sigma(records: Iterable[FunctionRecord]) -> dict[FunctionId, list[StringConstant]]:
    """Error-related constants per function, deduplicated by text."""
    sigma: dict[FunctionId, list[StringConstant]] = {}
    for rec in records:
        seen: dict[str, StringConstant] = {}
        for c in rec.constants:
            if c.sink in ERROR_SINKS and c.raw not in seen:
                seen[c.raw] = c
        sigma[rec.id] = list(seen.values())
    return sigma


def compute_closure(g: CallGraph, sigma: dict[FunctionId, list[StringConstant]], k: int) -> ConstantIndex:
    if k < 0:
        raise ValueError("closure depth must be >= 0")
    closure: dict[FunctionId, dict[tuple[FunctionId, str], ClosureEntry]] = {f: {} for f in g.nodes}
    for f in sigma:
        closure.setdefault(f, {})
    for owner in sorted(sigma):
        consts = sigma[owner]
        if not consts:
            continue
        dist = {owner: 0}
        via: dict[FunctionId, set[FunctionId]] = {owner: set()}
        layer = [owner]
        for d in range(1, k + 1):
            nxt = []
            for u in layer:
                for p in g.reverse.get(u, ()):
                    if p not in dist:
                        dist[p] = d
                        via[p] = {u}
                        nxt.append(p)
                    elif dist[p] == d:
                        via[p].add(u)
            if not nxt:
                break
            layer = nxt
        for f, d in dist.items():
            vias = tuple(sorted(via[f]))
            for c in consts:
                closure[f][(owner, c.raw)] = ClosureEntry(c, owner, d, vias)
    return ConstantIndex(sigma=sigma, closure=closure, k=k)


def corpus_hash(files: Iterable[SourceFile]) -> str:
    h = hashlib.sha256()
    for f in sorted(files, key=lambda f: f.path):
        h.update(f.path.encode())
        h.update(b"\0")
        h.update(f.text.encode())
        h.update(b"\0")
    return h.hexdigest()


@dataclass
class Index:
    """The persisted static-analysis artifact."""

    records: dict[FunctionId, FunctionRecord]
    graph: CallGraph
    constants: ConstantIndex
    corpus_hash: str
    roots: list[str] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.constants.k

    def record(self, f: FunctionId) -> FunctionRecord:
        return self.records[f]

    def all_constants(self) -> list[tuple[FunctionId, StringConstant]]:
        out = []
        for f in sorted(self.records):
            seen = set()
            for c in self.records[f].constants:
                if c.raw not in seen:
                    seen.add(c.raw)
                    out.append((f, c))
        return out

    def check_fresh(self, current_hash: str | None = None) -> None:
        if current_hash is None:
            current_hash = corpus_hash(read_corpus(self.roots))
        if current_hash != self.corpus_hash:
            raise StaleIndexError("index is stale: source files changed since indexing; re-run `errtrace index`")

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        edges = []
        for a, b in self.graph.edges():
            edges.append([str(a), str(b), [s.to_json() for s in self.graph.edge_sites(a, b)]])
        closure = {}
        for f in sorted(self.constants.closure):
            closure[str(f)] = [
                [e.constant.raw, str(e.owner), e.depth, [str(v) for v in e.via]]
                for e in self.constants.closure_of(f)
            ]
        return {
            "version": INDEX_VERSION,
            "corpus_hash": self.corpus_hash,
            "roots": list(self.roots),
            "k": self.constants.k,
            "functions": [self.records[f].to_json() for f in sorted(self.records)],
            "edges": edges,
            "externals": {str(f): [s.to_json() for s in sites]
                          for f, sites in sorted(self.graph.externals.items()) if sites},
            "sigma": {str(f): [c.raw for c in cs] for f, cs in sorted(self.constants.sigma.items())},
            "closure": closure,
            "diagnostics": [[d.path, d.line, d.message] for d in self.diagnostics],
        }

    @classmethod
    def from_json(cls, data: dict) -> Index:
        if data.get("version") != INDEX_VERSION:
            raise IndexFormatError(f"unsupported index version {data.get('version')!r}")
        records = {}
        for d in data["functions"]:
            rec = FunctionRecord.from_json(d)
            records[rec.id] = rec
        g = CallGraph()
        for f in records:
            g.add_node(f)
        for a, b, sites in data["edges"]:
            fa, fb = FunctionId.parse(a), FunctionId.parse(b)
            if not sites:
                g.add_edge(fa, fb)
            for s in sites:
                g.add_edge(fa, fb, CallSite.from_json(s))
        for f, sites in data.get("externals", {}).items():
            g.externals[FunctionId.parse(f)] = [CallSite.from_json(s) for s in sites]
        sigma = {}
        for f, raws in data["sigma"].items():
            fid = FunctionId.parse(f)
            by_raw = {c.raw: c for c in reversed(records[fid].constants) if c.sink in ERROR_SINKS}
            sigma[fid] = [by_raw[r] for r in raws]
        closure: dict[FunctionId, dict] = {}
        for f, entries in data["closure"].items():
            fid = FunctionId.parse(f)
            bucket = closure.setdefault(fid, {})
            for raw, owner, depth, vias in entries:
                oid = FunctionId.parse(owner)
                c = next(c for c in sigma[oid] if c.raw == raw)
                bucket[(oid, raw)] = ClosureEntry(c, oid, depth, tuple(FunctionId.parse(v) for v in vias))
        return cls(
            records=records,
            graph=g,
            constants=ConstantIndex(sigma, closure, data["k"]),
            corpus_hash=data["corpus_hash"],
            roots=list(data.get("roots", [])),
            diagnostics=[Diagnostic(*d) for d in data.get("diagnostics", [])],
        )

    def save(self, path: str | Path) -> None:
        atomic_write_json(path, self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> Index:
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def atomic_write_json(path: str | Path, payload: object) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=path.name, dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True, ensure_ascii=False)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def build_index_from_files(files: list[SourceFile], sinks: SinkConfig | None = None,
                           k: int | None = None, roots: Iterable[str] = ()) -> Index:
    parsed = parse_corpus(files, sinks)
    graph = build_call_graph(parsed.records)
    sigma = build_sigma(parsed.records)
    cindex = compute_closure(graph, sigma, default_depth() if k is None else k)
    return Index(
        records={r.id: r for r in parsed.records},
        graph=graph,
        constants=cindex,
        corpus_hash=corpus_hash(files),
        roots=[str(r) for r in roots],
        diagnostics=parsed.diagnostics,
    )


def build_index(roots: Iterable[str | Path], sinks: SinkConfig | None = None, k: int | None = None) -> Index:
    roots = [str(r) for r in roots]
    return build_index_from_files(read_corpus(roots), sinks, k, roots)


def closure_depth_histogram(idx: ConstantIndex) -> dict[int, int]:
    hist: dict[int, int] = defaultdict(int)
    for entries in idx.closure.values():
        for e in entries.values():
            hist[e.depth] += 1
    return dict(sorted(hist.items()))
