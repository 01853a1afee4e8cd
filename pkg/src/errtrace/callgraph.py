"""Directed call graph over parsed functions.

Without type information, method calls are resolved the way Rapid Type
Analysis would with every corpus type instantiated: ``x.M(a, b)`` gets an
edge to every method named ``M`` that accepts two arguments. The tracer is
responsible for pruning the extra edges.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .frontend import CallSite, FunctionId, FunctionRecord


class DuplicateFunctionError(ValueError):
    pass


class UnknownFunctionError(KeyError):
    pass


def _arity_ok(rec: FunctionRecord, arg_count: int) -> bool:
    if rec.variadic:
        return arg_count >= rec.param_count - 1
    return rec.param_count == arg_count


@dataclass
class CallGraph:
    nodes: set[FunctionId] = field(default_factory=set)
    forward: dict[FunctionId, set[FunctionId]] = field(default_factory=lambda: defaultdict(set))
    reverse: dict[FunctionId, set[FunctionId]] = field(default_factory=lambda: defaultdict(set))
    # (caller, callee) -> the call sites that induced the edge
    sites: dict[tuple[FunctionId, FunctionId], list[CallSite]] = field(default_factory=dict)
    # caller -> call sites that resolved to nothing in the corpus
    externals: dict[FunctionId, list[CallSite]] = field(default_factory=lambda: defaultdict(list))

    def add_node(self, f: FunctionId) -> None:
        self.nodes.add(f)

    def add_edge(self, caller: FunctionId, callee: FunctionId, site: CallSite | None = None) -> None:
        self.nodes.add(caller)
        self.nodes.add(callee)
        self.forward[caller].add(callee)
        self.reverse[callee].add(caller)
        bucket = self.sites.setdefault((caller, callee), [])
        if site is not None and site not in bucket:
            bucket.append(site)

    def _require(self, f: FunctionId) -> None:
        if f not in self.nodes:
            raise UnknownFunctionError(str(f))

    def callees(self, f: FunctionId) -> set[FunctionId]:
        self._require(f)
        return set(self.forward.get(f, ()))

    def callers(self, f: FunctionId) -> set[FunctionId]:
        self._require(f)
        return set(self.reverse.get(f, ()))

    def edge_sites(self, caller: FunctionId, callee: FunctionId) -> list[CallSite]:
        return list(self.sites.get((caller, callee), ()))

    def external_calls(self, f: FunctionId) -> list[CallSite]:
        self._require(f)
        return list(self.externals.get(f, ()))

    def edges(self) -> list[tuple[FunctionId, FunctionId]]:
        return sorted(self.sites, key=lambda e: (str(e[0]), str(e[1])))

    def check_transpose(self) -> None:
        fwd = {(a, b) for a, bs in self.forward.items() for b in bs}
        rev = {(a, b) for b, as_ in self.reverse.items() for a in as_}
        if fwd != rev or fwd != set(self.sites):
            raise AssertionError("reverse adjacency is not the transpose of forward adjacency")
        for a, b in fwd:
            if a not in self.nodes or b not in self.nodes:
                raise AssertionError(f"edge endpoint outside node set: {a} -> {b}")


class _Resolver:
    def __init__(self, records: Iterable[FunctionRecord]) -> None:
        self.by_id: dict[FunctionId, FunctionRecord] = {}
        self.funcs: dict[str, list[FunctionRecord]] = defaultdict(list)
        self.methods: dict[str, list[FunctionRecord]] = defaultdict(list)
        for rec in records:
            if rec.id in self.by_id:
                raise DuplicateFunctionError(f"duplicate function {rec.id} ({rec.file} and {self.by_id[rec.id].file})")
            self.by_id[rec.id] = rec
            if rec.id.receiver is None:
                self.funcs[rec.id.name].append(rec)
            else:
                self.methods[rec.id.name].append(rec)

    def resolve(self, site: CallSite) -> list[FunctionId]:
        name = site.method_name
        if site.kind == "direct":
            if site.package is not None:
                target = FunctionId(site.package, None, name)
                return [target] if target in self.by_id else []
            return sorted(r.id for r in self.funcs.get(name, ()))
        return sorted(r.id for r in self.methods.get(name, ()) if _arity_ok(r, site.arg_count))


def build_call_graph(records: Iterable[FunctionRecord]) -> CallGraph:
    records = list(records)
    resolver = _Resolver(records)
    g = CallGraph()
    for rec in records:
        g.add_node(rec.id)
    for rec in records:
        for site in rec.calls:
            targets = resolver.resolve(site)
            if not targets:
                g.externals[rec.id].append(site)
            for t in targets:
                g.add_edge(rec.id, t, site)
    g.check_transpose()
    return g
