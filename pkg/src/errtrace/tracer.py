"""Propagation-path reconstruction.

The orchestrator runs a breadth-first search from the logging function
toward the error's origin. At every frontier function it asks a
:class:`Disambiguator` which upstream callees explain the part of the
template that is still unexplained, then does the bookkeeping: the callee's
own wrap string is located in the remaining text and the slice where the
wrapped error was rendered becomes the next target. The orchestrator
itself never chooses between callees.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .config import SinkConfig
from .constindex import ClosureEntry, Index
from .frontend import CallSite, FunctionId, StringConstant
from .fuzzy import FuzzyHit, fuzzy_search
from .logtemplate import LogTemplate, render_tokens
from .scoping import (
    CandidateSet,
    FragmentSpan,
    align_constant,
    fragment_spans,
    literal_length,
    match_tokens,
    prefix_span,
    union_coverage,
    wrap_remainder,
)

TERMINAL_REASONS = ("origin-constant-found", "external-boundary", "depth-limit", "exhausted")
BRIDGE_THRESHOLD = 0.8
DEFAULT_MAX_HOPS = 12
DEFAULT_MAX_FRONTIER = 128


class TraceError(RuntimeError):
    pass


class AnchorError(TraceError):
    """No (or more than one) function can be the logging start point."""


class NotFoundError(KeyError):
    pass


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HopStep:
    function: FunctionId
    link_kind: str  # "start" | "call-edge" | "dynamic-bridge"
    evidence: str
    matched_constant: StringConstant | None = None
    file: str = ""
    line: int = 0

    def to_json(self) -> dict:
        d = {"function": str(self.function), "file": self.file, "line": self.line,
             "constant": self.matched_constant.raw if self.matched_constant else None,
             "link_kind": self.link_kind, "evidence": self.evidence}
        if self.matched_constant is not None:
            d["fragments"] = list(self.matched_constant.fragments)
            d["constant_detail"] = self.matched_constant.to_json()
        return d

    @classmethod
    def from_json(cls, d: dict) -> HopStep:
        c = StringConstant.from_json(d["constant_detail"]) if d.get("constant_detail") else None
        return cls(FunctionId.parse(d["function"]), d["link_kind"], d["evidence"], c,
                   d.get("file", ""), d.get("line", 0))


@dataclass(frozen=True)
class PropagationPath:
    template_id: str
    hops: tuple[HopStep, ...]
    terminal_reason: str
    confidence: float = 0.0
    origin_constant: StringConstant | None = None
    external: str | None = None
    note: str = ""

    def __post_init__(self) -> None:
        if self.terminal_reason not in TERMINAL_REASONS:
            raise ValueError(f"bad terminal reason {self.terminal_reason!r}")
        if not self.hops:
            raise ValueError("a path has at least its start hop")

    @property
    def functions(self) -> tuple[FunctionId, ...]:
        return tuple(h.function for h in self.hops)

    @property
    def hop_count(self) -> int:
        return len(self.hops) - 1

    def render(self) -> str:
        out = _short(self.hops[0].function)
        for h in self.hops[1:]:
            arrow = " ⇝ " if h.link_kind == "dynamic-bridge" else " → "
            out += arrow + _short(h.function)
        if self.terminal_reason == "external-boundary":
            out += f" ⇥ external({self.external or '?'})"
        elif self.terminal_reason != "origin-constant-found":
            out += f" ⇥ {self.terminal_reason}"
        return out

    def to_json(self) -> dict:
        d = {"hops": [h.to_json() for h in self.hops], "terminal_reason": self.terminal_reason,
             "confidence": round(self.confidence, 6), "hop_count": self.hop_count,
             "chain": self.render()}
        if self.origin_constant is not None:
            d["origin_constant"] = self.origin_constant.to_json()
        if self.external:
            d["external"] = self.external
        if self.note:
            d["note"] = self.note
        return d

    @classmethod
    def from_json(cls, d: dict, template_id: str) -> PropagationPath:
        oc = StringConstant.from_json(d["origin_constant"]) if d.get("origin_constant") else None
        return cls(template_id, tuple(HopStep.from_json(h) for h in d["hops"]), d["terminal_reason"],
                   d.get("confidence", 0.0), oc, d.get("external"), d.get("note", ""))


def _short(f: FunctionId) -> str:
    return f"{f.receiver}.{f.name}" if f.receiver else f.name


@dataclass
class TraceResult:
    template_id: str
    paths: list[PropagationPath]
    steps: int = 0
    cached: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def best(self) -> PropagationPath | None:
        return self.paths[0] if self.paths else None

    def to_json(self) -> dict:
        d = {"template_id": self.template_id, "paths": [p.to_json() for p in self.paths],
             "steps": self.steps}
        if self.cached:
            d["cached"] = True
        if self.notes:
            d["notes"] = list(self.notes)
        return d

    @classmethod
    def from_json(cls, d: dict) -> TraceResult:
        tid = d["template_id"]
        return cls(tid, [PropagationPath.from_json(p, tid) for p in d["paths"]], d.get("steps", 0),
                   d.get("cached", False), list(d.get("notes", [])))


# ---------------------------------------------------------------------------
# tools
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CalleeView:
    callee: FunctionId
    link_kind: str
    entries: tuple[ClosureEntry, ...]
    site: CallSite | None = None
    bridge_note: str = ""

    @property
    def min_depth(self) -> int:
        return min(e.depth for e in self.entries)

    @property
    def is_async(self) -> bool:
        return self.site is not None and self.site.is_async

    def to_json(self) -> dict:
        d = {
            "callee": str(self.callee),
            "link_kind": self.link_kind,
            "constants": [{"text": e.constant.raw, "owner": str(e.owner), "depth": e.depth,
                           "sink": e.constant.sink} for e in self.entries],
        }
        if self.site is not None:
            d["call_line"] = self.site.line
            if self.site.is_async:
                d["async"] = True
        if self.bridge_note:
            d["bridge"] = self.bridge_note
        return d


class TraceContext:
    """Per-template shared state: index, scope and memoized matches."""

    def __init__(self, index: Index, cands: CandidateSet, sinks: SinkConfig | None = None) -> None:
        self.index = index
        self.cands = cands
        self.sinks = sinks or SinkConfig()
        self._match: dict[tuple[str, tuple[str, ...]], bool] = {}
        self._bridges: dict[tuple[FunctionId, CallSite], tuple[FunctionId | None, str]] = {}
        self._all_constants: list[tuple[FunctionId, StringConstant]] | None = None
        self._clients: dict[str, set[FunctionId]] | None = None

    def matches(self, c: StringConstant, remaining: tuple[str, ...]) -> bool:
        key = (c.raw, remaining)
        hit = self._match.get(key)
        if hit is None:
            hit = bool(c.fragments) and match_tokens(c, remaining)
            self._match[key] = hit
        return hit

    def all_constants(self) -> list[tuple[FunctionId, StringConstant]]:
        if self._all_constants is None:
            self._all_constants = self.index.all_constants()
        return self._all_constants

    def _endpoint_clients(self) -> dict[str, set[FunctionId]]:
        if self._clients is None:
            self._clients = {}
            for f, rec in self.index.records.items():
                for s in rec.calls:
                    if s.kind == "dynamic-hint" and s.first_string:
                        self._clients.setdefault(s.first_string, set()).add(f)
        return self._clients

    def bridge(self, owner: FunctionId, site: CallSite) -> tuple[FunctionId | None, str]:
        key = (owner, site)
        if key not in self._bridges:
            self._bridges[key] = bridge_dynamic_call(self, owner, site)
        return self._bridges[key]


def bridge_dynamic_call(ctx: TraceContext, owner: FunctionId, site: CallSite) -> tuple[FunctionId | None, str]:
    """Resolve a string-keyed dynamic call to the function registering that key.

    Returns the target (or None) and a note for the evidence trail.
    """
    literal = site.first_string
    if site.kind != "dynamic-hint" or not literal:
        return None, ""
    clients = ctx._endpoint_clients().get(literal, set()) | {owner}
    hits = [h for h in fuzzy_search(literal, ctx.all_constants()) if h.function not in clients]
    if not hits or hits[0].score < BRIDGE_THRESHOLD:
        return None, f"no registration found for {literal!r}"
    top = [h for h in hits if h.score == hits[0].score]
    targets = sorted({h.function for h in top})
    if len(targets) > 1:
        names = ", ".join(str(t) for t in targets)
        return None, f"ambiguous registration of {literal!r}: {names}"
    return targets[0], f"endpoint literal {literal!r} registered by {targets[0]} (score {hits[0].score:.2f})"


class ToolSet:
    """The three read-only tools an agent may call, bound to one decision."""

    def __init__(self, ctx: TraceContext, remaining: tuple[str, ...]) -> None:
        self.ctx = ctx
        self.remaining = remaining

    @property
    def remaining_text(self) -> str:
        return render_tokens(self.remaining)

    def view_callee_closure(self, f: FunctionId) -> list[CalleeView]:
        g = self.ctx.index.graph
        if f not in g.nodes:
            raise NotFoundError(f"unknown function {f}")
        views = []
        closure = self.ctx.index.constants.closure
        for callee in sorted(g.callees(f)):
            entries = tuple(e for e in sorted(closure.get(callee, {}).values(),
                                              key=lambda e: (e.depth, str(e.owner), e.constant.raw))
                            if self.ctx.matches(e.constant, self.remaining))
            if entries:
                sites = g.edge_sites(f, callee)
                views.append(CalleeView(callee, "call-edge", entries, sites[0] if sites else None))
        seen = {v.callee for v in views}
        for site in self.ctx.index.records[f].calls:
            if site.kind != "dynamic-hint":
                continue
            target, note = self.ctx.bridge(f, site)
            if target is None or target in seen:
                continue
            entries = tuple(e for e in self.ctx.index.constants.closure_of(target)
                            if self.ctx.matches(e.constant, self.remaining))
            if entries:
                seen.add(target)
                views.append(CalleeView(target, "dynamic-bridge", entries, site, note))
        return views

    def check_function_code(self, f: FunctionId) -> str:
        meta = self.ctx.cands.metadata_index.get(f)
        if meta is None:
            raise NotFoundError(f"{f} is not in the candidate scope")
        return meta.source_text

    def fuzzy_search_in_closure(self, keyword: str) -> list[FuzzyHit]:
        return fuzzy_search(keyword, self.ctx.all_constants())

    # helpers below are not exposed to agents
    def own_origin_constants(self, f: FunctionId) -> list[tuple[StringConstant, list[FragmentSpan]]]:
        out = []
        for c in self.ctx.index.constants.sigma.get(f, ()):
            if c.sink == "error-create" and not c.wraps and self.ctx.matches(c, self.remaining):
                spans = head_spans(c, self.remaining)
                if spans:
                    out.append((c, spans))
        return out

    def external_calls(self, f: FunctionId) -> list[CallSite]:
        s = self.ctx.sinks
        return [c for c in self.ctx.index.graph.external_calls(f)
                if not (s.is_sink(c.callee_name) or s.is_transparent(c.callee_name)
                        or s.is_rpc_register(c.callee_name))]


# ---------------------------------------------------------------------------
# decisions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Decision:
    chosen: tuple[FunctionId, ...] = ()
    stop: bool = False
    terminal_reason: str | None = None
    evidence: str = ""
    confidence: float = 1.0
    origin_constant: StringConstant | None = None
    external: str | None = None

    def __post_init__(self) -> None:
        if self.stop and self.terminal_reason not in TERMINAL_REASONS:
            raise ValueError("a stop decision needs a terminal reason")


class Disambiguator(Protocol):
    name: str
    # "coverage" ranks paths by explained text, "confidence" by reported confidence
    ranking: str

    def decide(self, current: FunctionId, template: LogTemplate, remaining: tuple[str, ...],
               tools: ToolSet, anchor_line: int | None = None) -> Decision: ...


def nearest_external(calls: Sequence[CallSite], before_line: int | None) -> CallSite | None:
    if not calls:
        return None
    if before_line is not None:
        earlier = [c for c in calls if c.line <= before_line]
        if earlier:
            return max(earlier, key=lambda c: c.line)
    return calls[0]


class HeuristicDisambiguator:
    """Deterministic scoring by explained characters of the remaining text."""

    name = "heuristic"
    ranking = "coverage"

    def decide(self, current, template, remaining, tools, anchor_line=None) -> Decision:
        views = tools.view_callee_closure(current)
        scored = []
        for v in views:
            spans = []
            for e in v.entries:
                spans.extend(fragment_spans(e.constant, remaining) or ())
            has_create = any(e.constant.sink == "error-create" for e in v.entries)
            # the callee must produce the head of the text; reaching that
            # constant in fewer calls beats a detour through fanout edges
            head = min((e.depth for e in v.entries if head_spans(e.constant, remaining)), default=None)
            head_key = -head if head is not None else -(1 << 30)
            scored.append(((head_key, union_coverage(spans), -v.min_depth, has_create), v))
        own = tools.own_origin_constants(current)
        own_cov = 0
        own_best = None
        for c, spans in own:
            cov = union_coverage(spans)
            if cov > own_cov:
                own_cov, own_best = cov, c
        best_cov = max((k[1] for k, _ in scored), default=0)
        if own_best is not None and own_cov >= best_cov:
            return Decision(stop=True, terminal_reason="origin-constant-found", origin_constant=own_best,
                            evidence=f"own constant {own_best.raw!r} explains {own_cov} remaining characters")
        if not scored:
            ext = nearest_external(tools.external_calls(current), anchor_line)
            if ext is not None:
                return Decision(stop=True, terminal_reason="external-boundary", external=ext.callee_name,
                                evidence=f"no corpus callee explains the rest; nearest external call "
                                         f"{ext.callee_name} (line {ext.line})")
            return Decision(stop=True, terminal_reason="exhausted", evidence="no callee explains the rest")
        top_key = max(k for k, _ in scored)
        top = sorted((v for k, v in scored if k == top_key), key=lambda v: v.callee)
        _, cov, depth, create = top_key
        if len(top) == 1:
            v = top[0]
            why = "unique fragment match" if len(scored) == 1 else "best fragment match"
            ev = f"{why}: {v.callee} explains {cov} characters (closure depth {-depth})"
        else:
            names = ", ".join(str(v.callee) for v in top)
            ev = (f"tie between {names}: equal coverage {cov}, depth {-depth}, "
                  f"{'error-create' if create else 'log'} sink; needs semantic disambiguation, branching")
        return Decision(chosen=tuple(v.callee for v in top), evidence=ev)


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceLimits:
    max_hops: int = DEFAULT_MAX_HOPS
    max_frontier: int = DEFAULT_MAX_FRONTIER

    def __post_init__(self) -> None:
        if self.max_hops < 0 or self.max_frontier < 1:
            raise ValueError("invalid trace limits")


def _is_prefix_format(c: StringConstant) -> bool:
    return c.kind == "literal" or not re.match(r"\s*%[^%]", c.raw)


def head_spans(c: StringConstant, remaining: Sequence[str]) -> list[FragmentSpan] | None:
    """Alignment of ``c`` that could have produced ``remaining``.

    An error's text starts with what its creator wrote, so the first
    fragment has to sit on the first token unless ``c`` opens with a verb.
    """
    spans = align_constant(c, remaining)
    if spans and (spans[0].start == 0 or not _is_prefix_format(c)):
        return spans
    return None


def find_start_function(t: LogTemplate, index: Index, notes: list[str] | None = None) -> FunctionId:
    """The logging function: by origin metadata, else by longest log prefix."""
    by_meta = None
    if t.origin is not None:
        file, line = t.origin
        spans = [r for r in index.records.values()
                 if (r.file == file or r.file.endswith("/" + file) or file.endswith("/" + r.file))
                 and r.line_start <= line <= r.line_end]
        if spans:
            by_meta = min(spans, key=lambda r: (r.line_end - r.line_start, str(r.id))).id
    best: dict[FunctionId, int] = {}
    for f, cs in index.constants.sigma.items():
        for c in cs:
            if c.sink != "log" or not c.fragments or not _is_prefix_format(c):
                continue
            if prefix_span(c.fragments[0], t.tokens) is not None:
                best[f] = max(best.get(f, 0), len(c.fragments[0]))
    by_prefix = None
    if best:
        top = max(best.values())
        winners = sorted(f for f, n in best.items() if n == top)
        if len(winners) > 1 and by_meta is None:
            raise AnchorError("ambiguous start: " + ", ".join(str(w) for w in winners))
        by_prefix = winners[0] if len(winners) == 1 else None
    if by_meta is not None:
        if by_prefix is not None and by_prefix != by_meta and notes is not None:
            notes.append(f"origin metadata points at {by_meta}, log prefix at {by_prefix}; using metadata")
        return by_meta
    if by_prefix is None:
        raise AnchorError(f"no function logs a prefix of template {t.template_id}")
    return by_prefix


def _consume(c_options: Sequence[StringConstant], remaining: tuple[str, ...]):
    """Pick the constant that best aligns with ``remaining``.

    Returns ``(constant, spans, new_remaining)`` or None.
    """
    best = None
    best_key = None
    for c in c_options:
        if not c.fragments:
            continue
        spans = head_spans(c, remaining)
        if spans is None:
            continue
        key = (spans[0].start, -sum(s.literal for s in spans), c.raw)
        if best_key is None or key < best_key:
            best, best_key = (c, spans), key
    if best is None:
        return None
    c, spans = best
    return c, spans, wrap_remainder(c, spans, remaining)


@dataclass
class _Partial:
    hops: tuple[HopStep, ...]
    remaining: tuple[str, ...]
    visited: frozenset
    covered: int
    confidence: float
    anchor_line: int | None


def _stop_decision(dec: Decision, tools: ToolSet, f: FunctionId) -> Decision:
    """Fill in bookkeeping fields an agent is not expected to supply."""
    if dec.terminal_reason == "origin-constant-found" and dec.origin_constant is None:
        own = tools.own_origin_constants(f)
        if own:
            c = max(own, key=lambda cs: (union_coverage(cs[1]), cs[0].raw))[0]
            return Decision(dec.chosen, True, dec.terminal_reason, dec.evidence, dec.confidence, c)
    if dec.terminal_reason == "external-boundary" and dec.external is None:
        ext = nearest_external(tools.external_calls(f), None)
        if ext is not None:
            return Decision(dec.chosen, True, dec.terminal_reason, dec.evidence, dec.confidence,
                            dec.origin_constant, ext.callee_name)
    return dec


def reconstruct_path(t: LogTemplate, index: Index, cands: CandidateSet, d: Disambiguator,
                     limits: TraceLimits | None = None, sinks: SinkConfig | None = None) -> TraceResult:
    limits = limits or TraceLimits()
    notes: list[str] = []
    if not cands.candidates and t.origin is None:
        raise AnchorError(f"no anchor: no error constant matches template {t.template_id}")
    start = find_start_function(t, index, notes)
    ctx = TraceContext(index, cands, sinks)
    rec = index.records[start]
    tokens = tuple(t.tokens)
    logs = [c for c in index.constants.sigma.get(start, ()) if c.sink == "log"]
    took = _consume(logs, tokens)
    if took is not None:
        const, spans, rest = took
        covered = sum(s.literal for s in spans)
        start_ev = f"logs the template with {const.raw!r}"
        anchor = const.line
    else:
        const, rest, covered, anchor = None, tokens, 0, None
        start_ev = "logging function (no logged constant matches; whole template unexplained)"
    first = HopStep(start, "start", start_ev, const, rec.file, rec.line_start)
    total = max(literal_length(tokens), 1)
    queue = deque([_Partial((first,), rest, frozenset({(start, rest)}), covered, 1.0, anchor)])
    done: list[PropagationPath] = []
    cache: dict[tuple[FunctionId, tuple[str, ...]], tuple[Decision, dict[FunctionId, CalleeView]]] = {}
    steps = 0
    truncated = False

    def finish(p: _Partial, reason: str, dec: Decision | None = None, note: str = "") -> None:
        covered = p.covered
        origin = None
        external = None
        if dec is not None:
            origin, external = dec.origin_constant, dec.external
            if origin is not None:
                covered += union_coverage(fragment_spans(origin, p.remaining) or ())
        if reason == "origin-constant-found" and origin is None and p.hops[-1].matched_constant is not None:
            if not p.hops[-1].matched_constant.wraps:
                origin = p.hops[-1].matched_constant
        hops = p.hops
        if dec is not None and dec.evidence:
            last = hops[-1]
            ev = last.evidence + ("; " if last.evidence else "") + dec.evidence
            hops = hops[:-1] + (HopStep(last.function, last.link_kind, ev, last.matched_constant,
                                        last.file, last.line),)
        conf = min(covered / total, 1.0) if d.ranking == "coverage" else p.confidence
        done.append(PropagationPath(t.template_id, hops, reason, conf, origin, external, note))

    while queue:
        p = queue.popleft()
        f = p.hops[-1].function
        if not p.remaining:
            finish(p, "origin-constant-found")
            continue
        if len(p.hops) - 1 >= limits.max_hops:
            finish(p, "depth-limit", note=f"stopped after {limits.max_hops} hops")
            continue
        key = (f, p.remaining)
        tools = ToolSet(ctx, p.remaining)
        if key in cache:
            dec, views = cache[key]
        else:
            steps += 1
            dec = d.decide(f, t, p.remaining, tools, p.anchor_line)
            views = {v.callee: v for v in tools.view_callee_closure(f)}
            stray = [g for g in dec.chosen if g not in views]
            if stray:
                raise TraceError(f"{d.name} chose {', '.join(map(str, stray))} outside the offered callees of {f}")
            if dec.stop:
                dec = _stop_decision(dec, tools, f)
            cache[key] = (dec, views)
        if dec.stop:
            finish(p, dec.terminal_reason or "exhausted", dec)
            continue
        if not dec.chosen:
            finish(p, "exhausted", dec)
            continue
        extended = False
        for g in dec.chosen:
            v = views[g]
            own = [c for c in index.constants.sigma.get(g, ()) if c.sink == "error-create"]
            took = _consume(own, p.remaining)
            if took is not None:
                const, spans, rest = took
                gained = sum(s.literal for s in spans)
            else:
                const, rest, gained = None, p.remaining, 0
            if (g, rest) in p.visited:
                continue
            ev = dec.evidence
            if const is None:
                ev += f"; passes the error through (closure depth {v.min_depth})"
            if v.is_async:
                ev += "; called with `go`: the error crosses a goroutine/channel async boundary"
            if v.link_kind == "dynamic-bridge":
                ev += f"; dynamic bridge: {v.bridge_note}"
            grec = index.records[g]
            hop = HopStep(g, v.link_kind, ev, const, grec.file, grec.line_start)
            conf = min(p.confidence, max(0.0, min(1.0, dec.confidence)))
            queue.append(_Partial(p.hops + (hop,), rest, p.visited | {(g, rest)}, p.covered + gained,
                                  conf, const.line if const is not None else None))
            extended = True
        if not extended:
            finish(p, "exhausted", note="every chosen callee revisits an explored state")
        if len(queue) > limits.max_frontier:
            truncated = True
            while len(queue) > limits.max_frontier:
                queue.pop()
    if truncated:
        notes.append(f"frontier capped at {limits.max_frontier} partial paths")
    live = [p for p in done if p.terminal_reason != "exhausted"]
    paths = live or done
    if d.ranking == "coverage":
        paths.sort(key=lambda p: (-p.confidence, [str(f) for f in p.functions]))
    else:
        paths.sort(key=lambda p: (-p.confidence, len(p.hops), [str(f) for f in p.functions]))
    return TraceResult(t.template_id, paths, steps, False, notes)
