"""Shared helpers for the test suite (importable because tests/ is on sys.path)."""

from __future__ import annotations

import json
import re
from pathlib import Path

from errtrace.constindex import build_index
from errtrace.llm_client import Reply, ToolCall, Turn, final_reply
from errtrace.logtemplate import extract_templates, read_logs
from errtrace.scoping import candidate_functions
from errtrace.tracer import HeuristicDisambiguator, TraceLimits, reconstruct_path

FIXTURES = Path(__file__).parent / "fixtures"


def fixture(name: str) -> Path:
    return FIXTURES / name


def load_fixture(name: str, k: int | None = None):
    root = fixture(name)
    index = build_index([root], k=k)
    repo = extract_templates(read_logs(root / "logs.jsonl"))
    return index, repo


def template_like(repo, needle: str):
    hits = [t for t in repo if needle in t.text]
    assert len(hits) == 1, [t.text for t in repo]
    return hits[0]


def trace(index, t, d=None, max_hops: int = 12):
    cands = candidate_functions(t, index)
    return reconstruct_path(t, index, cands, d or HeuristicDisambiguator(), TraceLimits(max_hops=max_hops))


def names(path) -> list[str]:
    return [h.function.name for h in path.hops]


_WRITE = re.compile(r"\b(Update\w*|Create|Patch|Delete|Write\w*)\(")
_READ = re.compile(r"\b(List|Get|Watch)\(")


def write_path_policy(ctx: dict, turns: list[Turn]) -> Reply:
    """A stand-in agent for admission-webhook denials.

    It views the closure, reads every offered callee, and prefers the one
    whose body performs a write, since validating webhooks only see writes.
    """
    results = [t for t in turns if t.role == "tool"]
    current = ctx["current"]
    if not results:
        return Reply("Which callees can produce the remaining text?",
                     (ToolCall("c0", "view_callee_closure", {"function": current}),))
    views = json.loads(results[0].content)
    offered = [v["callee"] for v in views]
    if not offered:
        return final_reply(stop=True, reason="external-boundary", confidence=0.9,
                           evidence="the remaining text comes from a call outside the corpus")
    if len(offered) == 1:
        return final_reply(offered, confidence=0.95, evidence=f"only {offered[0]} can produce the remaining text")
    if len(results) == 1:
        return Reply("Both candidates can produce the generic text; read their code.",
                     tuple(ToolCall(f"c{i + 1}", "check_function_code", {"function": f})
                           for i, f in enumerate(offered)))
    code = {t.call_id: t.content for t in results[1:]}
    writers = [f for i, f in enumerate(offered) if _WRITE.search(code.get(f"c{i + 1}", ""))]
    readers = [f for i, f in enumerate(offered) if _READ.search(code.get(f"c{i + 1}", ""))]
    if len(writers) == 1:
        w = writers[0]
        r = ", ".join(readers) or "the other candidate"
        return final_reply([w], confidence=0.85, evidence=(
            f"{r} only reads (lists resources) while {w} performs a write by updating status; "
            "a validating admission webhook intercepts write operations, so the denial came from the write path"))
    return final_reply(offered, confidence=0.5, evidence="code reading could not separate the candidates")


# --- closure oracle ---------------------------------------------------------

def random_graph(rng, n_nodes: int, n_edges: int, sigma_rate: float = 0.4):
    """A seeded random call graph plus a sigma map over it."""
    from errtrace.callgraph import CallGraph
    from errtrace.frontend import FunctionId, StringConstant

    nodes = [FunctionId("g", None, f"f{i:03d}") for i in range(n_nodes)]
    g = CallGraph()
    for f in nodes:
        g.add_node(f)
    for _ in range(n_edges):
        g.add_edge(rng.choice(nodes), rng.choice(nodes))
    sigma = {}
    for i, f in enumerate(nodes):
        consts = []
        if rng.random() < sigma_rate:
            for j in range(rng.randint(1, 3)):
                raw = f"err {i} {j}: %w"
                consts.append(StringConstant(raw, "format", (f"err {i} {j}:",), "error-create", j + 1))
        sigma[f] = consts
    return g, sigma


def closure_oracle(g, sigma, k: int) -> dict:
    """Enumerate every call walk of length <= k from each function.

    Returns f -> {(owner, raw): (min_depth, via)} where ``via`` is the set
    of first-hop callees on some shortest walk.
    """
    out = {}
    for f in g.nodes:
        found: dict = {}

        def walk(u, d, first):
            for c in sigma.get(u, ()):
                key = (u, c.raw)
                if key not in found or d < found[key][0]:
                    found[key] = (d, set())
                if found[key][0] == d and first is not None:
                    found[key][1].add(first)
            if d == k:
                return
            for v in g.forward.get(u, ()):
                walk(v, d + 1, v if first is None else first)

        walk(f, 0, None)
        out[f] = {key: (d, frozenset(via)) for key, (d, via) in found.items()}
    return out


def closure_as_oracle(cindex) -> dict:
    return {f: {key: (e.depth, frozenset(e.via)) for key, e in entries.items()}
            for f, entries in cindex.closure.items()}


# --- synthetic log formats ----------------------------------------------------

FORMATS = [
    "connection to {host}:{n} refused after {n} attempts",
    "failed to open file {path}: permission denied",
    "access denied: user {word} lacks permission {word}",
    "quota exceeded for tenant {word} ({n} of {n} used)",
    "timeout after {n} ms waiting for lock {word}",
    "invalid checksum {hex} for block {n}",
    "disk usage on {word} reached {n} percent",
    "request {hex} rejected by rate limiter",
    "cannot decode payload of type {word}: unexpected end of input",
    "replica {n} lagging behind primary by {n} seconds",
]
_POOL = ["alpha", "bravo", "carol", "delta", "echo", "fox", "gamma", "nova", "orion", "zeta"]


def synthetic_messages(rng, n: int = 1000) -> list[tuple[int, str]]:
    """``n`` (format index, message) pairs with random parameter values."""
    out = []
    for _ in range(n):
        i = rng.randrange(len(FORMATS))
        fill = {
            "n": lambda: str(rng.randint(0, 99999)),
            "word": lambda: rng.choice(_POOL) + rng.choice(["", "-eu", "-us", "_2"]),
            "host": lambda: f"{rng.choice(_POOL)}.svc",
            "path": lambda: "/var/" + rng.choice(_POOL) + f"/{rng.randint(1, 9)}.log",
            "hex": lambda: f"{rng.getrandbits(48):012x}",
        }
        msg = FORMATS[i]
        while "{" in msg:
            a = msg.index("{")
            b = msg.index("}", a)
            msg = msg[:a] + fill[msg[a + 1:b]]() + msg[b + 1:]
        out.append((i, msg))
    return out


# --- generated corpora ----------------------------------------------------------

def corpus_pipeline(spec):
    """Generate, index and mine a synthetic corpus entirely in memory."""
    from errtrace.constindex import build_index_from_files
    from errtrace.eval.generator import generate_corpus
    from errtrace.eval.metrics import align_truth
    from errtrace.frontend import SourceFile
    from errtrace.logtemplate import LogRecord

    corp = generate_corpus(spec)
    idx = build_index_from_files([SourceFile.from_text(p, t) for p, t in sorted(corp.files.items())])
    repo = extract_templates([LogRecord.from_json(r) for r in corp.logs])
    return corp, idx, repo, align_truth(repo, corp.truth)


def heuristic_run(idx, repo, truth, max_hops: int = 12):
    """Trace every aligned template; returns (rank-1 predictions, results, candidate sets)."""
    templates = [t for t in repo if t.template_id in truth]
    results, cands = {}, {}
    for t in templates:
        cs = candidate_functions(t, idx)
        cands[t.template_id] = cs
        results[t.template_id] = reconstruct_path(t, idx, cs, HeuristicDisambiguator(), TraceLimits(max_hops=max_hops))
    pred = {tid: [str(f) for f in r.best.functions] if r.best else None for tid, r in results.items()}
    return pred, results, cands
