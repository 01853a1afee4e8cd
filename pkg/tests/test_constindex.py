from __future__ import annotations

import json
import random
import shutil

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errtrace.constindex import (IndexFormatError, StaleIndexError, build_index, build_sigma,
                                 closure_depth_histogram, compute_closure, default_depth, Index)
from errtrace.frontend import FunctionId, parse_corpus, read_corpus
from support import closure_as_oracle, closure_oracle, fixture, random_graph


def fid(name: str) -> FunctionId:
    return FunctionId("main", None, name)


@pytest.fixture(scope="module")
def fig2():
    return build_index([fixture("fig2")])


def test_default_depth():
    assert default_depth() == 3


def test_sigma_examples(fig2):
    sigma = fig2.constants.sigma
    assert {c.raw for c in sigma[fid("main")]} == {"Error: %v"}
    assert {c.raw for c in sigma[fid("LoadFile")]} == {"could not read config file '%s': %w", "config file is empty"}


def test_sigma_skips_plain_strings():
    from errtrace.frontend import parse_function_text
    recs = parse_function_text('func greet() {\n\tfmt.Println("hello")\n}\n', imports=["fmt"])
    assert build_sigma(recs)[recs[0].id] == []


def test_fig2_closure_depths(fig2):
    entries = {e.constant.raw: e for e in fig2.constants.closure_of(fid("main"))}
    assert entries["Error: %v"].depth == 0
    assert entries["application setup failed: %w"].depth == 1
    assert entries["application setup failed: %w"].via == (fid("runApp"),)
    assert entries["could not read config file '%s': %w"].depth == 2
    assert entries["could not read config file '%s': %w"].via == (fid("runApp"),)
    assert entries["could not parse config value: %w"].depth == 2


def test_k0_is_sigma(fig2):
    c0 = compute_closure(fig2.graph, fig2.constants.sigma, 0)
    for f, entries in c0.closure.items():
        assert {e.constant.raw for e in entries.values()} == {c.raw for c in fig2.constants.sigma.get(f, [])}
        assert all(e.depth == 0 and e.via == () for e in entries.values())


def test_negative_depth_rejected(fig2):
    with pytest.raises(ValueError):
        compute_closure(fig2.graph, fig2.constants.sigma, -1)


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_closure_matches_walk_oracle(seed, k):
    rng = random.Random(seed)
    g, sigma = random_graph(rng, rng.randint(5, 60), rng.randint(0, 150))
    assert closure_as_oracle(compute_closure(g, sigma, k)) == closure_oracle(g, sigma, k)


def test_exhaustive_small_graphs():
    """Every directed graph on three nodes (self-loops included)."""
    from errtrace.callgraph import CallGraph
    from errtrace.frontend import StringConstant
    nodes = [fid("a"), fid("b"), fid("c")]
    pairs = [(x, y) for x in nodes for y in nodes]
    sigma = {n: [StringConstant(f"{n.name} failed", "literal", (f"{n.name} failed",), "error-create", 1)]
             for n in nodes[1:]}
    sigma[nodes[0]] = []
    for mask in range(1 << len(pairs)):
        g = CallGraph()
        for n in nodes:
            g.add_node(n)
        for i, (x, y) in enumerate(pairs):
            if mask >> i & 1:
                g.add_edge(x, y)
        for k in (0, 1, 2):
            assert closure_as_oracle(compute_closure(g, sigma, k)) == closure_oracle(g, sigma, k)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 3))
def test_monotone_in_k_and_depth_correct(seed, k):
    rng = random.Random(seed)
    g, sigma = random_graph(rng, 30, 60)
    ck = compute_closure(g, sigma, k).closure
    ck1 = compute_closure(g, sigma, k + 1).closure
    for f in g.nodes:
        assert set(ck[f]) <= set(ck1[f])
        assert {(f, c.raw) for c in sigma[f]} <= set(ck[f])
        for key, e in ck1[f].items():
            if e.depth <= k:
                assert ck[f][key].depth == e.depth
            else:
                assert key not in ck[f]


def test_index_json_round_trip(tmp_path):
    idx = build_index([fixture("fig6")])
    p = tmp_path / "idx.json"
    idx.save(p)
    back = Index.load(p)
    assert back.to_json() == idx.to_json()
    assert back.records == idx.records
    assert closure_as_oracle(back.constants) == closure_as_oracle(idx.constants)


def test_index_version_checked():
    data = build_index([fixture("fig2")]).to_json()
    data["version"] = 99
    with pytest.raises(IndexFormatError):
        Index.from_json(data)


def test_corpus_hash_stable_and_sensitive(tmp_path):
    shutil.copytree(fixture("fig2"), tmp_path / "src")
    a = build_index([tmp_path / "src"])
    assert build_index([tmp_path / "src"]).corpus_hash == a.corpus_hash
    a.check_fresh()
    main = tmp_path / "src" / "main.go"
    main.write_text(main.read_text() + "\n// touched\n")
    with pytest.raises(StaleIndexError, match="re-run"):
        a.check_fresh()


def test_histogram_and_stats(fig2):
    hist = closure_depth_histogram(fig2.constants)
    assert hist[0] == sum(len(v) for v in fig2.constants.sigma.values())
    assert sum(hist.values()) == fig2.constants.stats()["closure_entries"]


def test_serialization_is_deterministic():
    a = json.dumps(build_index([fixture("rpc")]).to_json(), sort_keys=True)
    b = json.dumps(build_index([fixture("rpc")]).to_json(), sort_keys=True)
    assert a == b


def test_sigma_from_parse_matches_index(fig2):
    recs = parse_corpus(read_corpus([fixture("fig2")])).records
    assert build_sigma(recs) == fig2.constants.sigma
