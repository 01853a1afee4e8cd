from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errtrace.callgraph import (CallGraph, DuplicateFunctionError, UnknownFunctionError,
                                build_call_graph)
from errtrace.frontend import CallSite, FunctionId, FunctionRecord, parse_corpus, read_corpus
from support import fixture


def graph_of(name: str) -> CallGraph:
    return build_call_graph(parse_corpus(read_corpus([fixture(name)])).records)


def fid(name: str, pkg: str = "main", recv: str | None = None) -> FunctionId:
    return FunctionId(pkg, recv, name)


def rec(name: str, calls=(), recv: str | None = None, params: int = 0, variadic: bool = False) -> FunctionRecord:
    sites = tuple(CallSite(c, n, i + 1, k) for i, (c, n, k) in enumerate(calls))
    return FunctionRecord(fid(name, recv=recv), "x.go", 1, 1, sites, (), "", params, variadic)


def test_fig2_edges_and_externals():
    g = graph_of("fig2")
    main, run, load, proc = (fid(n) for n in ("main", "runApp", "LoadFile", "ProcessData"))
    assert set(g.edges()) == {(main, run), (run, load), (run, proc)}
    assert g.callees(run) == {load, proc}
    assert g.callees(proc) == set()
    assert g.callers(load) == {run}
    assert g.callers(main) == set()
    assert "strconv.Atoi" in {s.callee_name for s in g.external_calls(proc)}
    assert "os.ReadFile" in {s.callee_name for s in g.external_calls(load)}


def test_fig6_interface_call_fans_out_to_every_implementation():
    g = graph_of("fig6")
    check = next(f for f in g.nodes if f.name == "checkResources")
    impls = {f for f in g.nodes if f.name == "BelongTo"}
    assert len(impls) > 20
    assert g.callees(check) >= impls
    assert all(s.kind == "method" for f in impls for s in g.edge_sites(check, f))


def test_no_calls_means_no_edges():
    g = build_call_graph([rec("a"), rec("b")])
    assert g.nodes == {fid("a"), fid("b")} and g.edges() == []


def test_self_recursion():
    g = build_call_graph([rec("loop", [("loop", 0, "direct")])])
    assert fid("loop") in g.callees(fid("loop"))


def test_unknown_node_raises():
    g = build_call_graph([rec("a")])
    with pytest.raises(UnknownFunctionError):
        g.callees(fid("nope"))
    with pytest.raises(UnknownFunctionError):
        g.callers(fid("nope"))


def test_duplicate_function_aborts():
    with pytest.raises(DuplicateFunctionError):
        build_call_graph([rec("a"), rec("a")])


def test_method_resolution_respects_arity():
    records = [
        rec("caller", [("x.Get", 1, "method"), ("y.Put", 3, "method")]),
        rec("Get", recv="A", params=1), rec("Get", recv="B", params=1), rec("Get", recv="C", params=2),
        rec("Put", recv="A", params=2, variadic=True), rec("Put", recv="B", params=5, variadic=True),
    ]
    g = build_call_graph(records)
    got = {(f.receiver, f.name) for f in g.callees(fid("caller"))}
    assert got == {("A", "Get"), ("B", "Get"), ("A", "Put")}


def test_qualified_direct_call_only_hits_that_package():
    a = FunctionRecord(FunctionId("main", None, "run"), "m.go", 1, 1,
                       (CallSite("util.Do", 0, 1, "direct", package="example.com/util"),), (), "")
    b = FunctionRecord(FunctionId("example.com/util", None, "Do"), "u.go", 1, 1, (), (), "")
    c = FunctionRecord(FunctionId("other", None, "Do"), "o.go", 1, 1, (), (), "")
    g = build_call_graph([a, b, c])
    assert g.callees(a.id) == {b.id}


names = st.sampled_from([f"f{i}" for i in range(12)])
graphs = st.lists(st.tuples(names, st.lists(names, max_size=5)), min_size=1, max_size=12,
                  unique_by=lambda t: t[0])


def _records(spec):
    defined = {n for n, _ in spec}
    return [rec(n, [(c, 0, "direct") for c in calls if c in defined]) for n, calls in spec]


@settings(max_examples=100, deadline=None)
@given(graphs)
def test_transpose_matches_brute_force(spec):
    g = build_call_graph(_records(spec))
    edges = {(fid(n), fid(c)) for n, calls in spec for c in calls if c in {m for m, _ in spec}}
    for f in g.nodes:
        assert g.callees(f) == {b for a, b in edges if a == f}
        assert g.callers(f) == {a for a, b in edges if b == f}


@settings(max_examples=100, deadline=None)
@given(graphs, st.tuples(names, st.lists(names, max_size=5)))
def test_adding_a_record_keeps_existing_edges(spec, extra):
    if extra[0] in {n for n, _ in spec}:
        return
    before = set(build_call_graph(_records(spec)).edges())
    after = set(build_call_graph(_records(spec + [extra])).edges())
    assert before <= after
