from __future__ import annotations

import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errtrace.config import SinkConfig
from errtrace.constindex import StaleIndexError
from errtrace.frontend import FunctionId, StringConstant, classify_string
from errtrace.logtemplate import PARAM, LogTemplate, tokenize_message
from errtrace.scoping import (align_constant, candidate_functions, find_fragment, match_format_string,
                              token_cover, union_coverage, wrap_remainder)
from support import load_fixture, template_like

SINKS = SinkConfig()


def tpl(text: str) -> LogTemplate:
    """A template from display text: ``<*>`` marks a slot, digits are masked."""
    toks = tuple(t.replace("<*>", PARAM) for t in tokenize_message(text))
    return LogTemplate("t", toks)


def const(raw: str) -> StringConstant:
    return classify_string(raw, "fmt.Errorf", SINKS)


RECV = "receive package %d from source %s"
DIAL = "failed to connect to db: %w"
READ = "could not read config file '%s': %w"
EMPTY = "config file is empty"

TABLE = [
    (RECV, "receive package <*> from source <*>", True),
    (RECV, "receive package 12 from source 3", True),
    (RECV, "error: receive package <*> from source <*>", True),
    (RECV, "<*> receive package <*> from source <*>", True),
    (RECV, "failed: receive package 7 from source db-1: timeout", True),
    (RECV, "receive package <*> from source", True),
    (RECV, "from source <*> receive package <*>", True),
    (RECV, "receive packages <*> from sources <*>", True),
    (RECV, "receive package: <*> from source: <*>", True),
    (RECV, "receive package <*>", False),
    (RECV, "from source <*>", False),
    (RECV, "receive <*> from source <*>", False),
    (RECV, "receive package <*> to source <*>", False),
    (RECV, "receive package <*> from <*>", False),
    (RECV, "receive <*> <*> from source <*>", False),
    (RECV, "source <*> from receive package", False),
    (RECV, "receive-package <*> from source <*>", False),
    (RECV, "RECEIVE PACKAGE <*> FROM SOURCE <*>", False),
    (RECV, "package <*> from source <*> receive", False),
    (RECV, "received <*> package from source <*>", False),
    (DIAL, "store error: failed to <*> to db: timeout", True),
    (DIAL, "store error: failed to connect to db: timeout", True),
    (DIAL, "failed to <*> <*> <*>", False),
    (DIAL, "failed to connect to cache: timeout", False),
    (READ, "Error: application setup failed: could not read config file '<*>': open <*>: no such file", True),
    (READ, "could not read config file <*>: open", False),
    (EMPTY, "Error: application setup failed: config file is empty", True),
    (EMPTY, "config file is not empty", False),
    ("%w", "anything at all", True),
    ("%s %w", "", True),
]


def test_table_size():
    assert len(TABLE) == 30


@pytest.mark.parametrize("raw,text,expected", TABLE)
def test_match_format_string_table(raw, text, expected):
    t = tpl(text) if text else LogTemplate("t", ())
    assert match_format_string(const(raw), t) is expected


def test_recv_fragments():
    assert const(RECV).fragments == ("receive package", "from source")


@pytest.mark.parametrize("ft,tt,left,right,got", [
    ("db:", "db:", True, True, 3),
    ("conn", "connect", True, False, 4),
    ("ect", "connect", False, True, 3),
    ("x", "connect", False, False, None),
    ("'", "'" + PARAM + "':", True, False, 1),
    ("':", "'" + PARAM + "':", False, False, 2),
    ("connect", PARAM, True, True, 0),
    ("file'", "file'" + PARAM, False, True, 5),  # a slot may render empty
    ("fil", "file'" + PARAM, False, True, 0),  # absorbed by the slot
    ("fil", "file'", False, True, None),
])
def test_token_cover(ft, tt, left, right, got):
    assert token_cover(ft, tt, left, right) == got


def test_alignment_and_wrap_remainder():
    t = tpl("Error: application setup failed: could not read config file '<*>': open <*>: no such file")
    c = dataclasses.replace(const(READ), wrap_gap=2)
    spans = align_constant(c, t.tokens)
    assert spans is not None and spans[0].start == 4
    rest = wrap_remainder(c, spans, t.tokens)
    assert [x.replace(PARAM, "<*>") for x in rest] == ["open", "<*>:", "no", "such", "file"]
    assert union_coverage(spans) == sum(sp.literal for sp in spans) - 1  # the shared quote is counted once


def test_find_fragment_respects_start():
    toks = tpl("a b: x a b: y").tokens
    assert find_fragment("a b:", toks).start == 0
    assert find_fragment("a b:", toks, 1).start == 3
    assert find_fragment("a b:", toks, 4) is None


def test_fig2_candidates():
    idx, repo = load_fixture("fig2")
    t = template_like(repo, "no such file")
    cs = candidate_functions(t, idx)
    got = {f.name for f in cs.functions}
    assert {"main", "runApp", "LoadFile"} <= got
    assert "ProcessData" not in got
    assert {f.name for f in cs.metadata_index} >= got


def test_fig5_candidates_both_status_functions():
    idx, repo = load_fixture("fig5")
    cs = candidate_functions(next(iter(repo)), idx)
    assert {"fetchStatus", "syncStatus", "reconcilePods"} <= {f.name for f in cs.functions}


def test_intermediaries_enter_scope_without_constants():
    idx, repo = load_fixture("fig6")
    cs = candidate_functions(next(iter(repo)), idx)
    assert "checkResources" not in {f.name for f in cs.functions}
    assert "checkResources" in {f.name for f in cs.metadata_index}


def test_no_anchor_gives_empty_set():
    idx, _ = load_fixture("fig2")
    cs = candidate_functions(tpl("kernel panic: attempted to kill init"), idx)
    assert len(cs) == 0 and cs.metadata_index == {}


def test_zero_fragment_constants_never_make_candidates():
    idx, repo = load_fixture("fig2")
    f = FunctionId("main", None, "runApp")
    rec = idx.records[f]
    bare = StringConstant("%w", "format", (), "error-create", rec.line_start)
    idx.constants.sigma[f] = list(idx.constants.sigma[f]) + [bare]
    cs = candidate_functions(tpl("totally unrelated words"), idx)
    assert f not in cs


def test_stale_hash_refused():
    idx, repo = load_fixture("fig2")
    with pytest.raises(StaleIndexError):
        candidate_functions(next(iter(repo)), idx, current_hash="0" * 64)


words = st.sampled_from(["open", "db", "file:", "to", "failed", "'x'", "42", PARAM, PARAM + ":", "conn"])


@settings(max_examples=300, deadline=None)
@given(st.lists(st.lists(words.filter(lambda w: PARAM not in w), min_size=1, max_size=3), min_size=1, max_size=4),
       st.lists(words, min_size=1, max_size=10), st.data())
def test_dropping_a_fragment_keeps_a_match(frags, toks, data):
    fragments = tuple(" ".join(f) for f in frags)
    t = LogTemplate("t", tuple(toks))
    full = StringConstant("x", "format", fragments, "error-create", 1)
    if not match_format_string(full, t):
        return
    drop = data.draw(st.integers(0, len(fragments) - 1))
    fewer = StringConstant("x", "format", fragments[:drop] + fragments[drop + 1:], "error-create", 1)
    assert match_format_string(fewer, t)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from(["load", "db:", "file", "'a'", "open", "x"]), min_size=1, max_size=4),
       st.lists(st.sampled_from(["pre", "err:", "zz"]), max_size=3),
       st.lists(st.sampled_from(["post", "tail", "qq:"]), max_size=3))
def test_fragment_found_inside_any_template_that_contains_it(frag, before, after):
    toks = tuple(before + frag + after)
    span = find_fragment(" ".join(frag), toks)
    assert span is not None and span.start <= len(before)
