from __future__ import annotations

import json
import random

from hypothesis import given, settings
from hypothesis import strategies as st

from errtrace.config import DrainConfig
from errtrace.logtemplate import (FALLBACK_BUCKET, PARAM, DrainTree, LogRecord, LogTemplate,
                                  TemplateRepository, bucket_by_origin, drain_insert, export_templates,
                                  extract_templates, generalize, read_logs, render_tokens,
                                  template_id_for, token_matches, tokenize_message)
from support import FORMATS, fixture, synthetic_messages


def test_digit_only_tokens_are_masked():
    assert tokenize_message("retry 3 of 10: host-7 v2") == ["retry", PARAM, "of", "10:", "host-7", "v2"]


def test_generalize_keeps_affixes():
    assert generalize("1001:", "2002:") == PARAM + ":"
    assert generalize("'a.txt'", "'bb.yaml'") == "'" + PARAM + "'"
    assert generalize("same", "same") == "same"
    assert generalize(PARAM + ":", "77:") == PARAM + ":"
    t = generalize("ab", "abab")
    assert token_matches(t, "ab") and token_matches(t, "abab")


def test_buckets():
    recs = [LogRecord("a", origin=("main.go", 42)), LogRecord("b", origin=("main.go", 42)),
            LogRecord("c", origin=("main.go", 50))]
    assert sorted(bucket_by_origin(recs)) == [("main.go", 42), ("main.go", 50)]
    assert list(bucket_by_origin([LogRecord("a"), LogRecord("b")])) == [FALLBACK_BUCKET]


def test_fig2_messages_share_a_bucket_but_split():
    recs = read_logs(fixture("fig2") / "logs.jsonl")
    assert len(bucket_by_origin(recs)) == 1
    repo = extract_templates(recs)
    texts = sorted(t.text for t in repo)
    assert len(texts) == 2
    assert any("no such file or directory" in t for t in texts)
    assert any("invalid syntax" in t for t in texts)


def test_identical_messages_merge():
    tree = DrainTree()
    m = "Error: application setup failed: open settings.txt: no such file or directory"
    assert drain_insert(tree, m) == drain_insert(tree, m)
    assert tree.clusters[0].count == 2 and PARAM not in "".join(tree.clusters[0].tokens)


def test_ten_formats_separate_with_perfect_membership():
    msgs = synthetic_messages(random.Random(7), 1000)
    tree = DrainTree(DrainConfig(depth=4, sim=0.5))
    members: dict[int, set[int]] = {}
    for fmt, m in msgs:
        members.setdefault(drain_insert(tree, m), set()).add(fmt)
    assert len(tree.clusters) == len(FORMATS) == 10
    assert all(len(v) == 1 for v in members.values())
    assert sorted(next(iter(v)) for v in members.values()) == list(range(10))
    repo = extract_templates([LogRecord(m) for _, m in msgs])
    assert len(repo) == 10 and sum(t.member_count for t in repo) == 1000


def test_rerun_is_byte_identical(tmp_path):
    msgs = [LogRecord(m) for _, m in synthetic_messages(random.Random(3), 300)]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    export_templates(extract_templates(msgs), a)
    export_templates(extract_templates(msgs), b)
    assert a.read_bytes() == b.read_bytes()


def test_keyword_as_parameter_merges():
    repo = extract_templates(read_logs(fixture("keyword") / "logs.jsonl"))
    assert [t.text for t in repo] == ["store error: failed to <*> to db: timeout"]


def test_severity_filter():
    errs = [LogRecord(m) for _, m in synthetic_messages(random.Random(5), 100)]
    noise = [LogRecord(m, severity=lvl) for lvl in ("info", "warn", "debug") for _, m in
             synthetic_messages(random.Random(9), 40)]
    noise.append(LogRecord("completely different text here", severity="info"))
    assert extract_templates(errs).to_json() == extract_templates(errs + noise).to_json()
    assert len(extract_templates(noise)) == 0


words = st.sampled_from(["open", "close", "db", "file", "42", "7", "x:", "y:", "timeout", "'a'", "'bcd'"])


@settings(max_examples=150, deadline=None)
@given(st.lists(st.lists(words, min_size=1, max_size=7), min_size=1, max_size=40))
def test_every_absorbed_message_matches_its_template(msgs):
    tree = DrainTree()
    owners = [(drain_insert(tree, " ".join(m)), " ".join(m)) for m in msgs]
    for cid, m in owners:
        t = LogTemplate("t", tuple(tree.clusters[cid].tokens))
        assert t.matches(m)


def test_template_ids_stable_and_distinct():
    a = template_id_for(("f.go", 1), ["x", PARAM])
    assert a == template_id_for(("f.go", 1), ["x", PARAM])
    assert a != template_id_for(("f.go", 2), ["x", PARAM])
    assert a != template_id_for(("f.go", 1), ["x", "y"])


def test_repository_round_trip_and_lookup(tmp_path):
    repo = extract_templates(read_logs(fixture("fig2") / "logs.jsonl"))
    t = next(iter(repo))
    repo.mark_resolved(t.template_id, {"paths": []})
    p = tmp_path / "r.json"
    repo.save(p)
    back = TemplateRepository.load(p)
    assert back.to_json() == repo.to_json()
    assert back.find(t.sample, t.origin).template_id == t.template_id
    assert back.find(t.sample, ("elsewhere.go", 1)) is None


def test_repository_rejects_stray_resolved():
    import pytest
    with pytest.raises(ValueError):
        TemplateRepository({}, {"t1": {}})
    with pytest.raises(KeyError):
        TemplateRepository().mark_resolved("nope", {})


def test_read_logs_reports_bad_line(tmp_path):
    import pytest
    p = tmp_path / "l.jsonl"
    p.write_text(json.dumps({"msg": "ok"}) + "\n\n{not json}\n")
    with pytest.raises(ValueError, match=":3:"):
        read_logs(p)


def test_render_tokens():
    assert render_tokens(["a", PARAM + ":", "'" + PARAM + "'"]) == "a <*>: '<*>'"
