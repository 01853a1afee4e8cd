from __future__ import annotations

import json
import shutil

import pytest

from errtrace.cli import main
from support import fixture


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def workspace(tmp_path):
    """Copy fixtures so freshness checks and repository updates stay local."""
    def prepare(name):
        src = tmp_path / name
        shutil.copytree(fixture(name), src)
        idx, tpl = tmp_path / f"{name}.idx.json", tmp_path / f"{name}.tpl.json"
        assert main(["index", "--root", str(src), "--out", str(idx)]) == 0
        assert main(["templates", "--logs", str(src / "logs.jsonl"), "--out", str(tpl)]) == 0
        return src, idx, tpl
    return prepare


def template_ids(tpl):
    return [t["id"] for t in json.loads(tpl.read_text())["templates"]]


def test_index_fig2(tmp_path, capsys):
    out = tmp_path / "i.json"
    code, _, err = run(capsys, "index", "--root", str(fixture("fig2")), "--out", str(out))
    assert code == 0 and "indexed 4 functions, 3 call edges" in err
    h1 = json.loads(out.read_text())["corpus_hash"]
    run(capsys, "index", "--root", str(fixture("fig2")), "--out", str(out))
    assert json.loads(out.read_text())["corpus_hash"] == h1


def test_index_empty_dir(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    code, _, err = run(capsys, "index", "--root", str(tmp_path / "empty"), "--out", str(tmp_path / "i.json"))
    assert code == 1 and err.startswith("error: no functions indexed")


def test_index_missing_root(tmp_path, capsys):
    code, _, err = run(capsys, "index", "--root", str(tmp_path / "nope"), "--out", str(tmp_path / "i.json"))
    assert code == 1 and "error:" in err


def test_trace_render_json_and_cache(workspace, tmp_path, capsys):
    src, idx, tpl = workspace("fig2")
    capsys.readouterr()
    tid = next(t for t in template_ids(tpl))
    out = tmp_path / "res.json"
    code, stdout, _ = run(capsys, "trace", "--template", tid, "--index", str(idx), "--templates", str(tpl),
                          "--out", str(out))
    assert code == 0 and "main → runApp →" in stdout
    res = json.loads(out.read_text())
    assert res["template_id"] == tid and res["paths"][0]["hops"][0]["function"] == "main.main"
    code, stdout, _ = run(capsys, "trace", "--template", tid, "--index", str(idx), "--templates", str(tpl),
                          "--out", str(out))
    assert code == 0 and stdout.rstrip().endswith("[cached]")
    code, stdout, _ = run(capsys, "trace", "--template", tid, "--index", str(idx), "--templates", str(tpl),
                          "--out", str(out), "--force")
    assert "[cached]" not in stdout


def test_trace_unknown_template(workspace, capsys):
    src, idx, tpl = workspace("fig2")
    capsys.readouterr()
    code, _, err = run(capsys, "trace", "--template", "nope", "--index", str(idx), "--templates", str(tpl))
    assert code == 1 and err.startswith("error: not found")


def test_trace_refuses_stale_index(workspace, capsys):
    src, idx, tpl = workspace("fig2")
    capsys.readouterr()
    (src / "main.go").write_text((src / "main.go").read_text() + "\n// edited\n")
    code, _, err = run(capsys, "trace", "--template", "all", "--index", str(idx), "--templates", str(tpl))
    assert code == 1 and "re-run" in err


def test_trace_all_and_dump_candidates(workspace, tmp_path, capsys):
    src, idx, tpl = workspace("fig2")
    dump, out = tmp_path / "c.json", tmp_path / "all.json"
    code, _, _ = run(capsys, "trace", "--template", "all", "--index", str(idx), "--templates", str(tpl),
                     "--out", str(out), "--dump-candidates", str(dump))
    assert code == 0
    assert len(json.loads(out.read_text())["results"]) == len(template_ids(tpl)) == 2
    assert set(json.loads(dump.read_text())) == set(template_ids(tpl))


def test_explain_fig6(workspace, capsys):
    src, idx, tpl = workspace("fig6")
    (tid,) = template_ids(tpl)
    run(capsys, "trace", "--template", tid, "--index", str(idx), "--templates", str(tpl))
    code, md, _ = run(capsys, "explain", "--template", tid, "--templates", str(tpl))
    assert code == 0 and "splitResourceID" in md and "async boundary" in md
    assert "Origin constant: `invalid resourceID: %s`" in md


def test_explain_fig5_heuristic_shows_both_branches(workspace, capsys):
    src, idx, tpl = workspace("fig5")
    (tid,) = template_ids(tpl)
    run(capsys, "trace", "--template", tid, "--index", str(idx), "--templates", str(tpl))
    code, md, _ = run(capsys, "explain", "--template", tid, "--templates", str(tpl))
    assert "## Path 1" in md and "## Path 2" in md
    assert "fetchStatus" in md and "syncStatus" in md


def test_explain_untraced(workspace, capsys):
    src, idx, tpl = workspace("fig2")
    tid = template_ids(tpl)[0]
    capsys.readouterr()
    code, md, _ = run(capsys, "explain", "--template", tid, "--templates", str(tpl))
    assert code == 0 and f"errtrace trace --template {tid}" in md


def test_mock_replay_of_fig5_transcripts(workspace, tmp_path, capsys):
    src, idx, tpl = workspace("fig5")
    capsys.readouterr()
    out = tmp_path / "r.json"
    code, stdout, _ = run(capsys, "trace", "--template", "all", "--index", str(idx), "--templates", str(tpl),
                          "--backend", "mock", "--transcript-replay", str(fixture("fig5") / "transcripts"),
                          "--out", str(out))
    assert code == 0
    assert "reconcilePods → syncStatus ⇥ external(client.UpdateStatus)" in stdout
    (res,) = json.loads(out.read_text())["results"]
    assert len(res["paths"]) == 1 and "write" in res["paths"][0]["hops"][1]["evidence"]


def test_mock_without_transcripts(workspace, capsys):
    src, idx, tpl = workspace("fig5")
    capsys.readouterr()
    code, _, err = run(capsys, "trace", "--template", "all", "--index", str(idx), "--templates", str(tpl),
                       "--backend", "mock")
    assert code == 1 and "--transcript-replay" in err


def test_eval_generate_score_run(tmp_path, capsys):
    spec = tmp_path / "s.toml"
    spec.write_text("[corpus]\nseed = 3\nn_errors = 20\nn_functions = 150\nn_packages = 3\n")
    corp = tmp_path / "corp"
    code, _, err = run(capsys, "eval", "generate", "--spec", str(spec), "--out", str(corp))
    assert code == 0 and "20 ground-truth errors" in err
    assert {p.name for p in corp.iterdir()} >= {"src", "logs.jsonl", "truth.json"}

    idx, tpl, pred, dump = (tmp_path / n for n in ("i.json", "t.json", "p.json", "c.json"))
    assert main(["index", "--root", str(corp / "src"), "--out", str(idx)]) == 0
    assert main(["templates", "--logs", str(corp / "logs.jsonl"), "--out", str(tpl)]) == 0
    assert main(["trace", "--template", "all", "--index", str(idx), "--templates", str(tpl),
                 "--out", str(pred), "--dump-candidates", str(dump)]) == 0
    capsys.readouterr()
    code, md, _ = run(capsys, "eval", "score", "--pred", str(pred), "--truth", str(corp / "truth.json"),
                      "--candidates", str(dump))
    assert code == 0 and "| Method | Hop 0 |" in md and "20/20 (100.0%)" in md
    code, text, _ = run(capsys, "eval", "score", "--pred", str(pred), "--truth", str(corp / "truth.json"),
                        "--report", "csv")
    assert text.splitlines()[0] == "method,bucket,correct,total,accuracy"

    out = tmp_path / "run"
    code, _, err = run(capsys, "eval", "run", "--corpus", str(corp), "--out", str(out))
    assert code == 0 and err.startswith("accuracy 1.0000 (20/20)")
    assert {p.name for p in out.iterdir()} >= {"report.md", "report.csv", "timing.csv", "pred.json"}


def test_eval_generate_bad_spec(tmp_path, capsys):
    spec = tmp_path / "s.toml"
    spec.write_text("[corpus]\nambiguity_rate = 2.0\n")
    code, _, err = run(capsys, "eval", "generate", "--spec", str(spec), "--out", str(tmp_path / "c"))
    assert code == 1 and err.startswith("error:")


def test_eval_run_mock(tmp_path, capsys):
    corp = tmp_path / "corp"
    spec = tmp_path / "s.toml"
    spec.write_text("[corpus]\nseed = 4\nn_errors = 30\nn_functions = 200\nn_packages = 3\nambiguity_rate = 0.3\n")
    assert main(["eval", "generate", "--spec", str(spec), "--out", str(corp)]) == 0
    capsys.readouterr()
    code, _, err = run(capsys, "eval", "run", "--corpus", str(corp), "--out", str(tmp_path / "r"),
                       "--backend", "mock", "--limit", "5")
    assert code == 0 and err.startswith("accuracy 1.0000")
    assert any((tmp_path / "r" / "transcripts").iterdir())
