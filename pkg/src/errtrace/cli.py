"""Command-line entry point: index, templates, trace, explain, eval."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

from .config import ConfigError, DrainConfig, load_config
from .constindex import Index, IndexFormatError, StaleIndexError, atomic_write_json, build_index
from .logtemplate import TemplateRepository, export_templates, extract_templates, read_logs
from .scoping import candidate_functions
from .tracer import (
    HeuristicDisambiguator,
    TraceError,
    TraceLimits,
    TraceResult,
    reconstruct_path,
)

log = logging.getLogger("errtrace")


class CLIError(Exception):
    """A user-facing failure; the message goes to stderr and the exit code is 1."""


def _die_if_missing(*paths: Path | None) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise CLIError(f"no such file or directory: {p}")


def _write_json(payload: object, out: str | None) -> None:
    if out:
        atomic_write_json(out, payload)
    else:
        json.dump(payload, sys.stdout, indent=1, sort_keys=True, ensure_ascii=False)
        sys.stdout.write("\n")


def _write_text(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


# ---------------------------------------------------------------------------
# index / templates
# ---------------------------------------------------------------------------


def cmd_index(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    roots = [Path(r) for r in (args.root or cfg.roots)]
    if not roots:
        raise CLIError("give at least one --root")
    _die_if_missing(*roots)
    k = args.closure_depth if args.closure_depth is not None else cfg.closure_depth
    if k < 0:
        raise CLIError("--closure-depth must be >= 0")
    index = build_index([r.resolve() for r in roots], cfg.sinks, k)
    for d in index.diagnostics:
        print(f"warning: {d.path}:{d.line}: {d.message}", file=sys.stderr)
    if not index.records:
        raise CLIError(f"no functions indexed under {', '.join(map(str, roots))}")
    index.save(args.out)
    print(f"indexed {len(index.records)} functions, {len(list(index.graph.edges()))} call edges, "
          f"{len(index.diagnostics)} files skipped; corpus {index.corpus_hash[:12]}", file=sys.stderr)
    return 0


def cmd_templates(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    _die_if_missing(Path(args.logs))
    drain = DrainConfig(
        depth=args.drain_depth if args.drain_depth is not None else cfg.drain.depth,
        sim=args.drain_sim if args.drain_sim is not None else cfg.drain.sim,
        max_children=cfg.drain.max_children,
    )
    repo = extract_templates(read_logs(args.logs), drain)
    if args.out:
        export_templates(repo, args.out)
    else:
        _write_json(repo.to_json(), None)
    print(f"{len(repo)} templates", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# trace
# ---------------------------------------------------------------------------


def _disambiguator(args: argparse.Namespace, cfg_llm: dict):
    if args.backend == "heuristic":
        return HeuristicDisambiguator()
    from .llm_client import EndpointConfig, LLMDisambiguator

    if args.backend == "mock":
        if not args.transcript_replay:
            raise CLIError("--backend mock needs --transcript-replay DIR")
        _die_if_missing(Path(args.transcript_replay))
        return LLMDisambiguator(replay_dir=args.transcript_replay)
    base = args.llm_endpoint or cfg_llm.get("endpoint")
    model = args.llm_model or cfg_llm.get("model")
    if not base or not model:
        raise CLIError("--backend llm needs --llm-endpoint and --llm-model (or an [llm] config table)")
    mapping = {k: v for k, v in cfg_llm.items() if k not in ("endpoint", "model")}
    cfg = EndpointConfig.from_mapping({"base_url": base, "model": model, **mapping})
    fallback = HeuristicDisambiguator() if args.fallback_heuristic else None
    return LLMDisambiguator(cfg, record_dir=args.transcript_record, fallback=fallback)


def _result_payload(res: TraceResult, repo: TemplateRepository) -> dict:
    d = res.to_json()
    t = repo.get(res.template_id)
    d["template"] = t.text
    d["origin"] = list(t.origin) if t.origin else None
    return d


def cmd_trace(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    _die_if_missing(Path(args.index), Path(args.templates))
    try:
        index = Index.load(args.index)
    except (IndexFormatError, KeyError, ValueError) as exc:
        raise CLIError(f"cannot read index {args.index}: {exc}") from exc
    repo = TemplateRepository.load(args.templates)
    roots = args.repo or index.roots
    if roots and all(Path(r).exists() for r in roots):
        from .frontend import read_corpus
        from .constindex import corpus_hash

        index.check_fresh(corpus_hash(read_corpus(roots)))
    else:
        print("warning: source roots not found, skipping index freshness check", file=sys.stderr)

    if args.template == "all":
        targets = list(repo)
    else:
        try:
            targets = [repo.get(args.template)]
        except KeyError as exc:
            raise CLIError(f"not found: {exc.args[0]}") from None
    max_hops = args.max_hops if args.max_hops is not None else cfg.max_hops
    limits = TraceLimits(max_hops=max_hops)
    d = None
    payloads = []
    dumps = {}
    failures = 0
    for t in targets:
        if not args.force and t.template_id in repo.resolved:
            res = TraceResult.from_json(repo.resolved[t.template_id])
            res.cached = True
        else:
            d = d or _disambiguator(args, cfg.llm)
            cands = candidate_functions(t, index)
            if args.dump_candidates:
                dumps[t.template_id] = cands.to_json()
            t0 = time.perf_counter()
            try:
                res = reconstruct_path(t, index, cands, d, limits, cfg.sinks)
            except (TraceError, _llm_errors()) as exc:
                failures += 1
                print(f"error: {t.template_id}: {exc}", file=sys.stderr)
                continue
            log.info("traced %s in %.3fs", t.template_id, time.perf_counter() - t0)
            repo.mark_resolved(t.template_id, res.to_json())
        payloads.append(_result_payload(res, repo))
        chain = res.best.render() if res.best else "(no path)"
        more = f" (+{len(res.paths) - 1} more)" if len(res.paths) > 1 else ""
        tag = " [cached]" if res.cached else ""
        print(f"{t.template_id}: {chain}{more}{tag}", file=sys.stdout if args.out else sys.stderr)
    repo.save(args.templates)
    if args.dump_candidates:
        atomic_write_json(args.dump_candidates, dumps)
    if not payloads:
        return 1
    _write_json(payloads[0] if args.template != "all" else {"results": payloads}, args.out)
    return 1 if failures and args.template != "all" else 0


def _llm_errors():
    from .llm_client import LLMError

    return LLMError


# ---------------------------------------------------------------------------
# explain
# ---------------------------------------------------------------------------


def explain_markdown(repo: TemplateRepository, template_id: str) -> str:
    t = repo.get(template_id)
    lines = [f"# Template {t.template_id}", "", f"`{t.text}`", ""]
    if t.origin:
        lines += [f"Logged at {t.origin[0]}:{t.origin[1]} ({t.member_count} messages)", ""]
    if template_id not in repo.resolved:
        lines += ["This template has not been traced yet. Run:", "",
                  f"    errtrace trace --template {template_id} --index INDEX --templates REPO", ""]
        return "\n".join(lines)
    res = TraceResult.from_json(repo.resolved[template_id])
    if not res.paths:
        lines += ["No propagation path was found.", ""]
    for i, p in enumerate(res.paths, 1):
        lines += [f"## Path {i}: {p.render()}", "",
                  f"- terminal: {p.terminal_reason}" + (f" at `{p.external}`" if p.external else ""),
                  f"- confidence: {p.confidence:.3f}", f"- hops: {p.hop_count}", ""]
        lines += ["| # | function | location | link | matched constant | fragments | evidence |",
                  "|---|---|---|---|---|---|---|"]
        for j, h in enumerate(p.hops):
            c = h.matched_constant
            const = f"`{c.raw}`" if c else ""
            frags = ", ".join(f"`{f}`" for f in c.fragments) if c else ""
            ev = h.evidence.replace("|", "\\|")
            lines.append(f"| {j} | `{h.function}` | {h.file}:{h.line} | {h.link_kind} | {const} | {frags} | {ev} |")
        if p.origin_constant is not None:
            lines += ["", f"Origin constant: `{p.origin_constant.raw}`"]
        lines.append("")
    if res.notes:
        lines += ["Notes:", ""] + [f"- {n}" for n in res.notes] + [""]
    return "\n".join(lines)


def cmd_explain(args: argparse.Namespace) -> int:
    _die_if_missing(Path(args.templates))
    repo = TemplateRepository.load(args.templates)
    try:
        text = explain_markdown(repo, args.template)
    except KeyError as exc:
        raise CLIError(f"not found: {exc.args[0]}") from None
    _write_text(text, args.out)
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def cmd_eval_generate(args: argparse.Namespace) -> int:
    from .eval.generator import CorpusSpec, GeneratorError, SpecError, generate_corpus

    try:
        spec = CorpusSpec.load(args.spec) if args.spec else CorpusSpec(seed=0)
        if args.seed is not None:
            spec = CorpusSpec.from_mapping({**spec.to_json(), "seed": args.seed})
        corpus = generate_corpus(spec)
    except (SpecError, GeneratorError) as exc:
        raise CLIError(str(exc)) from exc
    src = corpus.write(args.out)
    print(f"wrote {len(corpus.files)} files under {src}, {len(corpus.logs)} log lines, "
          f"{len(corpus.truth.errors)} ground-truth errors", file=sys.stderr)
    return 0


def _predictions(pred: dict) -> list[dict]:
    return pred["results"] if "results" in pred else [pred]


def cmd_eval_score(args: argparse.Namespace) -> int:
    from .eval.generator import GroundTruth
    from .eval.metrics import accuracy, static_precision
    from .eval.report import csv_report, markdown_report

    _die_if_missing(Path(args.pred), Path(args.truth))
    truth = GroundTruth.load(args.truth).by_key()
    pred = json.loads(Path(args.pred).read_text(encoding="utf-8"))
    paths, gt = {}, {}
    for r in _predictions(pred):
        origin = r.get("origin")
        e = truth.get(f"{origin[0]}:{origin[1]}") if origin else None
        if e is None:
            continue
        gt[r["template_id"]] = e
        paths[r["template_id"]] = [h["function"] for h in r["paths"][0]["hops"]] if r["paths"] else None
    # templates that were never traced still count against accuracy
    seen = {f"{e.log_file}:{e.log_line}" for e in gt.values()}
    for key, e in truth.items():
        if key not in seen:
            gt[f"missing:{key}"] = e
    rep = accuracy(paths, gt)
    prec = None
    if args.candidates:
        cands = json.loads(Path(args.candidates).read_text(encoding="utf-8"))
        prec = static_precision({tid: list(c["candidates"]) for tid, c in cands.items()},
                                {tid: e for tid, e in gt.items() if tid in cands})
    rows = {args.label: rep}
    text = csv_report(rows, prec) if args.report == "csv" else markdown_report(rows, prec)
    _write_text(text, args.out)
    return 0


def cmd_eval_run(args: argparse.Namespace) -> int:
    """Index, mine, trace and score a generated corpus directory in one go."""
    from .eval.generator import GroundTruth
    from .eval.metrics import accuracy, align_truth, static_precision, time_traces
    from .eval.report import csv_report, markdown_report
    from .llm_client import LLMDisambiguator

    corpus = Path(args.corpus)
    _die_if_missing(corpus / "src", corpus / "logs.jsonl", corpus / "truth.json")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    index = build_index([corpus / "src"])
    repo = extract_templates(read_logs(corpus / "logs.jsonl"))
    truth = align_truth(repo, GroundTruth.load(corpus / "truth.json"))
    limits = TraceLimits(max_hops=args.max_hops)
    templates = [t for t in repo if t.template_id in truth]
    if args.backend == "mock":
        from .eval.scripted import ambiguous_subset, record_scripted

        tx = Path(args.transcripts or out / "transcripts")
        templates = ambiguous_subset(templates, truth, args.limit)
        if not args.transcripts:
            record_scripted(index, templates, truth, tx, limits)
        d = LLMDisambiguator(replay_dir=tx)
    else:
        d = HeuristicDisambiguator()
    cands = {t.template_id: candidate_functions(t, index) for t in templates}
    timing, results = time_traces(
        templates, lambda t: reconstruct_path(t, index, cands[t.template_id], d, limits), truth)
    pred = {tid: [str(f) for f in r.best.functions] if r.best else None for tid, r in results.items()}
    sub = {t.template_id: truth[t.template_id] for t in templates}
    rep = accuracy(pred, sub)
    prec = static_precision({tid: [str(f) for f in c.candidates] for tid, c in cands.items()}, sub)
    rows = {args.backend: rep}
    (out / "report.md").write_text(markdown_report(rows, prec, timing), encoding="utf-8")
    (out / "report.csv").write_text(csv_report(rows, prec), encoding="utf-8")
    (out / "timing.csv").write_text(timing.to_csv(), encoding="utf-8")
    payload = {"results": [{**results[t.template_id].to_json(), "origin": list(t.origin) if t.origin else None,
                            "template": t.text} for t in templates]}
    atomic_write_json(out / "pred.json", payload)
    print(f"accuracy {rep.overall:.4f} ({rep.correct}/{rep.total}); precision {prec.mean:.4f}; "
          f"results in {out}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# wiring
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="errtrace", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("index", help="parse sources and write the constant index")
    s.add_argument("--root", action="append", help="source root (repeatable)")
    s.add_argument("--out", required=True, help="index JSON to write")
    s.add_argument("--closure-depth", type=int, help="closure depth k (default 3)")
    s.add_argument("--config", help="TOML config file")
    s.set_defaults(func=cmd_index)

    s = sub.add_parser("templates", help="mine log templates from JSONL logs")
    s.add_argument("--logs", required=True)
    s.add_argument("--out")
    s.add_argument("--drain-depth", type=int)
    s.add_argument("--drain-sim", type=float)
    s.add_argument("--config")
    s.set_defaults(func=cmd_templates)

    s = sub.add_parser("trace", help="reconstruct propagation paths")
    s.add_argument("--template", required=True, help="template id, or 'all'")
    s.add_argument("--index", required=True)
    s.add_argument("--templates", required=True, help="template repository (updated with results)")
    s.add_argument("--repo", action="append", help="source roots for the freshness check")
    s.add_argument("--backend", choices=("heuristic", "llm", "mock"), default="heuristic")
    s.add_argument("--max-hops", type=int)
    s.add_argument("--out")
    s.add_argument("--force", action="store_true", help="ignore cached results")
    s.add_argument("--dump-candidates", help="write candidate sets as JSON")
    s.add_argument("--transcript-record", help="directory for agent transcripts")
    s.add_argument("--transcript-replay", help="directory of transcripts to replay (mock backend)")
    s.add_argument("--llm-endpoint")
    s.add_argument("--llm-model")
    s.add_argument("--fallback-heuristic", action="store_true",
                   help="use the heuristic when the model endpoint is unreachable")
    s.add_argument("--config")
    s.set_defaults(func=cmd_trace)

    s = sub.add_parser("explain", help="render a stored trace as markdown")
    s.add_argument("--template", required=True)
    s.add_argument("--templates", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_explain)

    ev = sub.add_parser("eval", help="synthetic corpora and scoring")
    evsub = ev.add_subparsers(dest="eval_command", required=True)
    s = evsub.add_parser("generate", help="write a synthetic corpus with ground truth")
    s.add_argument("--spec", help="TOML corpus spec")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_eval_generate)

    s = evsub.add_parser("score", help="score trace output against ground truth")
    s.add_argument("--pred", required=True, help="output of `trace --template all`")
    s.add_argument("--truth", required=True)
    s.add_argument("--candidates", help="candidate dump for the precision line")
    s.add_argument("--report", choices=("md", "csv"), default="md")
    s.add_argument("--label", default="errtrace")
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval_score)

    s = evsub.add_parser("run", help="full pipeline with timing over a generated corpus")
    s.add_argument("--corpus", required=True, help="directory written by `eval generate`")
    s.add_argument("--out", required=True)
    s.add_argument("--backend", choices=("heuristic", "mock"), default="heuristic")
    s.add_argument("--transcripts", help="replay these instead of scripting new ones (mock)")
    s.add_argument("--limit", type=int, default=20, help="ambiguous templates to replay (mock)")
    s.add_argument("--max-hops", type=int, default=12)
    s.set_defaults(func=cmd_eval_run)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (CLIError, ConfigError, StaleIndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
