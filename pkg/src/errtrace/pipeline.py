"""Glue for running the whole analysis over a corpus in-process."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .config import DrainConfig, SinkConfig
from .constindex import Index, build_index
from .logtemplate import LogTemplate, TemplateRepository, extract_templates, read_logs
from .scoping import CandidateSet, candidate_functions
from .tracer import Disambiguator, TraceLimits, TraceResult, reconstruct_path


@dataclass
class PipelineRun:
    index: Index
    templates: TemplateRepository
    results: dict[str, TraceResult] = field(default_factory=dict)
    candidates: dict[str, CandidateSet] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)


def trace_one(t: LogTemplate, index: Index, d: Disambiguator, limits: TraceLimits | None = None,
              sinks: SinkConfig | None = None) -> tuple[CandidateSet, TraceResult]:
    cands = candidate_functions(t, index)
    return cands, reconstruct_path(t, index, cands, d, limits, sinks)


def trace_all(index: Index, templates: Iterable[LogTemplate], d: Disambiguator,
              limits: TraceLimits | None = None, sinks: SinkConfig | None = None,
              run: PipelineRun | None = None) -> PipelineRun:
    from .llm_client import LLMError
    from .tracer import TraceError

    run = run or PipelineRun(index, TemplateRepository())
    for t in templates:
        try:
            cands, res = trace_one(t, index, d, limits, sinks)
        except (TraceError, LLMError) as exc:
            run.errors[t.template_id] = str(exc)
            continue
        run.candidates[t.template_id] = cands
        run.results[t.template_id] = res
    return run


def analyze(roots: Iterable[str | Path], log_path: str | Path, d: Disambiguator,
            sinks: SinkConfig | None = None, drain: DrainConfig | None = None, k: int | None = None,
            limits: TraceLimits | None = None) -> PipelineRun:
    index = build_index(roots, sinks, k)
    repo = extract_templates(read_logs(log_path), drain)
    run = PipelineRun(index, repo)
    return trace_all(index, repo, d, limits, sinks, run)
