"""Record mock-agent transcripts whose choices follow the ground truth.

Replaying these exercises the full agent protocol offline: the scripted
agent inspects the closure and the competing callees' code before it
answers, just as a model would.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping

from ..constindex import Index
from ..llm_client import LLMDisambiguator, PolicyEndpoint, path_following_policy
from ..logtemplate import LogTemplate
from ..pipeline import PipelineRun, trace_all
from ..tracer import TraceLimits
from .generator import GroundTruthEntry


def ambiguous_subset(templates: Iterable[LogTemplate], truth: Mapping[str, GroundTruthEntry],
                     limit: int | None = None) -> list[LogTemplate]:
    """Templates whose ground truth went through a deliberate tie."""
    out = [t for t in templates if t.template_id in truth and truth[t.template_id].ambiguous]
    return out[:limit] if limit is not None else out


def record_scripted(index: Index, templates: Iterable[LogTemplate], truth: Mapping[str, GroundTruthEntry],
                    out_dir: str | Path, limits: TraceLimits | None = None) -> PipelineRun:
    templates = list(templates)
    paths = {tid: [list(e.path)] for tid, e in truth.items()}
    terminal = {tid: e.terminal_reason for tid, e in truth.items()}
    agent = LLMDisambiguator(endpoint=PolicyEndpoint(path_following_policy(paths, terminal)), record_dir=out_dir)
    return trace_all(index, templates, agent, limits)
