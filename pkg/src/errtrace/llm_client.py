"""Tool-calling agent loop behind the Disambiguator contract.

Wire protocol (any OpenAI-compatible ``/chat/completions`` endpoint)::

    POST {base_url}/chat/completions
    {"model": ..., "temperature": 0, "messages": [...], "tools": [...]}

The model either answers with ``tool_calls`` (each executed and returned
as a ``tool`` message) or with a final message whose content is a JSON
object::

    {"chosen": ["pkg.Fn", ...], "stop": false, "confidence": 0.9,
     "evidence": "why", "terminal_reason": null}

Transcripts are stored one file per decision under a directory, named by
a hash of (template id, current function, remaining text), so a replay
can serve each decision of a trace from its own recording.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from .frontend import FunctionId
from .logtemplate import LogTemplate, render_tokens
from .tracer import TERMINAL_REASONS, Decision, Disambiguator, NotFoundError, ToolSet

ROLES = ("system", "assistant", "tool")


class LLMError(RuntimeError):
    pass


class EndpointError(LLMError):
    """The endpoint could not be reached after all retries."""


class BudgetExhausted(LLMError):
    pass


class ReplayMismatch(LLMError):
    pass


class TranscriptFormatError(LLMError):
    pass


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str = "http://localhost:8000/v1"
    model: str = "default"
    api_key_env: str = "ERRTRACE_LLM_KEY"
    timeout: float = 60.0
    max_retries: int = 3
    max_tool_calls: int = 8
    backoff: float = 0.5
    max_in_flight: int = 4

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_tool_calls < 1:
            raise ValueError("max_tool_calls must be >= 1")
        if self.max_retries < 0 or self.max_in_flight < 1:
            raise ValueError("invalid retry or concurrency settings")

    @classmethod
    def from_mapping(cls, d: dict) -> EndpointConfig:
        keys = {"base_url", "model", "api_key_env", "timeout", "max_retries", "max_tool_calls",
                "backoff", "max_in_flight"}
        kw = {k: v for k, v in d.items() if k in keys}
        if "endpoint" in d:
            kw["base_url"] = d["endpoint"]
        return cls(**kw)


# ---------------------------------------------------------------------------
# transcripts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Turn:
    role: str
    content: str = ""
    tool_name: str | None = None
    tool_args: dict | None = None
    call_id: str | None = None

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"bad role {self.role!r}")

    def size(self) -> int:
        return len(self.content) + (len(json.dumps(self.tool_args, sort_keys=True)) if self.tool_args else 0)

    def to_json(self) -> dict:
        d: dict = {"role": self.role, "content": self.content}
        if self.tool_name is not None:
            d["tool_name"] = self.tool_name
        if self.tool_args is not None:
            d["tool_args"] = self.tool_args
        if self.call_id is not None:
            d["call_id"] = self.call_id
        return d

    @classmethod
    def from_json(cls, d: dict) -> Turn:
        return cls(d["role"], d.get("content", ""), d.get("tool_name"), d.get("tool_args"), d.get("call_id"))


@dataclass
class AgentTranscript:
    key: str = ""
    turns: list[Turn] = field(default_factory=list)

    @property
    def token_estimate(self) -> int:
        return sum(t.size() for t in self.turns) // 4

    def append(self, turn: Turn) -> None:
        if turn.role == "tool":
            prev = self.turns[-1] if self.turns else None
            if prev is None or prev.role not in ("assistant", "tool"):
                raise ValueError("a tool turn must follow the assistant turn that requested it")
        self.turns.append(turn)

    def to_json(self) -> dict:
        return {"key": self.key, "token_estimate": self.token_estimate,
                "turns": [t.to_json() for t in self.turns]}

    @classmethod
    def from_json(cls, d: dict) -> AgentTranscript:
        if not isinstance(d, dict) or "turns" not in d or not d["turns"]:
            raise TranscriptFormatError("transcript has no turns")
        return cls(d.get("key", ""), [Turn.from_json(t) for t in d["turns"]])


def record_transcript(t: AgentTranscript, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(t.to_json(), indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def load_transcript(path: str | Path) -> AgentTranscript:
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        raise TranscriptFormatError(f"{path}: empty transcript file")
    try:
        return AgentTranscript.from_json(json.loads(text))
    except json.JSONDecodeError as exc:
        raise TranscriptFormatError(f"{path}: {exc}") from exc


def decision_key(template_id: str, current: FunctionId, remaining: tuple[str, ...]) -> str:
    h = hashlib.sha1()
    for part in (template_id, str(current), *remaining):
        h.update(part.encode())
        h.update(b"\x01")
    return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# endpoints
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ToolCall:
    call_id: str
    name: str
    args: dict


@dataclass(frozen=True)
class Reply:
    content: str = ""
    tool_calls: tuple[ToolCall, ...] = ()


class Endpoint(Protocol):
    def complete(self, turns: list[Turn], tools: list[dict]) -> Reply: ...


def _to_messages(turns: list[Turn]) -> list[dict]:
    msgs: list[dict] = []
    for t in turns:
        if t.role == "assistant" and t.tool_name is not None:
            call = {"id": t.call_id, "type": "function",
                    "function": {"name": t.tool_name, "arguments": json.dumps(t.tool_args or {})}}
            if msgs and msgs[-1]["role"] == "assistant" and msgs[-1].get("tool_calls"):
                msgs[-1]["tool_calls"].append(call)
            else:
                msgs.append({"role": "assistant", "content": t.content or None, "tool_calls": [call]})
        elif t.role == "tool":
            msgs.append({"role": "tool", "tool_call_id": t.call_id, "content": t.content})
        else:
            msgs.append({"role": t.role, "content": t.content})
    return msgs


class HttpEndpoint:
    """Chat-completions client over urllib with retry and an in-flight cap."""

    def __init__(self, cfg: EndpointConfig, opener: Callable | None = None, sleep: Callable = time.sleep) -> None:
        self.cfg = cfg
        self._open = opener or urllib.request.urlopen
        self._sleep = sleep
        self._gate = threading.BoundedSemaphore(cfg.max_in_flight)

    def _request(self, body: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.cfg.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        req = urllib.request.Request(self.cfg.base_url.rstrip("/") + "/chat/completions",
                                     data=json.dumps(body).encode(), headers=headers, method="POST")
        last: Exception | None = None
        for attempt in range(self.cfg.max_retries + 1):
            try:
                with self._gate:
                    with self._open(req, timeout=self.cfg.timeout) as resp:
                        return json.loads(resp.read().decode())
            except urllib.error.HTTPError as exc:
                if exc.code < 500 and exc.code != 429:
                    raise EndpointError(f"endpoint rejected request: HTTP {exc.code}") from exc
                last = exc
            except (urllib.error.URLError, TimeoutError, OSError) as exc:
                last = exc
            if attempt < self.cfg.max_retries:
                self._sleep(self.cfg.backoff * (2 ** attempt))
        raise EndpointError(f"endpoint unreachable after {self.cfg.max_retries + 1} attempts: {last}")

    def complete(self, turns: list[Turn], tools: list[dict]) -> Reply:
        data = self._request({"model": self.cfg.model, "temperature": 0,
                              "messages": _to_messages(turns), "tools": tools})
        try:
            msg = data["choices"][0]["message"]
        except (KeyError, IndexError, TypeError) as exc:
            raise LLMError(f"unexpected endpoint response: {str(data)[:200]}") from exc
        calls = []
        for c in msg.get("tool_calls") or ():
            fn = c.get("function", {})
            try:
                args = json.loads(fn.get("arguments") or "{}")
            except json.JSONDecodeError:
                args = {"_raw": fn.get("arguments")}
            calls.append(ToolCall(c.get("id", ""), fn.get("name", ""), args))
        return Reply(msg.get("content") or "", tuple(calls))


def _reply_from_turns(turns: list[Turn]) -> Reply:
    calls = tuple(ToolCall(t.call_id or "", t.tool_name or "", t.tool_args or {}) for t in turns if t.tool_name)
    return Reply(turns[0].content, calls)


class ReplayEndpoint:
    """Serves the assistant turns of a recorded transcript in order.

    Every request must carry exactly the recorded non-assistant turns so
    far; the first difference raises :class:`ReplayMismatch`.
    """

    def __init__(self, transcript: AgentTranscript) -> None:
        self.transcript = transcript
        self.pos = 0

    def complete(self, turns: list[Turn], tools: list[dict]) -> Reply:
        rec = self.transcript.turns
        for i, t in enumerate(turns):
            if i >= len(rec) or rec[i] != t:
                want = rec[i].to_json() if i < len(rec) else "end of transcript"
                raise ReplayMismatch(f"transcript {self.transcript.key}: turn {i} differs: "
                                     f"recorded {str(want)[:160]}, got {str(t.to_json())[:160]}")
        j = len(turns)
        if j >= len(rec) or rec[j].role != "assistant":
            raise ReplayMismatch(f"transcript {self.transcript.key}: turn {j} differs: "
                                 "no recorded assistant reply at this point")
        out = []
        while j < len(rec) and rec[j].role == "assistant":
            out.append(rec[j])
            j += 1
            if not out[-1].tool_name:
                break
        return _reply_from_turns(out)


PolicyFn = Callable[[dict, list[Turn]], Reply]


class PolicyEndpoint:
    """A local stand-in agent: ``policy(context, turns)`` produces each reply.

    ``context`` is the machine-readable block embedded in the system prompt.
    """

    def __init__(self, policy: PolicyFn) -> None:
        self.policy = policy

    def complete(self, turns: list[Turn], tools: list[dict]) -> Reply:
        return self.policy(parse_context(turns[0].content), turns)


# ---------------------------------------------------------------------------
# prompt and tools
# ---------------------------------------------------------------------------

TOOL_SCHEMAS = [
    {"type": "function", "function": {
        "name": "view_callee_closure",
        "description": "List the callees of a function whose reachable error strings match the "
                       "still-unexplained log text, with the depth at which each string is found.",
        "parameters": {"type": "object", "properties": {"function": {"type": "string"}},
                       "required": ["function"]}}},
    {"type": "function", "function": {
        "name": "check_function_code",
        "description": "Return the full source code of a function in the candidate scope.",
        "parameters": {"type": "object", "properties": {"function": {"type": "string"}},
                       "required": ["function"]}}},
    {"type": "function", "function": {
        "name": "fuzzy_search_in_closure",
        "description": "Fuzzy-search all string constants in the corpus for a keyword, e.g. an RPC "
                       "endpoint name, to bridge calls the static call graph cannot follow.",
        "parameters": {"type": "object", "properties": {"keyword": {"type": "string"}},
                       "required": ["keyword"]}}},
]

_CONTEXT_MARK = "CONTEXT: "

PROMPT = """You are tracing an error through a Go code base, one call at a time, the way an \
on-call engineer would. The error was logged as the template below. Each function on the path \
wrapped the error with its own text before returning it, so the log reads outermost wrap first.

Log template: {template}
Still unexplained: {remaining}
Current function: {current}

Source of the current function:
```go
{source}
```

Use the tools to decide which callee(s) of the current function produced the unexplained text. \
When you are done, reply with only a JSON object:
{{"chosen": [function ids], "stop": bool, "confidence": number in [0,1], "evidence": string, \
"terminal_reason": null or one of {reasons}}}
Set "stop" to true when the current function itself originates the error (origin-constant-found) or \
the text comes from code outside the corpus (external-boundary).
"""


def build_prompt(current: FunctionId, template: LogTemplate, remaining: tuple[str, ...], source: str) -> str:
    ctx = {"template": template.template_id, "current": str(current), "remaining": render_tokens(remaining)}
    body = PROMPT.format(template=template.text, remaining=render_tokens(remaining), current=current,
                         source=source, reasons=", ".join(r for r in TERMINAL_REASONS if r != "depth-limit"))
    return body + "\n" + _CONTEXT_MARK + json.dumps(ctx, sort_keys=True)


def parse_context(prompt: str) -> dict:
    for line in reversed(prompt.splitlines()):
        if line.startswith(_CONTEXT_MARK):
            return json.loads(line[len(_CONTEXT_MARK):])
    return {}


def run_tool(tools: ToolSet, name: str, args: dict) -> str:
    try:
        if name == "view_callee_closure":
            views = tools.view_callee_closure(FunctionId.parse(str(args["function"])))
            return json.dumps([v.to_json() for v in views], sort_keys=True)
        if name == "check_function_code":
            return tools.check_function_code(FunctionId.parse(str(args["function"])))
        if name == "fuzzy_search_in_closure":
            hits = tools.fuzzy_search_in_closure(str(args["keyword"]))[:20]
            return json.dumps([{"function": str(h.function), "constant": h.constant.raw,
                                "score": round(h.score, 4)} for h in hits], sort_keys=True)
    except (NotFoundError, KeyError, ValueError) as exc:
        return f"error: {exc}"
    return f"error: unknown tool {name!r}"


def parse_final(content: str, offered: set[str]) -> Decision:
    """Validate a final JSON answer; raises ValueError with the reason."""
    text = content.strip()
    if text.startswith("```"):
        text = text.strip("`")
        text = text[text.find("{"):]
    start, end = text.find("{"), text.rfind("}")
    if start < 0 or end < start:
        raise ValueError("no JSON object in reply")
    try:
        d = json.loads(text[start:end + 1])
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed JSON: {exc}") from exc
    chosen = d.get("chosen") or []
    if not isinstance(chosen, list) or not all(isinstance(c, str) for c in chosen):
        raise ValueError("'chosen' must be a list of function ids")
    stray = [c for c in chosen if c not in offered]
    if stray:
        raise ValueError(f"chosen {stray} not among offered callees {sorted(offered)}")
    stop = bool(d.get("stop", False))
    reason = d.get("terminal_reason")
    if stop and reason not in TERMINAL_REASONS:
        raise ValueError("stop=true needs a terminal_reason")
    if not stop and not chosen:
        raise ValueError("choose at least one callee or stop")
    try:
        conf = float(d.get("confidence", 0.5))
    except (TypeError, ValueError):
        raise ValueError("confidence must be a number") from None
    ev = str(d.get("evidence") or "").strip() or "no rationale given"
    return Decision(tuple(sorted(FunctionId.parse(c) for c in chosen)) if not stop else (), stop,
                    reason if stop else None, ev, max(0.0, min(1.0, conf)))


# ---------------------------------------------------------------------------
# the disambiguator
# ---------------------------------------------------------------------------


class LLMDisambiguator:
    name = "llm"
    ranking = "confidence"

    def __init__(self, cfg: EndpointConfig | None = None, endpoint: Endpoint | None = None,
                 record_dir: str | Path | None = None, replay_dir: str | Path | None = None,
                 fallback: Disambiguator | None = None) -> None:
        self.cfg = cfg or EndpointConfig()
        if endpoint is None and replay_dir is None:
            endpoint = HttpEndpoint(self.cfg)
        self.endpoint = endpoint
        self.record_dir = Path(record_dir) if record_dir else None
        self.replay_dir = Path(replay_dir) if replay_dir else None
        self.fallback = fallback
        self.tool_calls = 0

    def _endpoint_for(self, key: str) -> Endpoint:
        if self.replay_dir is not None:
            path = self.replay_dir / f"{key}.json"
            if not path.exists():
                raise ReplayMismatch(f"no recorded transcript {path.name} for this decision")
            return ReplayEndpoint(load_transcript(path))
        assert self.endpoint is not None
        return self.endpoint

    def decide(self, current, template, remaining, tools, anchor_line=None) -> Decision:
        key = decision_key(template.template_id, current, remaining)
        try:
            return self._loop(key, current, template, remaining, tools)
        except EndpointError as exc:
            if self.fallback is None:
                raise
            dec = self.fallback.decide(current, template, remaining, tools, anchor_line)
            return Decision(dec.chosen, dec.stop, dec.terminal_reason,
                            f"model unavailable ({exc}); heuristic fallback: {dec.evidence}",
                            dec.confidence, dec.origin_constant, dec.external)

    def _save(self, tr: AgentTranscript) -> None:
        if self.record_dir is not None:
            record_transcript(tr, self.record_dir / f"{tr.key}.json")

    def _loop(self, key, current, template, remaining, tools) -> Decision:
        endpoint = self._endpoint_for(key)
        source = tools.ctx.index.records[current].source_text
        tr = AgentTranscript(key, [Turn("system", build_prompt(current, template, remaining, source))])
        offered = {str(v.callee) for v in tools.view_callee_closure(current)}
        calls = 0
        reprompted = False
        while True:
            reply = endpoint.complete(list(tr.turns), TOOL_SCHEMAS)
            if reply.tool_calls:
                for i, c in enumerate(reply.tool_calls):
                    tr.append(Turn("assistant", reply.content if i == 0 else "", c.name, c.args, c.call_id))
                for c in reply.tool_calls:
                    calls += 1
                    if calls > self.cfg.max_tool_calls:
                        self._save(tr)
                        raise BudgetExhausted(f"budget exhausted: more than {self.cfg.max_tool_calls} "
                                              f"tool calls deciding at {current}")
                    tr.append(Turn("tool", run_tool(tools, c.name, c.args), c.name, None, c.call_id))
                    self.tool_calls += 1
                continue
            tr.append(Turn("assistant", reply.content))
            try:
                dec = parse_final(reply.content, offered)
            except ValueError as exc:
                if reprompted:
                    self._save(tr)
                    raise LLMError(f"invalid final answer after reprompt: {exc}") from exc
                reprompted = True
                tr.append(Turn("system", f"Your answer was rejected: {exc}. Reply with only the JSON object."))
                continue
            self._save(tr)
            return dec


# ---------------------------------------------------------------------------
# scripted agents used to produce recordings offline
# ---------------------------------------------------------------------------


def _tool_results(turns: list[Turn]) -> list[Turn]:
    return [t for t in turns if t.role == "tool"]


def final_reply(chosen=(), stop=False, reason=None, confidence=1.0, evidence="") -> Reply:
    return Reply(json.dumps({"chosen": [str(c) for c in chosen], "stop": stop, "confidence": confidence,
                             "evidence": evidence, "terminal_reason": reason}, sort_keys=True))


def _next_hop(paths: dict[str, list[list[str]]], template: str, current: str) -> tuple[str | None, bool]:
    """The known successor of ``current`` and whether ``current`` ends a path."""
    for seq in paths.get(template, []):
        if current in seq:
            i = seq.index(current)
            return (seq[i + 1], False) if i + 1 < len(seq) else (None, True)
    return None, False


def path_following_policy(paths: dict[str, list[list[str]]], terminal: dict[str, str] | None = None,
                          max_reads: int = 4) -> PolicyFn:
    """An agent that knows the right path for each template.

    It views the callee closure first. When more than one callee is
    offered it reads the code of up to ``max_reads`` of them, the known
    next hop plus the shallowest rivals, and then names the known next hop.
    ``paths`` maps template id to accepted function sequences.
    """
    terminal = terminal or {}

    def policy(ctx: dict, turns: list[Turn]) -> Reply:
        current = ctx["current"]
        results = _tool_results(turns)
        if not results:
            return Reply("", (ToolCall("c0", "view_callee_closure", {"function": current}),))
        views = json.loads(results[0].content) if results[0].content.startswith("[") else []
        offered = [v["callee"] for v in views]
        nxt, last = _next_hop(paths, ctx["template"], current)
        if len(offered) > 1 and len(results) == 1:
            depth = {v["callee"]: min((c["depth"] for c in v["constants"]), default=0) for v in views}
            rivals = sorted((f for f in offered if f != nxt), key=lambda f: (depth[f], f))
            reads = ([nxt] if nxt in offered else []) + rivals
            return Reply("", tuple(ToolCall(f"c{i + 1}", "check_function_code", {"function": f})
                                   for i, f in enumerate(sorted(reads[:max_reads]))))
        if nxt is not None and nxt in offered:
            return final_reply([nxt], evidence=f"{nxt} is the callee that returns this error text "
                               "after reading the candidates' code")
        if last:
            reason = terminal.get(ctx["template"], "origin-constant-found")
            return final_reply(stop=True, reason=reason, evidence="the error starts here")
        return final_reply(stop=True, reason="exhausted", evidence="no callee fits")

    return policy
