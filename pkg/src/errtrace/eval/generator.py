"""Synthetic Go-subset corpora with known error propagation paths.

Each injected error is a chain of functions: an origin that creates the
error, zero or more callers that wrap it with their own text, and a
logging function at the top. Log lines are produced by evaluating that
wrap chain, so the ground truth is exact by construction. Filler
functions with their own error strings (and method names shared with
chain methods) add the call-graph breadth that a real code base has.
"""

from __future__ import annotations

import json
import random
import re
import shutil
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

DEFAULT_HOPS = {0: 0.078, 1: 0.40, 2: 0.316, 3: 0.118, 4: 0.049, 5: 0.039}
MODULE = "example.com/corp"

VERBS = ["load", "fetch", "parse", "sync", "validate", "resolve", "update", "commit", "decode",
         "encode", "render", "schedule", "allocate", "release", "register", "refresh", "publish",
         "consume", "index", "archive", "restore", "migrate", "verify", "authorize", "compute",
         "dispatch", "replicate", "compact", "flush", "lock"]
ADJS = ["cached", "remote", "pending", "primary", "stale", "signed", "partial", "default", "shared",
        "local", "nested", "legacy", "active", "frozen", "hidden", "mutable", "sorted", "draft",
        "global", "temporary"]
NOUNS = ["quota", "ledger", "manifest", "invoice", "session", "token", "snapshot", "tenant", "bucket",
         "policy", "schema", "cursor", "profile", "payload", "segment", "channel", "replica", "voucher",
         "catalog", "account", "webhook", "shard", "journal", "credential", "cluster", "widget", "lease",
         "route", "artifact", "mailbox"]
PACKAGES = ["billing", "storage", "identity", "catalog", "shipping", "metrics", "gateway", "search",
            "payments", "inventory", "notify", "audit"]
METHODS = ["Check", "Apply", "Prepare", "Execute", "Open", "Reserve"]

WRAP_FORMS = ["failed to {v} {a} {n}: %w", "could not {v} {a} {n}: %w", "unable to {v} {a} {n}: %w",
              "{v} {a} {n}: %w"]
ORIGIN_FORMS = ["{a} {n} rejected during {v} for %s", "invalid {a} {n} on {v} %s",
                "{n} {v} refused: {a} limit reached for %s"]
ORIGIN_LITERALS = ["no {a} {n} available to {v}", "{a} {n} is not ready to {v}"]
LOG_FORMS = ["{v} {a} {n} handler failed: %v", "error while serving {a} {n} {v}: %v",
             "{n} worker stopped, {v} {a}: %v"]
LOG_AT_SOURCE = ["{v} {a} {n} aborted for %s", "cannot {v} {a} {n} for %s"]

GENERIC_WRAPS = ["operation failed: %w", "request failed: %w", "internal error: %w", "unexpected failure: %w"]
GENERIC_ORIGINS = ["operation failed", "request failed", "internal error", "unexpected failure"]


class SpecError(ValueError):
    pass


class GeneratorError(RuntimeError):
    pass


@dataclass(frozen=True)
class CorpusSpec:
    seed: int = 0
    n_errors: int = 102
    n_functions: int = 600
    n_packages: int = 6
    wrap_density: float = 1.0
    ambiguity_rate: float = 0.0
    rpc_rate: float = 0.0
    channel_rate: float = 0.0
    method_rate: float = 0.3
    messages_per_error: int = 2
    hop_distribution: dict[int, float] = field(default_factory=lambda: dict(DEFAULT_HOPS))

    def __post_init__(self) -> None:
        for name in ("wrap_density", "ambiguity_rate", "rpc_rate", "channel_rate", "method_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SpecError(f"{name} must be in [0, 1], got {v}")
        if not self.hop_distribution:
            raise SpecError("hop_distribution is empty")
        if any(int(h) < 0 or w < 0 for h, w in self.hop_distribution.items()):
            raise SpecError("hop counts and weights must be non-negative")
        if abs(sum(self.hop_distribution.values()) - 1.0) > 1e-6:
            raise SpecError("hop_distribution weights must sum to 1")
        if self.n_errors < 1 or self.messages_per_error < 1:
            raise SpecError("need at least one error and one message per error")
        if not 1 <= self.n_packages <= len(PACKAGES):
            raise SpecError(f"n_packages must be in [1, {len(PACKAGES)}]")

    def effective_weights(self) -> dict[int, float]:
        """Hop weights after ``wrap_density`` moves mass toward zero hops."""
        w = {int(h): float(v) for h, v in self.hop_distribution.items()}
        d = self.wrap_density
        out = {h: v * d for h, v in w.items() if h != 0}
        out[0] = w.get(0, 0.0) + (1.0 - d) * (1.0 - w.get(0, 0.0))
        return dict(sorted(out.items()))

    def hop_counts(self) -> dict[int, int]:
        """Largest-remainder apportionment of ``n_errors`` over the weights."""
        w = self.effective_weights()
        quotas = {h: v * self.n_errors for h, v in w.items()}
        counts = {h: int(q) for h, q in quotas.items()}
        left = self.n_errors - sum(counts.values())
        order = sorted(w, key=lambda h: (-(quotas[h] - counts[h]), h))
        for h in order[:left]:
            counts[h] += 1
        return counts

    def to_json(self) -> dict:
        d = asdict(self)
        d["hop_distribution"] = {str(k): v for k, v in sorted(self.hop_distribution.items())}
        return d

    @classmethod
    def from_mapping(cls, d: dict) -> CorpusSpec:
        d = dict(d.get("corpus", d))
        if "hop_distribution" in d:
            d["hop_distribution"] = {int(k): float(v) for k, v in d["hop_distribution"].items()}
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise SpecError(f"unknown spec keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> CorpusSpec:
        with open(path, "rb") as fh:
            return cls.from_mapping(tomllib.load(fh))


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


@dataclass
class _Fn:
    pkg: str
    name: str
    role: str  # logger | wrap | origin | filler
    text: str = ""
    literal: bool = False  # origin built with errors.New
    receiver: str | None = None
    chan_param: bool = False  # signature (id string, errChan chan error)
    endpoint: str | None = None  # RPC name this function serves
    children: list[tuple[_Fn, str]] = field(default_factory=list)  # (callee, link)
    noise: list[_Fn] = field(default_factory=list)
    log_text: str = ""  # 0-hop loggers that create and log
    file: str = ""
    log_line: int = 0

    @property
    def fid(self) -> str:
        if self.receiver:
            return f"{self.pkg}.({self.receiver}).{self.name}"
        return f"{self.pkg}.{self.name}"


@dataclass
class GroundTruthEntry:
    error_id: int
    log_file: str
    log_line: int
    messages: list[str]
    emitter: str
    path: list[str]
    hop_count: int
    links: list[str]
    chain: list[dict]  # origin first: {"function", "format", "args"}
    ambiguous: bool = False
    decoys: list[str] = field(default_factory=list)
    terminal_reason: str = "origin-constant-found"

    @property
    def key(self) -> str:
        return f"{self.log_file}:{self.log_line}"

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> GroundTruthEntry:
        return cls(**d)


@dataclass
class GroundTruth:
    spec: dict
    errors: list[GroundTruthEntry]

    def by_key(self) -> dict[str, GroundTruthEntry]:
        return {e.key: e for e in self.errors}

    def to_json(self) -> dict:
        return {"spec": self.spec, "errors": [e.to_json() for e in self.errors]}

    @classmethod
    def from_json(cls, d: dict) -> GroundTruth:
        return cls(d.get("spec", {}), [GroundTruthEntry.from_json(e) for e in d["errors"]])

    @classmethod
    def load(cls, path: str | Path) -> GroundTruth:
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class GeneratedCorpus:
    files: dict[str, str]  # path relative to the source root -> text
    logs: list[dict]
    truth: GroundTruth

    def write(self, out: str | Path) -> Path:
        out = Path(out)
        src = out / "src"
        if src.exists():
            shutil.rmtree(src)
        for rel, text in sorted(self.files.items()):
            p = src / rel
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(text, encoding="utf-8")
        with open(out / "logs.jsonl", "w", encoding="utf-8") as fh:
            for rec in self.logs:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        (out / "truth.json").write_text(json.dumps(self.truth.to_json(), indent=1, sort_keys=True) + "\n",
                                        encoding="utf-8")
        return src


# ---------------------------------------------------------------------------
# rendering helpers
# ---------------------------------------------------------------------------

_VERB = re.compile(r"%[svwd]")


def go_sprintf(fmt: str, args: list[str]) -> str:
    """The subset of Go formatting the generator emits (%s %v %w %d)."""
    it = iter(args)

    def sub(m: re.Match) -> str:
        try:
            return str(next(it))
        except StopIteration:
            raise GeneratorError(f"too few arguments for {fmt!r}") from None

    return _VERB.sub(sub, fmt)


def render_chain(chain: list[dict]) -> str:
    """Evaluate a wrap chain (origin first) to the logged message."""
    inner = None
    for step in chain:
        args = [inner if a == "<err>" else a for a in step["args"]]
        inner = go_sprintf(step["format"], args)
    assert inner is not None
    return inner


def _camel(*words: str) -> str:
    return "".join(w[:1].upper() + w[1:] for w in words)


class _Names:
    def __init__(self, rng: random.Random) -> None:
        self.rng = rng
        combos = [(v, a, n) for v in VERBS for a in ADJS for n in NOUNS]
        rng.shuffle(combos)
        self.combos = combos
        self.counter = 0

    def combo(self) -> tuple[str, str, str]:
        if not self.combos:
            raise SpecError("vocabulary exhausted; lower n_functions")
        return self.combos.pop()

    def phrase(self, forms: list[str]) -> str:
        v, a, n = self.combo()
        return self.rng.choice(forms).format(v=v, a=a, n=n)

    def func_name(self) -> str:
        self.counter += 1
        v, n = self.rng.choice(VERBS), self.rng.choice(NOUNS)
        return f"{_camel(v, n)}{self.counter}"

    def type_name(self) -> str:
        self.counter += 1
        return f"{_camel(self.rng.choice(ADJS), self.rng.choice(NOUNS))}Store{self.counter}"


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------


def generate_corpus(spec: CorpusSpec) -> GeneratedCorpus:
    rng = random.Random(spec.seed)
    names = _Names(rng)
    pkgs = PACKAGES[:spec.n_packages]
    counts = spec.hop_counts()
    hops = [h for h in sorted(counts) for _ in range(counts[h])]
    rng.shuffle(hops)

    eligible = [i for i, h in enumerate(hops) if h >= 1]
    n_amb = round(spec.ambiguity_rate * len(eligible))
    ambiguous = set(rng.sample(eligible, n_amb)) if n_amb else set()
    needed = sum(h + 1 for h in hops) + len(ambiguous)
    if needed > spec.n_functions:
        raise SpecError(f"spec needs {needed} chain functions but n_functions={spec.n_functions}")

    def new_fn(role: str, method_ok: bool = False) -> _Fn:
        fn = _Fn(rng.choice(pkgs), names.func_name(), role)
        if method_ok and rng.random() < spec.method_rate:
            fn.receiver = names.type_name()
            fn.name = rng.choice(METHODS)
        return fn

    all_fns: list[_Fn] = []
    chains: list[dict] = []
    for eid, h in enumerate(hops):
        logger = new_fn("logger")
        path = [logger]
        links: list[str] = []
        amb_pos = None
        if eid in ambiguous:
            amb_pos = rng.randint(1, h)
        for pos in range(1, h + 1):
            role = "origin" if pos == h else "wrap"
            parent = path[-1]
            r = rng.random()
            link = "call"
            if pos != amb_pos and pos - 1 != amb_pos:
                if r < spec.rpc_rate:
                    link = "rpc"
                elif r < spec.rpc_rate + spec.channel_rate and not parent.chan_param:
                    link = "channel"
            fn = new_fn(role, method_ok=(link == "call" and pos != amb_pos))
            if link == "rpc":
                fn.endpoint = f"{fn.pkg}.{fn.name}"
            if link == "channel":
                fn.chan_param = True
            parent.children.append((fn, link))
            path.append(fn)
            links.append("dynamic-bridge" if link == "rpc" else "call-edge")
        decoys = []
        # texts
        if h == 0:
            if rng.random() < 0.5:
                logger.text = names.phrase(LOG_AT_SOURCE)
            else:
                logger.text = names.phrase(ORIGIN_FORMS)
                logger.log_text = names.phrase(LOG_FORMS)
        else:
            logger.text = names.phrase(LOG_FORMS)
        for pos in range(1, h + 1):
            fn = path[pos]
            generic = pos == amb_pos
            if fn.role == "origin":
                if generic:
                    fn.text, fn.literal = rng.choice(GENERIC_ORIGINS), True
                elif rng.random() < 0.3:
                    fn.text, fn.literal = names.phrase(ORIGIN_LITERALS), True
                else:
                    fn.text = names.phrase(ORIGIN_FORMS)
            else:
                fn.text = rng.choice(GENERIC_WRAPS) if generic else names.phrase(WRAP_FORMS)
        if amb_pos is not None:
            x = path[amb_pos]
            parent = path[amb_pos - 1]
            d = _Fn(rng.choice(pkgs), names.func_name(), x.role, x.text, x.literal)
            d.children = list(x.children)
            parent.children.append((d, "call"))
            decoys.append(d)
        all_fns.extend(path)
        all_fns.extend(decoys)
        chains.append({"id": eid, "path": path, "links": links, "decoys": decoys, "ambiguous": amb_pos is not None})

    n_fill = spec.n_functions - len(all_fns)
    fillers = [new_fn("filler", method_ok=True) for _ in range(n_fill)]
    for i, f in enumerate(fillers):
        f.text = names.phrase(WRAP_FORMS)
        later = fillers[i + 1:]
        for g in rng.sample(later, min(len(later), rng.choice([0, 0, 1, 2]))):
            f.children.append((g, "call"))
        if not f.children:
            f.text = names.phrase(ORIGIN_FORMS)
            f.role = "origin"
    if fillers:
        for fn in all_fns:
            if fn.role in ("wrap", "origin", "logger") and rng.random() < 0.6:
                fn.noise = rng.sample(fillers, min(len(fillers), rng.choice([1, 2])))
    all_fns.extend(fillers)

    files = _emit(all_fns, pkgs, rng)
    _check_unique(chains, all_fns)
    logs, entries = _logs_and_truth(chains, rng, spec)
    return GeneratedCorpus(files, logs, GroundTruth(spec.to_json(), entries))


# ---------------------------------------------------------------------------
# source emission
# ---------------------------------------------------------------------------


class _FileBuf:
    def __init__(self, pkg: str, path: str) -> None:
        self.pkg = pkg
        self.path = path
        self.body: list[str] = []
        self.imports: set[str] = set()


def _q(s: str) -> str:
    return json.dumps(s)


def _call_expr(caller: _Fn, callee: _Fn, buf: _FileBuf, lines: list[str], var: str) -> str:
    """Emit any setup lines and return the expression that calls ``callee``."""
    qual = ""
    if callee.pkg != caller.pkg:
        qual = callee.pkg + "."
        buf.imports.add(f"{MODULE}/{callee.pkg}")
    if callee.receiver:
        lines.append(f"\t{var} := &{qual}{callee.receiver}{{}}")
        return f"{var}.{callee.name}(id)"
    return f"{qual}{callee.name}(id)"


def _emit_fn(fn: _Fn, buf: _FileBuf) -> list[str]:
    sig_ret = "" if fn.role == "logger" or fn.chan_param else " error"
    params = "id string, errChan chan error" if fn.chan_param else "id string"
    recv = f"(s *{fn.receiver}) " if fn.receiver else ""
    lines = [f"func {recv}{fn.name}({params}){sig_ret} {{"]
    if fn.endpoint:
        lines.append(f"\trpcServer.Handle({_q(fn.endpoint)})")
    for i, n in enumerate(fn.noise):
        expr = _call_expr(fn, n, buf, lines, f"n{i}")
        lines.append(f"\t_ = {expr}")

    def raise_err(err_expr: str) -> list[str]:
        if fn.chan_param:
            return [f"\t\terrChan <- {err_expr}", "\t\treturn"]
        return [f"\t\treturn {err_expr}"]

    if not fn.children:
        if fn.role == "logger":
            buf.imports.add("log")
            lines.append("\tif len(id) > 0 {")
            if fn.log_text:
                buf.imports.add("fmt")
                lines.append(f"\t\terr := fmt.Errorf({_q(fn.text)}, id)")
                lines.append(f"\t\tlog.Errorf({_q(fn.log_text)}, err)")
            else:
                lines.append(f"\t\tlog.Errorf({_q(fn.text)}, id)")
            fn.log_line = len(lines)
            lines.append("\t}")
        else:
            lines.append("\tif len(id) > 0 {")
            if fn.literal:
                buf.imports.add("errors")
                lines.extend(raise_err(f"errors.New({_q(fn.text)})"))
            else:
                buf.imports.add("fmt")
                lines.extend(raise_err(f"fmt.Errorf({_q(fn.text)}, id)"))
            lines.append("\t}")
    else:
        for j, (child, link) in enumerate(fn.children):
            if link == "channel":
                lines.append(f"\terrChan{j} := make(chan error, 1)")
                qual = ""
                if child.pkg != fn.pkg:
                    qual = child.pkg + "."
                    buf.imports.add(f"{MODULE}/{child.pkg}")
                lines.append(f"\tgo {qual}{child.name}(id, errChan{j})")
                lines.append(f"\tif err := <-errChan{j}; err != nil {{")
            elif link == "rpc":
                lines.append(f"\tif err := rpcClient.Call({_q(child.endpoint or '')}, id); err != nil {{")
            else:
                pre: list[str] = []
                expr = _call_expr(fn, child, buf, pre, f"c{j}")
                lines.extend(pre)
                lines.append(f"\tif err := {expr}; err != nil {{")
            if fn.role == "logger":
                buf.imports.add("log")
                lines.append(f"\t\tlog.Errorf({_q(fn.text)}, err)")
                if fn.log_line <= 0:
                    fn.log_line = len(lines)
            else:
                buf.imports.add("fmt")
                lines.extend(raise_err(f"fmt.Errorf({_q(fn.text)}, err)"))
            lines.append("\t}")
    if fn.chan_param:
        lines.append("\terrChan <- nil")
    elif fn.role != "logger":
        lines.append("\treturn nil")
    lines.append("}")
    return lines


def _emit(fns: list[_Fn], pkgs: list[str], rng: random.Random, per_file: int = 24) -> dict[str, str]:
    by_pkg: dict[str, list[_Fn]] = {p: [] for p in pkgs}
    for fn in fns:
        by_pkg[fn.pkg].append(fn)
    out: dict[str, str] = {}
    for pkg in pkgs:
        members = by_pkg[pkg]
        for k in range(0, max(len(members), 1), per_file):
            chunk = members[k:k + per_file]
            buf = _FileBuf(pkg, f"{pkg}/{pkg}_{k // per_file}.go")
            bodies = []
            for fn in chunk:
                if fn.receiver:
                    bodies.append([f"type {fn.receiver} struct{{}}"])
                bodies.append(_emit_fn(fn, buf))
                fn.file = buf.path
            header = [f"package {pkg}", ""]
            if buf.imports:
                header.append("import (")
                header.extend(f"\t{_q(i)}" for i in sorted(buf.imports))
                header.append(")")
                header.append("")
            lines = header
            fn_iter = iter(fn for fn in chunk)
            current = None
            for block in bodies:
                if block[0].startswith("func "):
                    current = next(fn_iter)
                    if current.log_line > 0:
                        # 1-based line of the log call: block offset + index
                        current.log_line = len(lines) + current.log_line
                lines.extend(block)
                lines.append("")
            out[buf.path] = "\n".join(lines)
    return out


# ---------------------------------------------------------------------------
# logs and ground truth
# ---------------------------------------------------------------------------


def _own_texts(fn: _Fn) -> list[str]:
    out = [fn.text] if fn.text else []
    if fn.log_text:
        out.append(fn.log_text)
    return out


def _fragments(fmt: str) -> list[str]:
    return [p.strip() for p in _VERB.split(fmt) if p.strip()]


def _check_unique(chains: list[dict], fns: list[_Fn]) -> None:
    """No constant outside an error's own chain may occur in its messages."""
    probe = {}
    for ch in chains:
        own = {id(f) for f in ch["path"]} | {id(d) for d in ch["decoys"]}
        probe[ch["id"]] = own
    texts = [(fn, t) for fn in fns for t in _own_texts(fn) if t not in GENERIC_WRAPS and t not in GENERIC_ORIGINS]
    chain_text = {}
    for ch in chains:
        sample = render_chain(_chain_steps(ch["path"], "x-0"))
        chain_text[ch["id"]] = sample
    for ch in chains:
        msg = chain_text[ch["id"]]
        for fn, t in texts:
            if id(fn) in probe[ch["id"]]:
                continue
            frags = _fragments(t)
            if frags and all(f in msg for f in frags):
                raise GeneratorError(f"constant {t!r} of {fn.fid} collides with error {ch['id']}")


def _chain_steps(path: list[_Fn], ident: str) -> list[dict]:
    steps = []
    for fn in reversed(path):
        if not steps:
            if fn.role == "logger" and fn.log_text:
                steps.append({"function": fn.fid, "format": fn.text, "args": [ident]})
                steps.append({"function": fn.fid, "format": fn.log_text, "args": ["<err>"]})
            elif fn.literal:
                steps.append({"function": fn.fid, "format": fn.text, "args": []})
            else:
                steps.append({"function": fn.fid, "format": fn.text, "args": [ident]})
        else:
            steps.append({"function": fn.fid, "format": fn.text, "args": ["<err>"]})
    return steps


def _logs_and_truth(chains: list[dict], rng: random.Random, spec: CorpusSpec):
    logs: list[dict] = []
    entries: list[GroundTruthEntry] = []
    for ch in chains:
        path: list[_Fn] = ch["path"]
        logger = path[0]
        noun = rng.choice(NOUNS)
        msgs = []
        chain = None
        for _ in range(spec.messages_per_error):
            ident = f"{noun}-{rng.getrandbits(16):04x}"
            chain = _chain_steps(path, ident)
            msgs.append(render_chain(chain))
        for m in msgs:
            logs.append({"msg": m, "level": "error", "file": logger.file, "line": logger.log_line,
                         "ts": f"2026-01-01T00:{len(logs) // 60 % 60:02d}:{len(logs) % 60:02d}Z"})
        if rng.random() < 0.2:
            logs.append({"msg": f"{noun} request served", "level": "info", "file": logger.file,
                         "line": max(logger.log_line - 1, 1)})
        assert chain is not None
        entries.append(GroundTruthEntry(
            error_id=ch["id"], log_file=logger.file, log_line=logger.log_line, messages=msgs,
            emitter=logger.fid, path=[f.fid for f in path], hop_count=len(path) - 1,
            links=ch["links"], chain=chain, ambiguous=ch["ambiguous"],
            decoys=[d.fid for d in ch["decoys"]]))
    return logs, entries
