"""Token-level frontend for a Go-style subset.

Recognizes package clauses, imports, top-level function and method
declarations, call expressions and string literals. Everything else is
skipped token by token, so the scanner tolerates most real Go files even
though it only understands a small part of the grammar.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .config import SinkConfig

__all__ = [
    "CallSite",
    "Diagnostic",
    "FrontendError",
    "FunctionId",
    "FunctionRecord",
    "ParseResult",
    "SourceFile",
    "StringConstant",
    "classify_string",
    "format_pieces",
    "parse_corpus",
    "parse_file",
    "parse_format_fragments",
    "read_corpus",
    "wrap_gap_for",
]


class FrontendError(Exception):
    """A file could not be tokenized or its braces do not balance."""

    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FunctionId:
    package: str
    receiver: str | None
    name: str

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("function name must be non-empty")

    def __str__(self) -> str:
        if self.receiver:
            return f"{self.package}.({self.receiver}).{self.name}"
        return f"{self.package}.{self.name}"

    def __lt__(self, other: FunctionId) -> bool:
        return str(self) < str(other)

    @classmethod
    def parse(cls, text: str) -> FunctionId:
        m = re.fullmatch(r"([^.()]+)\.\(([^()]+)\)\.([^.()]+)", text)
        if m:
            return cls(m.group(1), m.group(2), m.group(3))
        pkg, sep, name = text.rpartition(".")
        if not sep or not pkg:
            raise ValueError(f"not a function id: {text!r}")
        return cls(pkg, None, name)


@dataclass(frozen=True)
class SourceFile:
    path: str
    package: str
    text: str

    @classmethod
    def from_text(cls, path: str, text: str) -> SourceFile:
        m = re.search(r"^\s*package\s+([A-Za-z_]\w*)", text, re.MULTILINE)
        return cls(path=path, package=m.group(1) if m else "", text=text)


@dataclass(frozen=True)
class CallSite:
    callee_name: str
    arg_count: int
    line: int
    kind: str  # "direct" | "method" | "dynamic-hint"
    package: str | None = None  # resolved qualifier package for direct calls
    is_async: bool = False  # launched with a ``go`` statement
    first_string: str | None = None

    def __post_init__(self) -> None:
        if not self.callee_name:
            raise ValueError("callee_name must be non-empty")

    @property
    def method_name(self) -> str:
        return self.callee_name.rsplit(".", 1)[-1]

    def to_json(self) -> dict:
        d = {"callee": self.callee_name, "args": self.arg_count, "line": self.line, "kind": self.kind}
        if self.package is not None:
            d["package"] = self.package
        if self.is_async:
            d["async"] = True
        if self.first_string is not None:
            d["first_string"] = self.first_string
        return d

    @classmethod
    def from_json(cls, d: dict) -> CallSite:
        return cls(d["callee"], d["args"], d["line"], d["kind"], d.get("package"),
                   d.get("async", False), d.get("first_string"))


@dataclass(frozen=True)
class StringConstant:
    raw: str
    kind: str  # "format" | "literal"
    fragments: tuple[str, ...]
    sink: str  # "error-create" | "log" | "plain"
    line: int
    # Index into ``fragments`` where the wrapped error's text is rendered;
    # None when the constant does not carry an inner error.
    wrap_gap: int | None = None
    callee: str | None = None

    @property
    def wraps(self) -> bool:
        return self.wrap_gap is not None

    def to_json(self) -> dict:
        d = {"raw": self.raw, "kind": self.kind, "fragments": list(self.fragments),
             "sink": self.sink, "line": self.line}
        if self.wrap_gap is not None:
            d["wrap_gap"] = self.wrap_gap
        if self.callee is not None:
            d["callee"] = self.callee
        return d

    @classmethod
    def from_json(cls, d: dict) -> StringConstant:
        return cls(d["raw"], d["kind"], tuple(d["fragments"]), d["sink"], d["line"],
                   d.get("wrap_gap"), d.get("callee"))


@dataclass(frozen=True)
class FunctionRecord:
    id: FunctionId
    file: str
    line_start: int
    line_end: int
    calls: tuple[CallSite, ...]
    constants: tuple[StringConstant, ...]
    source_text: str
    param_count: int = 0
    variadic: bool = False

    def to_json(self) -> dict:
        return {
            "id": str(self.id),
            "file": self.file,
            "line_start": self.line_start,
            "line_end": self.line_end,
            "params": self.param_count,
            "variadic": self.variadic,
            "calls": [c.to_json() for c in self.calls],
            "constants": [c.to_json() for c in self.constants],
            "source": self.source_text,
        }

    @classmethod
    def from_json(cls, d: dict) -> FunctionRecord:
        return cls(
            id=FunctionId.parse(d["id"]),
            file=d["file"],
            line_start=d["line_start"],
            line_end=d["line_end"],
            calls=tuple(CallSite.from_json(c) for c in d["calls"]),
            constants=tuple(StringConstant.from_json(c) for c in d["constants"]),
            source_text=d["source"],
            param_count=d.get("params", 0),
            variadic=d.get("variadic", False),
        )


@dataclass(frozen=True)
class Diagnostic:
    path: str
    line: int
    message: str

    def __str__(self) -> str:
        return f"{self.path}:{self.line}: {self.message}"


@dataclass
class ParseResult:
    records: list[FunctionRecord] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Format strings
# ---------------------------------------------------------------------------

_VERB_RE = re.compile(r"%%|%[-+# 0]*(?:\d+|\*)?(?:\.(?:\d+|\*)?)?[wvsdqxXftcbeEgGoOUTp]")


def format_pieces(raw: str) -> list[tuple[str, str]]:
    """Split ``raw`` into ``("text", s)`` and ``("verb", v)`` pieces.

    ``%%`` is folded into the surrounding text as a literal ``%``.
    """
    pieces: list[tuple[str, str]] = []
    buf: list[str] = []
    pos = 0
    for m in _VERB_RE.finditer(raw):
        buf.append(raw[pos:m.start()])
        if m.group() == "%%":
            buf.append("%")
        else:
            pieces.append(("text", "".join(buf)))
            buf = []
            pieces.append(("verb", m.group()))
        pos = m.end()
    buf.append(raw[pos:])
    pieces.append(("text", "".join(buf)))
    return pieces


def parse_format_fragments(raw: str) -> list[str]:
    return [s.strip() for kind, s in format_pieces(raw) if kind == "text" and s.strip()]


def _has_verb(raw: str) -> bool:
    return any(kind == "verb" for kind, _ in format_pieces(raw))


def _gap_index(raw: str, verb_ordinal: int) -> int:
    """Number of non-empty fragments preceding the ``verb_ordinal``-th verb."""
    seen = 0
    count = 0
    for kind, s in format_pieces(raw):
        if kind == "verb":
            if seen == verb_ordinal:
                return count
            seen += 1
        elif s.strip():
            count += 1
    raise IndexError(verb_ordinal)


_ERRISH_RE = re.compile(r"(?i)^[\w.]*err[\w.]*(\(\))?$|^[\w.]+\.Error\(\)$")


def _is_errorish(arg_text: str) -> bool:
    return bool(_ERRISH_RE.match(arg_text)) and not arg_text.startswith('"')


def wrap_gap_for(raw: str, string_arg: int, args: list[str]) -> int | None:
    """Where the inner error's text lands when ``raw`` is rendered.

    ``args`` are the source texts of the sink call's arguments and
    ``string_arg`` the index of ``raw`` among them. Format verbs consume the
    arguments that follow the format string. ``%w`` always marks the wrap;
    otherwise the last verb bound to an error-looking argument does. An
    error argument outside the format's verb list (``Wrap(err, "msg")``,
    ``log.Error("msg: ", err)``) renders after the text.
    """
    verbs = [v for kind, v in format_pieces(raw) if kind == "verb"]
    for i, v in enumerate(verbs):
        if v.endswith("w"):
            return _gap_index(raw, i)
    bound = args[string_arg + 1:string_arg + 1 + len(verbs)]
    chosen = None
    for i, a in enumerate(bound):
        if _is_errorish(a):
            chosen = i
    if chosen is not None:
        return _gap_index(raw, chosen)
    others = args[:string_arg] + args[string_arg + 1 + len(verbs):]
    if any(_is_errorish(a) for a in others):
        if verbs:
            return len(parse_format_fragments(raw))
        return 1 if raw.strip() else 0
    return None


def classify_string(raw: str, context_callee: str | None, sinks: SinkConfig,
                    line: int = 0) -> StringConstant:
    if context_callee and sinks.is_error_create(context_callee):
        sink = "error-create"
    elif context_callee and sinks.is_log(context_callee):
        sink = "log"
    else:
        sink = "plain"
    if _has_verb(raw):
        return StringConstant(raw, "format", tuple(parse_format_fragments(raw)), sink, line,
                              callee=context_callee)
    frag = raw.strip()
    return StringConstant(raw, "literal", (frag,) if frag else (), sink, line, callee=context_callee)


# ---------------------------------------------------------------------------
# Scanner
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str  # ident | string | number | rune | op
    value: str
    line: int
    start: int
    end: int


_OPS = sorted(
    ["<<=", ">>=", "&^=", "...", ":=", "<-", "++", "--", "==", "!=", "<=", ">=", "&&", "||",
     "<<", ">>", "&^", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^="],
    key=len, reverse=True,
)
_SIMPLE_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", '"': '"', "'": "'",
                   "a": "\a", "b": "\b", "f": "\f", "v": "\v"}


def _decode_escapes(body: str, line: int) -> str:
    out: list[str] = []
    i = 0
    while i < len(body):
        c = body[i]
        if c != "\\":
            out.append(c)
            i += 1
            continue
        nxt = body[i + 1] if i + 1 < len(body) else ""
        if nxt in _SIMPLE_ESCAPES:
            out.append(_SIMPLE_ESCAPES[nxt])
            i += 2
        elif nxt == "x":
            out.append(chr(int(body[i + 2:i + 4], 16)))
            i += 4
        elif nxt == "u":
            out.append(chr(int(body[i + 2:i + 6], 16)))
            i += 6
        elif nxt == "U":
            out.append(chr(int(body[i + 2:i + 10], 16)))
            i += 10
        elif nxt.isdigit():
            out.append(chr(int(body[i + 1:i + 4], 8)))
            i += 4
        else:
            raise FrontendError(f"bad escape sequence \\{nxt}", line)
    return "".join(out)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    line = 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            i += 1
        elif c in " \t\r\f\v":
            i += 1
        elif text.startswith("//", i):
            j = text.find("\n", i)
            i = n if j < 0 else j
        elif text.startswith("/*", i):
            j = text.find("*/", i + 2)
            if j < 0:
                raise FrontendError("unterminated block comment", line)
            line += text.count("\n", i, j)
            i = j + 2
        elif c == "`":
            j = text.find("`", i + 1)
            if j < 0:
                raise FrontendError("unterminated raw string", line)
            tokens.append(Token("string", text[i + 1:j].replace("\r", ""), line, i, j + 1))
            line += text.count("\n", i, j)
            i = j + 1
        elif c in "\"'":
            j = i + 1
            while j < n and text[j] != c:
                if text[j] == "\n":
                    raise FrontendError("unterminated string literal", line)
                j += 2 if text[j] == "\\" else 1
            if j >= n:
                raise FrontendError("unterminated string literal", line)
            body = text[i + 1:j]
            kind = "string" if c == '"' else "rune"
            tokens.append(Token(kind, _decode_escapes(body, line), line, i, j + 1))
            i = j + 1
        elif c.isalpha() or c == "_" or ord(c) > 127:
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_" or ord(text[j]) > 127):
                j += 1
            tokens.append(Token("ident", text[i:j], line, i, j))
            i = j
        elif c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] in "._"):
                j += 1
            tokens.append(Token("number", text[i:j], line, i, j))
            i = j
        else:
            for op in _OPS:
                if text.startswith(op, i):
                    tokens.append(Token("op", op, line, i, i + len(op)))
                    i += len(op)
                    break
            else:
                tokens.append(Token("op", c, line, i, i + 1))
                i += 1
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_KEYWORDS = frozenset(
    "break case chan const continue default defer else fallthrough for func go goto if "
    "import interface map package range return select struct switch type var".split()
)
_BUILTINS = frozenset(
    "append cap clear close complex copy delete imag len make max min new panic print println "
    "real recover string int int8 int16 int32 int64 uint uint8 uint16 uint32 uint64 uintptr "
    "float32 float64 complex64 complex128 byte rune bool error any".split()
)
_OPEN = {"(": ")", "[": "]", "{": "}"}
_ENDPOINT_RE = re.compile(r"^/?[A-Za-z_][\w-]*(?:[./][A-Za-z_][\w-]*)*[./][A-Z]\w*$")


def looks_like_endpoint(s: str) -> bool:
    return bool(_ENDPOINT_RE.match(s))


def _check_balance(tokens: list[Token]) -> None:
    stack: list[Token] = []
    for t in tokens:
        if t.kind != "op":
            continue
        if t.value in _OPEN:
            stack.append(t)
        elif t.value in (")", "]", "}"):
            if not stack or _OPEN[stack[-1].value] != t.value:
                raise FrontendError(f"unbalanced {t.value!r}", t.line)
            stack.pop()
    if stack:
        raise FrontendError(f"unclosed {stack[-1].value!r}", stack[-1].line)


def _match_close(tokens: list[Token], i: int) -> int:
    """Index of the bracket closing the one at ``tokens[i]``."""
    depth = 0
    for j in range(i, len(tokens)):
        t = tokens[j]
        if t.kind != "op":
            continue
        if t.value in _OPEN:
            depth += 1
        elif t.value in (")", "]", "}"):
            depth -= 1
            if depth == 0:
                return j
    raise FrontendError("unclosed bracket", tokens[i].line)


def _parse_imports(tokens: list[Token], i: int, imports: dict[str, str]) -> int:
    def one(j: int) -> int:
        alias = None
        if tokens[j].kind == "ident" or (tokens[j].kind == "op" and tokens[j].value == "."):
            alias = tokens[j].value
            j += 1
        if j < len(tokens) and tokens[j].kind == "string":
            path = tokens[j].value
            name = path.rstrip("/").rsplit("/", 1)[-1]
            if alias not in ("_", "."):
                imports[alias or name] = name
            j += 1
        return j

    i += 1
    if i < len(tokens) and tokens[i].value == "(":
        close = _match_close(tokens, i)
        j = i + 1
        while j < close:
            if tokens[j].value == ";":
                j += 1
                continue
            nj = one(j)
            j = nj if nj > j else j + 1
        return close + 1
    return one(i)


def _count_params(tokens: list[Token], open_i: int, close_i: int) -> tuple[int, bool]:
    if close_i == open_i + 1:
        return 0, False
    count = 1
    depth = 0
    variadic = False
    last_comma = False
    for t in tokens[open_i + 1:close_i]:
        last_comma = False
        if t.kind == "op":
            if t.value in _OPEN:
                depth += 1
            elif t.value in (")", "]", "}"):
                depth -= 1
            elif t.value == "," and depth == 0:
                count += 1
                last_comma = True
            elif t.value == "..." and depth == 0:
                variadic = True
    if last_comma:
        count -= 1
    return count, variadic


class _CallCtx:
    __slots__ = ("site_index", "callee", "open_i", "arg_starts", "strings")

    def __init__(self, site_index: int, callee: str, open_i: int) -> None:
        self.site_index = site_index
        self.callee = callee
        self.open_i = open_i
        self.arg_starts = [open_i + 1]
        # (constant index, argument index) for strings whose innermost call is this one
        self.strings: list[tuple[int, int]] = []


def _analyze_body(tokens: list[Token], lo: int, hi: int, imports: dict[str, str],
                  text: str, sinks: SinkConfig) -> tuple[list[CallSite], list[StringConstant]]:
    """Collect call sites and classified string constants from tokens[lo:hi]."""
    sites: list[dict] = []
    consts: list[dict] = []
    stack: list[tuple[str, _CallCtx | None]] = []
    local_strings: dict[str, int] = {}
    pending_var_uses: list[tuple[int, str, _CallCtx, int]] = []

    def innermost_call() -> _CallCtx | None:
        for kind, ctx in reversed(stack):
            if kind == "call":
                assert ctx is not None
                if sinks.is_transparent(ctx.callee):
                    continue
                return ctx
            if kind != "paren":
                return None
        return None

    def arg_index(ctx: _CallCtx) -> int:
        return len(ctx.arg_starts) - 1

    def finalize(ctx: _CallCtx, close_i: int) -> None:
        args: list[str] = []
        bounds = ctx.arg_starts + [close_i + 1]
        for a, b in zip(bounds, bounds[1:]):
            seg = tokens[a:b - 1]
            args.append(_render(seg, text))
        if args and args[-1] == "":
            args.pop()
        site = sites[ctx.site_index]
        site["args"] = len(args)
        site["arg_texts"] = args
        first_i = ctx.arg_starts[0]
        if args and bounds[1] - 1 - first_i == 1 and tokens[first_i].kind == "string":
            site["first_string"] = tokens[first_i].value
        is_sink = sinks.is_sink(ctx.callee)
        for ci, ai in ctx.strings:
            c = consts[ci]
            c["callee"] = ctx.callee
            if is_sink:
                c["wrap_gap"] = wrap_gap_for(c["raw"], ai, args)
        # one-step local variable propagation into sink calls
        if is_sink:
            for ai, a in enumerate(args):
                if a in local_strings:
                    ci = local_strings[a]
                    if consts[ci]["callee"] is None or not sinks.is_sink(consts[ci]["callee"]):
                        consts[ci]["callee"] = ctx.callee
                        consts[ci]["wrap_gap"] = wrap_gap_for(consts[ci]["raw"], ai, args)

    i = lo
    while i < hi:
        t = tokens[i]
        if t.kind == "ident" and i + 1 < hi and tokens[i + 1].value == "(" and t.value not in _KEYWORDS:
            prev = tokens[i - 1] if i > lo else None
            qualifier = None
            start = i
            if prev is not None and prev.value == ".":
                pp = tokens[i - 2] if i - 2 >= lo else None
                if pp is not None and pp.kind == "ident":
                    qualifier = pp.value
                    start = i - 2
                else:
                    qualifier = "_"
                    start = i - 1
            if qualifier is None and t.value in _BUILTINS:
                stack.append(("paren", None))
                i += 2
                continue
            before = tokens[start - 1] if start > lo else None
            # skip the qualifier chain back to its head for `go a.b.c()`
            k = start
            while k - 2 >= lo and tokens[k - 1].value == "." and tokens[k - 2].kind == "ident":
                k -= 2
            before = tokens[k - 1] if k > lo else None
            is_async = before is not None and before.value == "go"
            if qualifier is None:
                name, kind, pkg = t.value, "direct", None
            elif qualifier in imports and (start == k):
                name, kind, pkg = f"{qualifier}.{t.value}", "direct", imports[qualifier]
            else:
                name, kind, pkg = f"{qualifier}.{t.value}", "method", None
            sites.append({"callee": name, "kind": kind, "package": pkg, "line": t.line,
                          "async": is_async, "args": 0, "first_string": None})
            stack.append(("call", _CallCtx(len(sites) - 1, name, i + 1)))
            i += 2
            continue
        if t.kind == "op":
            v = t.value
            if v == "(":
                stack.append(("paren", None))
            elif v in ("[", "{"):
                stack.append(("bracket" if v == "[" else "brace", None))
            elif v in (")", "]", "}"):
                if stack:
                    kind, ctx = stack.pop()
                    if kind == "call":
                        assert ctx is not None
                        finalize(ctx, i)
            elif v == "," and stack and stack[-1][0] == "call":
                ctx = stack[-1][1]
                assert ctx is not None
                ctx.arg_starts.append(i + 1)
        elif t.kind == "string":
            ctx = innermost_call()
            consts.append({"raw": t.value, "line": t.line, "callee": None, "wrap_gap": None})
            ci = len(consts) - 1
            if ctx is not None:
                ctx.strings.append((ci, arg_index(ctx)))
            else:
                # `name := "..."` / `name = "..."` / `const name = "..."`
                if i - 2 >= lo and tokens[i - 1].value in (":=", "=") and tokens[i - 2].kind == "ident":
                    nxt = tokens[i + 1] if i + 1 < hi else None
                    if nxt is None or nxt.value not in ("+", ".", "["):
                        local_strings[tokens[i - 2].value] = ci
        i += 1

    call_sites = []
    for s in sites:
        kind = s["kind"]
        fs = s["first_string"]
        if (fs is not None and looks_like_endpoint(fs) and not sinks.is_sink(s["callee"])
                and not sinks.is_rpc_register(s["callee"]) and not sinks.is_transparent(s["callee"])):
            kind = "dynamic-hint"
        call_sites.append(CallSite(s["callee"], s["args"], s["line"], kind, s["package"],
                                   s["async"], fs))
    constants = []
    for c in consts:
        if not c["raw"].strip():
            continue
        sc = classify_string(c["raw"], c["callee"], sinks, c["line"])
        if sc.sink != "plain" and c["wrap_gap"] is not None:
            sc = StringConstant(sc.raw, sc.kind, sc.fragments, sc.sink, sc.line, c["wrap_gap"], sc.callee)
        constants.append(sc)
    return call_sites, constants


def _render(seg: list[Token], text: str) -> str:
    if not seg:
        return ""
    return text[seg[0].start:seg[-1].end].strip()


def _skip_results(tokens: list[Token], i: int) -> int | None:
    """Advance from after the parameter list to the body's ``{``; None if bodiless."""
    depth = 0
    n = len(tokens)
    while i < n:
        t = tokens[i]
        if t.kind == "ident" and depth == 0 and t.value in ("func", "type", "var", "const", "import"):
            if t.value != "func" or (i + 1 < n and tokens[i + 1].value != "("):
                return None
        if t.kind == "ident" and t.value in ("interface", "struct") and i + 1 < n and tokens[i + 1].value == "{":
            i = _match_close(tokens, i + 1) + 1
            continue
        if t.kind == "op":
            if t.value in ("(", "["):
                depth += 1
            elif t.value in (")", "]"):
                depth -= 1
            elif t.value == "{" and depth == 0:
                return i
            elif t.value == "}" and depth == 0:
                return None
        i += 1
    return None


def parse_file(src: SourceFile, sinks: SinkConfig | None = None) -> list[FunctionRecord]:
    """Parse one file; raises FrontendError if it is malformed."""
    sinks = sinks or SinkConfig()
    text = src.text
    tokens = tokenize(text)
    _check_balance(tokens)
    package = src.package
    imports: dict[str, str] = {}
    records: list[FunctionRecord] = []
    n = len(tokens)
    i = 0
    while i < n:
        t = tokens[i]
        if t.kind == "ident" and t.value == "package" and i + 1 < n:
            package = tokens[i + 1].value
            i += 2
            continue
        if t.kind == "ident" and t.value == "import":
            i = _parse_imports(tokens, i, imports)
            continue
        if t.kind == "ident" and t.value == "func":
            rec, i = _parse_func(tokens, i, package, imports, src, sinks)
            if rec is not None:
                records.append(rec)
            continue
        if t.kind == "op" and t.value in _OPEN:
            i = _match_close(tokens, i) + 1
            continue
        i += 1
    return records


def _parse_func(tokens: list[Token], i: int, package: str, imports: dict[str, str],
                src: SourceFile, sinks: SinkConfig) -> tuple[FunctionRecord | None, int]:
    func_tok = tokens[i]
    j = i + 1
    receiver = None
    if j < len(tokens) and tokens[j].value == "(":
        close = _match_close(tokens, j)
        idents = [t.value for t in tokens[j + 1:close] if t.kind == "ident"]
        receiver = idents[-1] if idents else None
        j = close + 1
    if j >= len(tokens) or tokens[j].kind != "ident":
        return None, j
    name = tokens[j].value
    j += 1
    if j < len(tokens) and tokens[j].value == "[":  # type parameters
        j = _match_close(tokens, j) + 1
    if j >= len(tokens) or tokens[j].value != "(":
        return None, j
    pclose = _match_close(tokens, j)
    params, variadic = _count_params(tokens, j, pclose)
    body_open = _skip_results(tokens, pclose + 1)
    if body_open is None:
        return None, pclose + 1
    body_close = _match_close(tokens, body_open)
    calls, constants = _analyze_body(tokens, body_open + 1, body_close, imports, src.text, sinks)
    rec = FunctionRecord(
        id=FunctionId(package, receiver, name),
        file=src.path,
        line_start=func_tok.line,
        line_end=tokens[body_close].line,
        calls=tuple(calls),
        constants=tuple(constants),
        source_text=src.text[func_tok.start:tokens[body_close].end],
        param_count=params,
        variadic=variadic,
    )
    return rec, body_close + 1


def parse_function_text(text: str, package: str = "p", sinks: SinkConfig | None = None,
                        imports: Iterable[str] = ()) -> list[FunctionRecord]:
    """Parse bare function source (no package clause) in isolation."""
    header = f"package {package}\n" + "".join(f'import "{p}"\n' for p in imports)
    return parse_file(SourceFile("<isolated>", package, header + text), sinks)


def parse_corpus(files: list[SourceFile], sinks: SinkConfig | None = None) -> ParseResult:
    """Parse every file; malformed files become diagnostics and are skipped."""
    sinks = sinks or SinkConfig()
    result = ParseResult()
    for src in sorted(files, key=lambda f: f.path):
        try:
            result.records.extend(parse_file(src, sinks))
        except FrontendError as exc:
            result.diagnostics.append(Diagnostic(src.path, exc.line, str(exc)))
    return result


def iter_go_files(root: Path) -> Iterator[Path]:
    yield from sorted(p for p in root.rglob("*.go") if p.is_file())


def read_corpus(roots: Iterable[str | Path]) -> list[SourceFile]:
    """Read every ``*.go`` file under the given roots.

    Paths are made relative to their root and prefixed with the root's
    directory name when more than one root is given.
    """
    roots = [Path(r) for r in roots]
    files = []
    for root in roots:
        for p in iter_go_files(root):
            rel = p.relative_to(root).as_posix()
            if len(roots) > 1:
                rel = f"{root.name}/{rel}"
            files.append(SourceFile.from_text(rel, p.read_text(encoding="utf-8")))
    return files
