"""Configuration objects shared across the pipeline.

Config files are TOML. Recognized sections::

    [sinks]
    error_create = "errors.New, fmt.Errorf, pkgerrors.Wrap, pkgerrors.Wrapf"
    log = "log.Error, log.Errorf, logger.Error, logger.Errorf, log.Fatal"
    rpc_register = "*.Handle, *.HandleFunc, *.Register"

    [drain]
    depth = 4
    sim = 0.5
    max_children = 100

    [closure]
    depth = 3

    [trace]
    backend = "heuristic"
    max_hops = 12

    [llm]
    endpoint = "http://localhost:8000/v1"
    model = "my-model"
    api_key_env = "ERRTRACE_LLM_KEY"
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

DEFAULT_ERROR_CREATE = ("errors.New", "fmt.Errorf", "pkgerrors.Wrap", "pkgerrors.Wrapf")
DEFAULT_LOG = ("log.Error", "log.Errorf", "logger.Error", "logger.Errorf", "log.Fatal")
DEFAULT_RPC_REGISTER = ("*.Handle", "*.HandleFunc", "*.Register", "*.RegisterHandler")
# Calls whose string argument is forwarded to the enclosing call unchanged.
DEFAULT_TRANSPARENT = ("fmt.Sprintf",)


class ConfigError(ValueError):
    pass


def _split_patterns(value: str | list[str] | tuple[str, ...]) -> tuple[str, ...]:
    if isinstance(value, str):
        items = value.split(",")
    else:
        items = list(value)
    return tuple(p.strip() for p in items if p.strip())


def pattern_matches(pattern: str, name: str) -> bool:
    """Match a qualified callee name against ``pkg.Fn`` / ``pkg.*`` / ``*.Fn``.

    ``*`` is only meaningful as a whole segment. A pattern with fewer
    segments than ``name`` is matched against the trailing segments.
    """
    p_parts = pattern.split(".")
    n_parts = name.split(".")
    if len(n_parts) < len(p_parts):
        return False
    n_parts = n_parts[len(n_parts) - len(p_parts):]
    return all(p == "*" or p == n for p, n in zip(p_parts, n_parts))


@dataclass(frozen=True)
class SinkConfig:
    error_create: tuple[str, ...] = DEFAULT_ERROR_CREATE
    log: tuple[str, ...] = DEFAULT_LOG
    rpc_register: tuple[str, ...] = DEFAULT_RPC_REGISTER
    transparent: tuple[str, ...] = DEFAULT_TRANSPARENT

    def is_error_create(self, callee: str) -> bool:
        return any(pattern_matches(p, callee) for p in self.error_create)

    def is_log(self, callee: str) -> bool:
        return any(pattern_matches(p, callee) for p in self.log)

    def is_sink(self, callee: str) -> bool:
        return self.is_error_create(callee) or self.is_log(callee)

    def is_rpc_register(self, callee: str) -> bool:
        return any(pattern_matches(p, callee) for p in self.rpc_register)

    def is_transparent(self, callee: str) -> bool:
        return any(pattern_matches(p, callee) for p in self.transparent)

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> SinkConfig:
        kwargs = {}
        for key in ("error_create", "log", "rpc_register", "transparent"):
            if key in data:
                kwargs[key] = _split_patterns(data[key])
        unknown = set(data) - {"error_create", "log", "rpc_register", "transparent"}
        if unknown:
            raise ConfigError(f"unknown sinks keys: {sorted(unknown)}")
        return cls(**kwargs)


@dataclass(frozen=True)
class DrainConfig:
    depth: int = 4
    sim: float = 0.5
    max_children: int = 100

    def __post_init__(self) -> None:
        if self.depth < 3:
            raise ConfigError("drain depth must be >= 3")
        if not 0.0 <= self.sim <= 1.0:
            raise ConfigError("drain similarity threshold must be in [0, 1]")
        if self.max_children < 1:
            raise ConfigError("drain max_children must be >= 1")


@dataclass
class RunConfig:
    """Everything a CLI run may need; file values are overridden by flags."""

    roots: list[Path] = field(default_factory=list)
    index_path: Path | None = None
    log_path: Path | None = None
    sinks: SinkConfig = field(default_factory=SinkConfig)
    drain: DrainConfig = field(default_factory=DrainConfig)
    closure_depth: int = 3
    backend: str = "heuristic"
    max_hops: int = 12
    llm: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.closure_depth < 0:
            raise ConfigError("closure depth must be >= 0")
        if self.max_hops < 0:
            raise ConfigError("max_hops must be >= 0")


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    cfg = RunConfig()
    if "sinks" in data:
        cfg.sinks = SinkConfig.from_mapping(data["sinks"])
    if "drain" in data:
        cfg.drain = DrainConfig(**data["drain"])
    if "closure" in data:
        cfg.closure_depth = int(data["closure"].get("depth", cfg.closure_depth))
    trace = data.get("trace", {})
    cfg.backend = trace.get("backend", cfg.backend)
    cfg.max_hops = int(trace.get("max_hops", cfg.max_hops))
    cfg.llm = dict(data.get("llm", {}))
    if "roots" in data:
        cfg.roots = [Path(p) for p in data["roots"]]
    cfg.__post_init__()
    return cfg
