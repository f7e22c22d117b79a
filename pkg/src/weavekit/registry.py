"""Tool capability declarations and the conversion registry.

Each tool declares what it consumes and produces as (modality, format)
pairs, plus static cost and per-precision memory estimates the planner and
policy engine treat as resource hints. Costs are declarations, not
measurements, so planning stays deterministic.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import ConflictError, NotFoundError, ValidationError
from .media import Pair, is_legal_pair

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - py310 path
    import tomli as tomllib

KINDS = ("compose", "engrave", "synthesize", "analyze", "enrich", "convert")
BACKENDS = ("builtin", "mock", "http")
PRECISIONS = ("int4", "int8", "fp16")


@dataclass(frozen=True)
class ToolSpec:
    id: str
    inputs: tuple[Pair, ...]
    output: Pair
    cost_estimate: int  # abstract milliseconds at fp16
    mem_estimate_mb: dict  # precision -> MB, monotone int4 <= int8 <= fp16
    kind: str
    backend: str = "builtin"
    endpoint: str | None = None
    supports_batching: bool = False


def validate_spec(spec: ToolSpec) -> list[str]:
    """Return every invariant violation; an empty list means the spec is valid."""
    diags: list[str] = []
    if not spec.id or not isinstance(spec.id, str):
        diags.append("tool id must be a non-empty string")
    if not spec.inputs:
        diags.append("tool must consume at least one modality")
    for pair in spec.inputs:
        if not is_legal_pair(*pair):
            diags.append(f"illegal input pair {pair}")
    if not is_legal_pair(*spec.output):
        diags.append(f"illegal output pair {spec.output}")
    if spec.cost_estimate <= 0:
        diags.append("cost_estimate must be positive")
    missing = [p for p in PRECISIONS if p not in spec.mem_estimate_mb]
    if missing:
        diags.append(f"mem_estimate_mb missing precisions {missing}")
    else:
        est = spec.mem_estimate_mb
        if not (0 < est["int4"] <= est["int8"] <= est["fp16"]):
            diags.append("mem estimates must satisfy 0 < int4 <= int8 <= fp16")
    if spec.kind not in KINDS:
        diags.append(f"unknown tool kind {spec.kind!r}")
    if spec.backend not in BACKENDS:
        diags.append(f"unknown backend {spec.backend!r}")
    if spec.backend == "http" and not spec.endpoint:
        diags.append("http backend requires an endpoint URL")
    if spec.backend != "http" and spec.endpoint:
        diags.append("endpoint only allowed for http backend")
    return diags


class ToolRegistry:
    """Write-rare/read-often registry; registration is serialized."""

    def __init__(self):
        self._lock = threading.Lock()
        self._tools: dict[str, ToolSpec] = {}

    def register_tool(self, spec: ToolSpec) -> str:
        diags = validate_spec(spec)
        if diags:
            raise ValidationError("; ".join(diags))
        with self._lock:
            if spec.id in self._tools:
                raise ConflictError(f"tool id {spec.id!r} already registered")
            self._tools[spec.id] = spec
        return spec.id

    def get(self, tool_id: str) -> ToolSpec:
        spec = self._tools.get(tool_id)
        if spec is None:
            raise NotFoundError(f"unknown tool {tool_id}")
        return spec

    def __contains__(self, tool_id: str) -> bool:
        return tool_id in self._tools

    def __len__(self) -> int:
        return len(self._tools)

    def list_tools(self) -> list[ToolSpec]:
        return [self._tools[tool_id] for tool_id in sorted(self._tools)]

    def find_converters(self, from_pair: Pair, to_pair: Pair) -> list[str]:
        """Single-hop matches only; chaining converters is the planner's job."""
        from_pair = tuple(from_pair)
        to_pair = tuple(to_pair)
        return sorted(
            tool_id
            for tool_id, spec in self._tools.items()
            if from_pair in spec.inputs and spec.output == to_pair
        )


# Builtin capability table mirroring the enrich/compose/engrave/convert/
# synthesize/analyze roles. Costs are abstract milliseconds at fp16.
_BUILTIN_SPECS = (
    ToolSpec(
        id="enrich.text",
        inputs=(("text", "plain"),),
        output=("text", "plain"),
        cost_estimate=300,
        mem_estimate_mb={"int4": 1200, "int8": 2200, "fp16": 4200},
        kind="enrich",
    ),
    ToolSpec(
        id="compose.abc",
        inputs=(("text", "plain"),),
        output=("symbolic", "abc"),
        cost_estimate=900,
        mem_estimate_mb={"int4": 2600, "int8": 4800, "fp16": 9000},
        kind="compose",
        backend="mock",
    ),
    ToolSpec(
        id="engrave.svg",
        inputs=(("symbolic", "abc"),),
        output=("image", "svg"),
        cost_estimate=250,
        mem_estimate_mb={"int4": 64, "int8": 64, "fp16": 64},
        kind="engrave",
    ),
    ToolSpec(
        id="convert.abc2midi",
        inputs=(("symbolic", "abc"),),
        output=("symbolic", "smf"),
        cost_estimate=120,
        mem_estimate_mb={"int4": 32, "int8": 32, "fp16": 32},
        kind="convert",
    ),
    ToolSpec(
        id="synth.midi2wav",
        inputs=(("symbolic", "smf"),),
        output=("audio", "wav"),
        cost_estimate=400,
        mem_estimate_mb={"int4": 128, "int8": 160, "fp16": 256},
        kind="synthesize",
    ),
    ToolSpec(
        id="analyze.abc",
        inputs=(("symbolic", "abc"),),
        output=("report", "json"),
        cost_estimate=200,
        mem_estimate_mb={"int4": 48, "int8": 48, "fp16": 48},
        kind="analyze",
        supports_batching=True,
    ),
)


def default_registry(mode: str = "local", remote_base_url: str | None = None) -> ToolRegistry:
    """Registry with the six builtin tools.

    In hosted mode the model-backed tools (compose, enrich) point at HTTP
    endpoints under remote_base_url; the deterministic converters stay
    builtin in both modes. Tool ids, types, and costs are identical across
    modes so plans are too.
    """
    registry = ToolRegistry()
    if mode == "hosted":
        base = remote_base_url or os.environ.get("WEAVE_REMOTE_URL")
        if not base:
            raise ValidationError("hosted mode needs a remote base URL (WEAVE_REMOTE_URL)")
        base = base.rstrip("/")
    for spec in _BUILTIN_SPECS:
        if mode == "hosted" and spec.kind in ("compose", "enrich"):
            spec = replace(spec, backend="http", endpoint=f"{base}/tools/{spec.id}")
        registry.register_tool(spec)
    return registry


def load_tools_file(path: str | Path, registry: ToolRegistry | None = None) -> ToolRegistry:
    """Bootstrap a registry from a tools.toml file (schema in docs/wire.md)."""
    registry = registry or ToolRegistry()
    data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    for entry in data.get("tool", []):
        try:
            spec = ToolSpec(
                id=entry["id"],
                inputs=tuple((m, f) for m, f in entry["inputs"]),
                output=tuple(entry["output"]),
                cost_estimate=int(entry["cost_estimate"]),
                mem_estimate_mb=dict(entry["mem_estimate_mb"]),
                kind=entry["kind"],
                backend=entry.get("backend", "builtin"),
                endpoint=entry.get("endpoint"),
                supports_batching=bool(entry.get("supports_batching", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed tool entry in {path}: {exc}") from exc
        registry.register_tool(spec)
    return registry
