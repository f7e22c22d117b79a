"""Backend invocation: builtin symbolic ops, deterministic mocks, HTTP remotes.

Every backend honors the same contract: an Invocation in, an
InvocationResult out, never an exception for ordinary failure. The hub
routes by the tool's declared backend, enforces the timeout, and counts
backend calls so cache behavior is observable in tests.
"""

from __future__ import annotations

import base64
import concurrent.futures
import os
import time
from dataclasses import dataclass, field

import httpx

from .config import Config
from .errors import NotFoundError
from .media import Pair, canonical_json, digest_of
from .policy import ToolPolicy
from .registry import ToolRegistry, ToolSpec
from .store import Artifact, StateStore
from .symbolic import (
    AbcParseError,
    abc_to_midi,
    analyze_tune,
    parse_abc,
    render_svg,
    synthesize_wav,
    validate_tune,
    write_smf,
)
from .symbolic.compose import compose_template
from .symbolic.midi import read_smf

INLINE_LIMIT = 1 << 20  # inputs below 1 MB travel as base64 JSON


@dataclass(frozen=True)
class Invocation:
    tool_id: str
    inputs: tuple[str, ...]  # artifact ids, ordered
    params: dict
    policy: ToolPolicy
    timeout_ms: int = 60000
    attempt: int = 1

    def seed(self) -> int:
        digest = digest_of({"tool_id": self.tool_id, "inputs": list(self.inputs), "params": self.params})
        return int(digest[:16], 16)


@dataclass
class InvocationResult:
    outcome: str  # ok | failed | timeout
    output_bytes: bytes | None = None
    output_meta: Pair | None = None
    backend_detail: str = ""

    @property
    def ok(self) -> bool:
        return self.outcome == "ok"


def _ok(spec: ToolSpec, data: bytes, detail: str) -> InvocationResult:
    return InvocationResult("ok", data, spec.output, detail)


def _failed(detail: str) -> InvocationResult:
    return InvocationResult("failed", None, None, detail)


def run_symbolic_tool(spec: ToolSpec, inputs: list[Artifact], params: dict, seed: int) -> InvocationResult:
    """Shared builtin implementation, dispatched on the declared output pair."""
    try:
        if spec.output == ("symbolic", "abc"):
            text = compose_template(seed, params)
            return _ok(spec, text.encode("utf-8"), "template compose")
        if spec.output == ("text", "plain"):
            prompt = inputs[0].bytes.decode("utf-8") if inputs else ""
            enriched = prompt.rstrip("\n") + "\nhints: " + canonical_json(params) + "\n"
            return _ok(spec, enriched.encode("utf-8"), "prompt enrichment")
        if not inputs:
            return _failed(f"tool {spec.id} needs an input artifact")
        primary = inputs[0]
        if spec.output == ("symbolic", "smf"):
            tune = parse_abc(primary.bytes.decode("utf-8"))
            return _ok(spec, write_smf(abc_to_midi(tune)), "abc compiled to smf")
        if spec.output == ("image", "svg"):
            tune = parse_abc(primary.bytes.decode("utf-8"))
            return _ok(spec, render_svg(tune), "score sketch")
        if spec.output == ("audio", "wav"):
            seq = read_smf(primary.bytes)
            return _ok(spec, synthesize_wav(seq), "sine synthesis")
        if spec.output == ("report", "json"):
            tune = parse_abc(primary.bytes.decode("utf-8"))
            report = analyze_tune(tune)
            issues = validate_tune(tune)
            payload = {
                "note_count": report.note_count,
                "bar_count": report.bar_count,
                "pitch_min": report.pitch_min,
                "pitch_max": report.pitch_max,
                "total_duration_s": report.total_duration_s,
                "key": report.key,
                "meter": report.meter,
                "issues": issues,
            }
            return _ok(spec, canonical_json(payload).encode("utf-8"), "tune analysis")
        return _failed(f"no builtin implementation produces {spec.output}")
    except (AbcParseError, UnicodeDecodeError) as exc:
        return _failed(f"input rejected: {exc}")
    except Exception as exc:  # contract: failures are results, not exceptions
        return _failed(f"{type(exc).__name__}: {exc}")


class BuiltinAdapter:
    def __init__(self, registry: ToolRegistry, store: StateStore):
        self._registry = registry
        self._store = store

    def invoke(self, inv: Invocation) -> InvocationResult:
        spec = self._registry.get(inv.tool_id)
        inputs = [self._store.get_artifact(a) for a in inv.inputs]
        return run_symbolic_tool(spec, inputs, inv.params, inv.seed())


_FIFTH_UP = {
    "C": "G", "G": "D", "D": "A", "A": "E", "E": "B", "B": "F#", "F#": "C#",
    "C#": "G", "F": "C", "Bb": "F", "Eb": "Bb", "Ab": "Eb", "Db": "Ab",
    "Gb": "Db", "Cb": "Gb",
}


@dataclass
class MockFixtures:
    """Deterministic misbehavior knobs for tests; not part of the memo key."""

    fail_attempts: dict = field(default_factory=dict)  # tool_id -> iterable of attempts
    miskey: set = field(default_factory=set)  # compose tools that ignore the key once


class MockAdapter:
    """Pure function of the Invocation value (given fixed fixtures)."""

    def __init__(self, registry: ToolRegistry, store: StateStore, fixtures: MockFixtures | None = None):
        self._registry = registry
        self._store = store
        self.fixtures = fixtures or MockFixtures()

    def invoke(self, inv: Invocation) -> InvocationResult:
        spec = self._registry.get(inv.tool_id)
        failing = self.fixtures.fail_attempts.get(inv.tool_id)
        if failing and inv.attempt in failing:
            return _failed(f"injected failure on attempt {inv.attempt}")
        params = inv.params
        if spec.kind == "compose" and inv.tool_id in self.fixtures.miskey and "feedback" not in params:
            params = dict(params)
            params["key_signature"] = _FIFTH_UP.get(str(params.get("key_signature", "C")), "G")
        inputs = [self._store.get_artifact(a) for a in inv.inputs]
        return run_symbolic_tool(spec, inputs, params, inv.seed())


class HttpAdapter:
    """JSON-over-HTTP remote invocation with retry and full-jitter backoff.

    Transport errors and 5xx responses retry (base 500 ms doubling, max 3
    tries); 4xx fails immediately. Exhausted retries report the timeout
    outcome. A test-mode constructor can remove jitter and fake the clock.
    """

    def __init__(
        self,
        registry: ToolRegistry,
        store: StateStore,
        config: Config | None = None,
        sleeper=time.sleep,
        jitter=None,
        client: httpx.Client | None = None,
    ):
        self._registry = registry
        self._store = store
        self._config = config or Config()
        self._sleep = sleeper
        self._jitter = jitter  # None = real jitter; callable -> factor in (0, 1]
        self._client = client or httpx.Client()

    def _body(self, inv: Invocation, spec: ToolSpec) -> tuple[dict, list]:
        inline = []
        oversize = []
        for art_id in inv.inputs:
            art = self._store.get_artifact(art_id)
            meta = {"id": art.id, "modality": art.modality, "format": art.format}
            if art.size_bytes < INLINE_LIMIT:
                inline.append({**meta, "b64": base64.b64encode(art.bytes).decode("ascii")})
            else:
                oversize.append((art, meta))
        body = {
            "tool_id": inv.tool_id,
            "params": inv.params,
            "policy": {
                "precision": inv.policy.precision,
                "placement": inv.policy.placement,
                "attention_kernels_hint": inv.policy.placement == "accelerator",
            },
            "inputs": inline,
        }
        return body, oversize

    def invoke(self, inv: Invocation) -> InvocationResult:
        spec = self._registry.get(inv.tool_id)
        if not spec.endpoint:
            return _failed(f"tool {inv.tool_id} has no endpoint")
        body, oversize = self._body(inv, spec)
        headers = {}
        token = os.environ.get("WEAVE_API_TOKEN")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        timeout = inv.timeout_ms / 1000.0
        tries = self._config.backoff_max_tries
        last_detail = ""
        for attempt in range(tries):
            try:
                if oversize:
                    files = {"body": (None, canonical_json(body), "application/json")}
                    for art, meta in oversize:
                        files[meta["id"]] = (meta["id"], art.bytes, "application/octet-stream")
                    response = self._client.post(spec.endpoint, files=files, headers=headers, timeout=timeout)
                else:
                    response = self._client.post(spec.endpoint, json=body, headers=headers, timeout=timeout)
            except httpx.HTTPError as exc:
                last_detail = f"transport error: {exc}"
                response = None
            if response is not None:
                if response.status_code < 400:
                    if not response.content:
                        return _failed("malformed response: empty body")
                    return _ok(spec, response.content, f"http {response.status_code}")
                if response.status_code < 500:
                    return _failed(f"http {response.status_code}: {response.text[:200]}")
                last_detail = f"http {response.status_code}"
            if attempt < tries - 1:
                delay_ms = self._config.backoff_base_ms * (self._config.backoff_factor**attempt)
                factor = self._jitter() if self._jitter is not None else 1.0
                self._sleep(delay_ms * factor / 1000.0)
        return InvocationResult("timeout", None, None, f"retries exhausted: {last_detail}")


class AdapterHub:
    """Routes invocations by declared backend, enforcing the timeout.

    `calls` counts invocations that actually reached a backend; memo hits
    never pass through here.
    """

    def __init__(
        self,
        registry: ToolRegistry,
        store: StateStore,
        config: Config | None = None,
        fixtures: MockFixtures | None = None,
        http_adapter: HttpAdapter | None = None,
    ):
        self._registry = registry
        self.builtin = BuiltinAdapter(registry, store)
        self.mock = MockAdapter(registry, store, fixtures)
        self.http = http_adapter or HttpAdapter(registry, store, config)
        self.calls = 0
        self.calls_by_tool: dict[str, int] = {}
        self._pool = concurrent.futures.ThreadPoolExecutor(max_workers=16)

    def invoke(self, inv: Invocation) -> InvocationResult:
        try:
            spec = self._registry.get(inv.tool_id)
        except NotFoundError:
            return _failed(f"unknown tool {inv.tool_id}")
        self.calls += 1
        self.calls_by_tool[inv.tool_id] = self.calls_by_tool.get(inv.tool_id, 0) + 1
        adapter = {"builtin": self.builtin, "mock": self.mock, "http": self.http}[spec.backend]
        future = self._pool.submit(adapter.invoke, inv)
        try:
            result = future.result(timeout=inv.timeout_ms / 1000.0)
        except concurrent.futures.TimeoutError:
            future.cancel()  # abandoned work detaches; adapters hold no shared state
            return InvocationResult("timeout", None, None, f"no result within {inv.timeout_ms} ms")
        except Exception as exc:
            return _failed(f"{type(exc).__name__}: {exc}")
        if result.ok and result.output_meta != spec.output:
            return _failed(
                f"backend returned {result.output_meta}, tool declares {spec.output}"
            )
        return result
