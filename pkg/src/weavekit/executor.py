"""Plan execution with memoization, critique, and bounded repair.

Nodes run in topological order (independent nodes concurrently, bounded by
the plan's tightest max_parallel). Before any backend call the memo cache is
consulted; a hit short-circuits the node with zero backend work. After the
sinks complete, deterministic critique checks the outputs against the
request; an execution failure walks the retry -> substitute -> abort ladder
and a critique failure re-invokes the compose step once with feedback.
"""

from __future__ import annotations

import concurrent.futures
import io
import time
import wave
from dataclasses import dataclass, field

from .adapters import AdapterHub, Invocation
from .config import Config
from .errors import ExecutionFailed, IntegrityError, NotFoundError, ValidationError
from .media import Pair
from .planner import SOURCE, PlanGraph, PlanNode, RequestSpec, topological_order, validate_plan
from .policy import HardwareProfile, policy_for_tool
from .registry import ToolRegistry
from .store import MemoKey, StateStore
from .symbolic import AbcParseError, parse_abc, validate_tune


@dataclass
class StepRecord:
    node_id: str
    tool_id: str
    status: str  # cached | executed | failed | skipped
    output: str | None = None
    duration_ms: float = 0.0
    attempt: int = 1

    def canonical(self) -> dict:
        return {
            "node_id": self.node_id,
            "tool_id": self.tool_id,
            "status": self.status,
            "output": self.output,
            "duration_ms": round(self.duration_ms, 3),
            "attempt": self.attempt,
        }


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def canonical(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class Verdict:
    checks: list[Check] = field(default_factory=list)

    @property
    def status(self) -> str:
        return "pass" if all(c.passed for c in self.checks) else "fail"

    def canonical(self) -> dict:
        return {"status": self.status, "checks": [c.canonical() for c in self.checks]}


@dataclass
class ExecutionReport:
    plan_id: str
    steps: list[StepRecord] = field(default_factory=list)
    verdict: Verdict = field(default_factory=Verdict)
    final_artifacts: dict[Pair, str] = field(default_factory=dict)

    def canonical(self) -> dict:
        return {
            "plan_id": self.plan_id,
            "steps": [s.canonical() for s in self.steps],
            "verdict": self.verdict.canonical(),
            "final_artifacts": {f"{m}/{f}": a for (m, f), a in sorted(self.final_artifacts.items())},
        }


@dataclass(frozen=True)
class RepairAction:
    kind: str  # retry | substitute | abort
    tool_id: str | None = None


def repair(
    plan: PlanGraph,
    failed_node: PlanNode,
    cause: str,
    attempt: int,
    registry: ToolRegistry,
    config: Config | None = None,
) -> RepairAction:
    """Rule ladder for execution failures.

    First failure retries the same tool; the second substitutes the next
    tool (by id) sharing the exact typed signature; anything further aborts.
    """
    cfg = config or Config()
    if attempt > cfg.max_repair_attempts or attempt >= 3:
        return RepairAction("abort")
    if attempt == 1:
        return RepairAction("retry")
    failed_spec = registry.get(failed_node.tool_id)
    alternatives = [
        spec.id
        for spec in registry.list_tools()
        if spec.id != failed_spec.id
        and spec.inputs == failed_spec.inputs
        and spec.output == failed_spec.output
        and spec.id > failed_spec.id
    ]
    if alternatives:
        return RepairAction("substitute", tool_id=min(alternatives))
    return RepairAction("abort")


def _wav_info(data: bytes) -> dict:
    with wave.open(io.BytesIO(data), "rb") as wav:
        return {
            "sample_rate": wav.getframerate(),
            "channels": wav.getnchannels(),
            "duration_s": wav.getnframes() / wav.getframerate(),
        }


def critique(store: StateStore, artifacts: dict[Pair, str], spec: RequestSpec) -> Verdict:
    """Deterministic output validation against the request spec.

    Format identity for every goal; parse/validation plus key/meter header
    checks for symbolic output (searching the provenance chain when the
    goal itself is not ABC); sample-rate/channel/duration checks for audio.
    Internal tooling errors become a failed 'critique-error' check rather
    than an execution failure.
    """
    verdict = Verdict()
    for goal, artifact_id in artifacts.items():
        goal_label = f"{goal[0]}/{goal[1]}"
        try:
            art = store.get_artifact(artifact_id)
        except NotFoundError as exc:
            raise IntegrityError(f"critique target {artifact_id} missing") from exc
        try:
            verdict.checks.append(
                Check(
                    name=f"format:{goal_label}",
                    passed=art.pair == tuple(goal),
                    detail=f"expected {goal_label}, got {art.modality}/{art.format}",
                )
            )
            abc_art = _nearest_abc(store, art)
            if tuple(goal) == ("symbolic", "abc"):
                if abc_art is None:
                    verdict.checks.append(Check("abc-valid", False, "artifact is not ABC"))
            if abc_art is not None:
                try:
                    tune = parse_abc(abc_art.bytes.decode("utf-8"))
                    issues = validate_tune(tune)
                    verdict.checks.append(
                        Check(
                            name="abc-valid",
                            passed=not issues,
                            detail="; ".join(issues) if issues else "parsed clean",
                        )
                    )
                    if "key_signature" in spec.constraints:
                        want = str(spec.constraints["key_signature"])
                        verdict.checks.append(
                            Check(
                                name="key",
                                passed=tune.key.tonic == want,
                                detail=f"expected K:{want}, got K:{tune.key.tonic}",
                            )
                        )
                    if "meter" in spec.constraints:
                        want = str(spec.constraints["meter"])
                        got = f"{tune.meter[0]}/{tune.meter[1]}"
                        verdict.checks.append(
                            Check(name="meter", passed=got == want, detail=f"expected M:{want}, got M:{got}")
                        )
                except AbcParseError as exc:
                    verdict.checks.append(Check("abc-valid", False, str(exc)[:300]))
            elif spec.constraints.keys() & {"key_signature", "meter"}:
                verdict.checks.append(
                    Check("key", False, "no ABC artifact in provenance to check constraints against")
                )
            if tuple(goal) == ("audio", "wav"):
                info = _wav_info(art.bytes)
                verdict.checks.append(
                    Check(
                        name="audio-format",
                        passed=info["sample_rate"] == 44100 and info["channels"] == 2,
                        detail=f"{info['sample_rate']} Hz, {info['channels']} ch",
                    )
                )
                if "max_duration_s" in spec.constraints:
                    limit = float(spec.constraints["max_duration_s"])
                    verdict.checks.append(
                        Check(
                            name="duration",
                            passed=info["duration_s"] <= limit,
                            detail=f"{info['duration_s']:.2f}s vs limit {limit}s",
                        )
                    )
        except Exception as exc:  # keep the loop total
            verdict.checks.append(Check("critique-error", False, f"{type(exc).__name__}: {exc}"))
    return verdict


def _nearest_abc(store: StateStore, art):
    """Breadth-first walk up the provenance graph to the closest ABC blob."""
    seen = set()
    queue = [art.id]
    while queue:
        current_id = queue.pop(0)
        if current_id in seen:
            continue
        seen.add(current_id)
        current = store.get_artifact(current_id)
        if current.format == "abc":
            return current
        queue.extend(current.inputs)
    return None


class Executor:
    """Session-serial plan runner; emits progress events via callback."""

    def __init__(
        self,
        store: StateStore,
        registry: ToolRegistry,
        hub: AdapterHub,
        tier: str,
        profile: HardwareProfile,
        config: Config | None = None,
        on_event=None,
    ):
        self._store = store
        self._registry = registry
        self._hub = hub
        self._tier = tier
        self._profile = profile
        self._config = config or Config()
        self._emit = on_event or (lambda event, payload: None)

    # ------------------------------------------------------------ internals

    def _input_edges(self, plan: PlanGraph, node_id: str) -> list[tuple[str, Pair]]:
        return [(producer, pair) for producer, consumer, pair in plan.edges if consumer == node_id]

    def _invoke_node(
        self,
        plan: PlanGraph,
        node: PlanNode,
        input_ids: list[str],
        params: dict,
        plan_id: str,
    ) -> StepRecord:
        """Run one node through memo lookup, backend calls, and repair."""
        started = time.perf_counter()
        tool_id = node.tool_id
        policy = node.policy
        attempt = 1
        while True:
            spec = self._registry.get(tool_id)
            key = MemoKey.build(tool_id, input_ids, params, policy.fields())
            cached = self._store.memo_lookup(key)
            if cached is not None and self._store.has_artifact(cached):
                self._store.record_plan_artifact(plan_id, cached)
                return StepRecord(
                    node_id=node.node_id,
                    tool_id=tool_id,
                    status="cached",
                    output=cached,
                    duration_ms=(time.perf_counter() - started) * 1000,
                    attempt=attempt,
                )
            self._emit("step_started", {"node_id": node.node_id, "tool_id": tool_id, "attempt": attempt})
            inv = Invocation(
                tool_id=tool_id,
                inputs=tuple(input_ids),
                params=params,
                policy=policy,
                timeout_ms=self._config.default_timeout_ms,
                attempt=attempt,
            )
            result = self._hub.invoke(inv)
            if result.ok:
                art_id = self._store.put_artifact(
                    result.output_bytes, spec.output[0], spec.output[1], tool_id, input_ids
                )
                self._store.memo_record(key, art_id)
                self._store.record_plan_artifact(plan_id, art_id)
                return StepRecord(
                    node_id=node.node_id,
                    tool_id=tool_id,
                    status="executed",
                    output=art_id,
                    duration_ms=(time.perf_counter() - started) * 1000,
                    attempt=attempt,
                )
            cause = f"{result.outcome}: {result.backend_detail}"
            action = repair(plan, PlanNode(node.node_id, tool_id, policy), cause, attempt, self._registry, self._config)
            self._emit(
                "repair",
                {"node_id": node.node_id, "tool_id": tool_id, "attempt": attempt, "action": action.kind, "cause": cause, "substitute": action.tool_id},
            )
            if action.kind == "abort":
                return StepRecord(
                    node_id=node.node_id,
                    tool_id=tool_id,
                    status="failed",
                    duration_ms=(time.perf_counter() - started) * 1000,
                    attempt=attempt,
                )
            if action.kind == "substitute":
                tool_id = action.tool_id
                policy = policy_for_tool(self._tier, self._registry.get(tool_id), self._profile)
            attempt += 1

    def _execute_nodes(
        self,
        plan: PlanGraph,
        nodes: list[PlanNode],
        artifact_of: dict[str, str],
        params_for: dict[str, dict],
        report: ExecutionReport,
        plan_id: str,
    ) -> bool:
        """Run the given nodes respecting dependencies. Returns success."""
        if not nodes:
            return True
        bound = max(1, min(n.policy.max_parallel for n in nodes))
        todo = {n.node_id: n for n in nodes}
        deps = {
            n.node_id: [p for p, _ in self._input_edges(plan, n.node_id)] for n in nodes
        }
        failed = False
        with concurrent.futures.ThreadPoolExecutor(max_workers=bound) as pool:
            running: dict[concurrent.futures.Future, PlanNode] = {}
            while todo or running:
                ready = [
                    node
                    for node_id, node in sorted(todo.items())
                    if all(
                        dep == SOURCE or dep in artifact_of
                        for dep in deps[node_id]
                    )
                    and not failed
                ]
                for node in ready:
                    del todo[node.node_id]
                    input_ids = [
                        artifact_of[producer] if producer != SOURCE else artifact_of[SOURCE]
                        for producer, _ in self._input_edges(plan, node.node_id)
                    ]
                    running[
                        pool.submit(
                            self._invoke_node, plan, node, input_ids, params_for[node.node_id], plan_id
                        )
                    ] = node
                if not running:
                    break
                done, _ = concurrent.futures.wait(
                    running, return_when=concurrent.futures.FIRST_COMPLETED
                )
                for future in done:
                    node = running.pop(future)
                    step = future.result()
                    report.steps.append(step)
                    if step.status == "cached":
                        self._emit("step_cached", step.canonical())
                    else:
                        self._emit("step_finished", step.canonical())
                    if step.status == "failed":
                        failed = True
                    else:
                        artifact_of[node.node_id] = step.output
        if failed:
            for node_id in sorted(todo):
                step = StepRecord(node_id=node_id, tool_id=todo[node_id].tool_id, status="skipped")
                report.steps.append(step)
                self._emit("step_finished", step.canonical())
        return not failed

    def _descendants(self, plan: PlanGraph, root: str) -> set[str]:
        out: set[str] = set()
        frontier = [root]
        while frontier:
            current = frontier.pop()
            for producer, consumer, _ in plan.edges:
                if producer == current and consumer not in out:
                    out.add(consumer)
                    frontier.append(consumer)
        return out

    # -------------------------------------------------------------- public

    def execute_plan(
        self,
        plan: PlanGraph,
        spec: RequestSpec,
        session_id: str,
        plan_id: str,
        source_artifact_id: str | None = None,
    ) -> ExecutionReport:
        diags = validate_plan(plan, self._registry)
        if diags:
            raise ValidationError("invalid plan: " + "; ".join(diags))
        self._store.get_session(session_id)

        if source_artifact_id is None:
            if spec.source == ("text", "plain"):
                source_artifact_id = self._store.put_artifact(
                    spec.raw_text.encode("utf-8"), "text", "plain", "user", []
                )
            else:
                raise IntegrityError("non-text source requires a source artifact")
        self._store.record_plan_artifact(plan_id, source_artifact_id)

        report = ExecutionReport(plan_id=plan_id)
        ordered = topological_order(plan)
        artifact_of: dict[str, str] = {SOURCE: source_artifact_id}
        params_for = {n.node_id: dict(spec.constraints) for n in ordered}

        ok = self._execute_nodes(plan, ordered, artifact_of, params_for, report, plan_id)
        if not ok:
            self._emit("error", {"message": "execution failed", "report": report.canonical()})
            raise ExecutionFailed("plan execution exhausted repairs", report)

        report.final_artifacts = {
            goal: artifact_of[sink] for goal, sink in plan.sinks.items()
        }
        report.verdict = critique(self._store, report.final_artifacts, spec)
        self._emit("verdict", report.verdict.canonical())

        if report.verdict.status == "fail":
            compose_nodes = [
                n for n in ordered if self._registry.get(n.tool_id).kind == "compose"
            ]
            if compose_nodes:
                target = compose_nodes[0]
                detail = "; ".join(
                    f"{c.name}: {c.detail}" for c in report.verdict.checks if not c.passed
                )
                self._emit(
                    "repair",
                    {"node_id": target.node_id, "tool_id": target.tool_id, "action": "reinvoke", "cause": f"verdict: {detail}"},
                )
                rerun_ids = {target.node_id} | self._descendants(plan, target.node_id)
                rerun_nodes = [n for n in ordered if n.node_id in rerun_ids]
                params_for[target.node_id] = dict(params_for[target.node_id])
                params_for[target.node_id]["feedback"] = detail
                for node in rerun_nodes:
                    artifact_of.pop(node.node_id, None)
                ok = self._execute_nodes(plan, rerun_nodes, artifact_of, params_for, report, plan_id)
                if not ok:
                    self._emit("error", {"message": "execution failed during verdict repair", "report": report.canonical()})
                    raise ExecutionFailed("verdict repair execution failed", report)
                report.final_artifacts = {
                    goal: artifact_of[sink] for goal, sink in plan.sinks.items()
                }
                report.verdict = critique(self._store, report.final_artifacts, spec)
                self._emit("verdict", report.verdict.canonical())

        self._emit("done", report.canonical())
        return report
