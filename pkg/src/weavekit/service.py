"""Session-facing orchestration: message in, plan + progress events out.

The service owns the wiring (store, registry, adapter hub, tier) and runs
one plan per session at a time. Planning happens synchronously so callers
get the plan id (and the plan event) immediately; execution happens on a
worker thread emitting events into a bounded per-session buffer that
server-sent-event subscribers drain.
"""

from __future__ import annotations

import os
import threading
import uuid
from dataclasses import dataclass, field

from .adapters import AdapterHub, HttpAdapter, MockFixtures
from .config import Config
from .errors import ExecutionFailed, NotFoundError, ValidationError
from .executor import ExecutionReport, Executor
from .media import canonical_json
from .planner import PlanGraph, RequestSpec, derive_request_spec, plan as compose_plan
from .policy import HardwareProfile, probe_hardware, select_tier
from .registry import ToolRegistry, default_registry
from .store import StateStore


class EventBuffer:
    """Bounded in-order event log with blocking reads.

    Oldest events are dropped once the buffer is full; the drop count is
    kept so subscribers can be told the stream has a hole.
    """

    def __init__(self, limit: int):
        self._limit = limit
        self._events: list[dict] = []
        self._dropped = 0
        self._cond = threading.Condition()

    def append(self, event: dict) -> None:
        with self._cond:
            self._events.append(event)
            if len(self._events) > self._limit:
                overflow = len(self._events) - self._limit
                self._events = self._events[overflow:]
                self._dropped += overflow
            self._cond.notify_all()

    def replay_start(self) -> int:
        """Absolute index of the active plan's `plan` event (or stream end)."""
        with self._cond:
            for i in range(len(self._events) - 1, -1, -1):
                if self._events[i]["event"] == "plan":
                    return self._dropped + i
            return self._dropped + len(self._events)

    def read(self, index: int, timeout: float | None = 0.25) -> tuple[list[dict], int, bool]:
        """Events at absolute index onward; returns (events, next_index, gap)."""
        with self._cond:
            if index >= self._dropped + len(self._events):
                self._cond.wait(timeout=timeout)
            gap = index < self._dropped
            start = max(index, self._dropped)
            chunk = self._events[start - self._dropped :]
            return list(chunk), self._dropped + len(self._events), gap


@dataclass
class PlanRecord:
    plan_id: str
    session_id: str
    graph: PlanGraph
    spec: RequestSpec
    json: str
    tier: str = "low"
    status: str = "running"  # running | done | error
    report: ExecutionReport | None = None
    error: str | None = None
    finished: threading.Event = field(default_factory=threading.Event)


class WeaveService:
    def __init__(
        self,
        mode: str = "local",
        tier: str | None = None,
        cache_dir: str | None = None,
        config: Config | None = None,
        profile: HardwareProfile | None = None,
        registry: ToolRegistry | None = None,
        fixtures: MockFixtures | None = None,
        remote_base_url: str | None = None,
        http_adapter: HttpAdapter | None = None,
    ):
        if mode not in ("local", "hosted"):
            raise ValidationError(f"unknown mode {mode!r}")
        self.mode = mode
        self.config = config or Config()
        self.store = StateStore(cache_dir or os.environ.get("WEAVE_CACHE_DIR"))
        self.registry = registry or default_registry(mode, remote_base_url)
        self.profile = probe_hardware(injected=profile)
        env_tier = os.environ.get("WEAVE_TIER")
        self.tier = select_tier(self.profile, override=tier or env_tier, config=self.config)
        self.hub = AdapterHub(
            self.registry, self.store, self.config, fixtures=fixtures, http_adapter=http_adapter
        )
        self.plans: dict[str, PlanRecord] = {}
        self._events: dict[str, EventBuffer] = {}
        self._session_locks: dict[str, threading.Lock] = {}
        self._lock = threading.Lock()

    # --------------------------------------------------------------- events

    def events_buffer(self, session_id: str) -> EventBuffer:
        self.store.get_session(session_id)
        with self._lock:
            if session_id not in self._events:
                self._events[session_id] = EventBuffer(self.config.event_buffer_size)
            return self._events[session_id]

    def _emit(self, session_id: str, plan_id: str, event: str, payload: dict) -> None:
        self.events_buffer(session_id).append(
            {"event": event, "plan_id": plan_id, "payload": payload}
        )

    # -------------------------------------------------------------- session

    def create_session(self, mode: str | None = None, tier_override: str | None = None):
        return self.store.create_session(mode or self.mode, tier_override)

    def _session_lock(self, session_id: str) -> threading.Lock:
        with self._lock:
            return self._session_locks.setdefault(session_id, threading.Lock())

    # -------------------------------------------------------------- message

    def handle_message(
        self,
        session_id: str,
        text: str,
        attachments: list[tuple[bytes, str, str]] | None = None,
        wait: bool = False,
    ) -> dict:
        """Store the turn, plan synchronously, execute asynchronously.

        Attachments are (bytes, modality, format) triples. Returns turn and
        plan ids; with wait=True blocks until execution finishes.
        """
        session = self.store.get_session(session_id)
        attachment_ids = [
            self.store.put_artifact(data, modality, fmt, "user", [])
            for data, modality, fmt in (attachments or [])
        ]
        artifacts = [self.store.get_artifact(a) for a in attachment_ids]
        spec = derive_request_spec(text, artifacts)
        turn = self.store.append_turn(session_id, "user", text, attachment_ids)

        tier = select_tier(self.profile, override=session.tier_override or self.tier, config=self.config)
        graph = compose_plan(spec, self.registry, tier, self.profile, self.config)
        plan_id = f"plan-{uuid.uuid4().hex}"
        record = PlanRecord(
            plan_id=plan_id,
            session_id=session_id,
            graph=graph,
            spec=spec,
            json=graph.to_json(),
            tier=tier,
        )
        with self._lock:
            self.plans[plan_id] = record
        self._emit(session_id, plan_id, "plan", graph.canonical())

        source_artifact = attachment_ids[0] if attachment_ids else None
        worker = threading.Thread(
            target=self._run_plan,
            args=(record, source_artifact),
            name=f"plan-{plan_id[:12]}",
            daemon=True,
        )
        worker.start()
        if wait:
            record.finished.wait()
        return {"turn_id": turn.id, "plan_id": plan_id}

    def _run_plan(self, record: PlanRecord, source_artifact: str | None) -> None:
        session_id = record.session_id
        with self._session_lock(session_id):
            self.store.set_active_plan(session_id, record.plan_id)
            executor = Executor(
                self.store,
                self.registry,
                self.hub,
                record.tier,
                self.profile,
                self.config,
                on_event=lambda event, payload: self._emit(session_id, record.plan_id, event, payload),
            )
            try:
                report = executor.execute_plan(
                    record.graph, record.spec, session_id, record.plan_id, source_artifact
                )
                record.report = report
                record.status = "done"
                self.store.append_turn(
                    session_id,
                    "verdict",
                    canonical_json(report.verdict.canonical()),
                    list(report.final_artifacts.values()),
                )
            except ExecutionFailed as exc:
                record.report = exc.report
                record.error = str(exc)
                record.status = "error"
                self.store.append_turn(session_id, "system", f"execution failed: {exc}", [])
            except Exception as exc:  # never crash the worker silently
                record.error = f"{type(exc).__name__}: {exc}"
                record.status = "error"
                self._emit(session_id, record.plan_id, "error", {"message": record.error, "report": None})
            finally:
                self.store.set_active_plan(session_id, None)
                record.finished.set()

    # ---------------------------------------------------------------- plans

    def get_plan(self, plan_id: str) -> PlanRecord:
        record = self.plans.get(plan_id)
        if record is None:
            raise NotFoundError(f"unknown plan {plan_id}")
        return record

    def wait_plan(self, plan_id: str, timeout: float | None = None) -> PlanRecord:
        record = self.get_plan(plan_id)
        record.finished.wait(timeout=timeout)
        return record
