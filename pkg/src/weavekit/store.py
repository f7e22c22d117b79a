"""Session, turn, artifact, and memo persistence.

Artifacts are content-addressed: the id of a blob is the hex SHA-256 of its
bytes, so identical puts are idempotent and a fetched artifact can always be
re-verified against its id. The (tool, inputs, policy) -> artifact memo table
lets the executor skip backend calls entirely on warm cache.

On-disk layout (enabled when a cache_dir is given):

    <cache_dir>/blobs/<first2hex>/<digest>   raw bytes, one file per artifact
    <cache_dir>/index.jsonl                  one JSON record per event

The index is append-only; eviction writes a tombstone record rather than
rewriting history. Replaying the index in order reconstructs the store.
"""

from __future__ import annotations

import itertools
import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .errors import IntegrityError, NotFoundError, StoreError, ValidationError
from .media import Pair, canonical_json, check_pair, digest_of, sha256_hex

MODES = ("local", "hosted")
ROLES = ("user", "system", "tool", "verdict")
TIERS = ("low", "medium", "high")


def _token(prefix: str) -> str:
    return f"{prefix}-{uuid.uuid4().hex}"


@dataclass
class Session:
    id: str
    created_at: float
    mode: str
    tier_override: str | None = None
    turns: list[str] = field(default_factory=list)
    active_plan: str | None = None


@dataclass
class Turn:
    id: str
    role: str
    text: str
    attachments: list[str] = field(default_factory=list)
    created_at: float = 0.0


@dataclass
class Artifact:
    id: str
    modality: str
    format: str
    bytes: bytes
    producer: str
    inputs: list[str]
    created_at: float
    size_bytes: int

    @property
    def pair(self) -> Pair:
        return (self.modality, self.format)


@dataclass(frozen=True)
class MemoKey:
    tool_id: str
    input_digest: str
    policy_digest: str

    @classmethod
    def build(cls, tool_id: str, input_ids: list[str], params: dict, policy_fields: dict) -> "MemoKey":
        """Digest inputs/params and the policy under canonical serialization.

        Parameter dicts hash identically regardless of key insertion order.
        """
        input_digest = digest_of({"inputs": list(input_ids), "params": params})
        policy_digest = digest_of(policy_fields)
        return cls(tool_id=tool_id, input_digest=input_digest, policy_digest=policy_digest)


class StateStore:
    """Thread-safe store for sessions, artifacts, and the memo cache.

    All mutation goes through one re-entrant lock: writes are serialized
    (single-writer discipline for the index file) and content-addressed blob
    writes are idempotent, so concurrent identical puts are legal.
    """

    def __init__(self, cache_dir: str | os.PathLike | None = None):
        self._lock = threading.RLock()
        self._sessions: dict[str, Session] = {}
        self._turns: dict[str, Turn] = {}
        self._artifacts: dict[str, Artifact] = {}
        self._memos: dict[MemoKey, str] = {}
        self._plan_artifacts: dict[str, set[str]] = {}
        self._access: dict[str, int] = {}
        self._clock = itertools.count(1)
        self._cache_dir = Path(cache_dir) if cache_dir is not None else None
        if self._cache_dir is not None:
            self._blob_root = self._cache_dir / "blobs"
            self._index_path = self._cache_dir / "index.jsonl"
            try:
                self._blob_root.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise StoreError(f"cannot create cache dir {self._cache_dir}: {exc}") from exc
            self._replay_index()

    # ------------------------------------------------------------------ disk

    def _blob_path(self, artifact_id: str) -> Path:
        return self._blob_root / artifact_id[:2] / artifact_id

    def _append_index(self, record: dict) -> None:
        if self._cache_dir is None:
            return
        try:
            with open(self._index_path, "a", encoding="utf-8") as fh:
                fh.write(canonical_json(record) + "\n")
        except OSError as exc:
            raise StoreError(f"index append failed: {exc}") from exc

    def _replay_index(self) -> None:
        if not self._index_path.exists():
            return
        for line in self._index_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                continue  # torn tail write; ignore
            kind = rec.get("kind")
            if kind == "artifact":
                path = self._blob_path(rec["id"])
                if not path.exists():
                    continue
                art = Artifact(
                    id=rec["id"],
                    modality=rec["modality"],
                    format=rec["format"],
                    bytes=b"",
                    producer=rec["producer"],
                    inputs=list(rec["inputs"]),
                    created_at=rec["created_at"],
                    size_bytes=rec["size_bytes"],
                )
                self._artifacts[art.id] = art
                self._access[art.id] = next(self._clock)
            elif kind == "memo":
                key = MemoKey(rec["tool_id"], rec["input_digest"], rec["policy_digest"])
                if rec["artifact"] in self._artifacts:
                    self._memos[key] = rec["artifact"]
            elif kind == "evict":
                self._artifacts.pop(rec["id"], None)
                self._access.pop(rec["id"], None)
                self._memos = {k: v for k, v in self._memos.items() if v != rec["id"]}
            elif kind == "session":
                self._sessions[rec["id"]] = Session(
                    id=rec["id"],
                    created_at=rec["created_at"],
                    mode=rec["mode"],
                    tier_override=rec.get("tier_override"),
                )
            elif kind == "turn":
                sess = self._sessions.get(rec["session"])
                turn = Turn(
                    id=rec["id"],
                    role=rec["role"],
                    text=rec["text"],
                    attachments=list(rec["attachments"]),
                    created_at=rec["created_at"],
                )
                self._turns[turn.id] = turn
                if sess is not None:
                    sess.turns.append(turn.id)

    def _load_bytes(self, art: Artifact) -> bytes:
        if art.bytes:
            return art.bytes
        if art.size_bytes == 0:
            return b""
        if self._cache_dir is None:
            return art.bytes
        try:
            data = self._blob_path(art.id).read_bytes()
        except OSError as exc:
            raise StoreError(f"blob read failed for {art.id}: {exc}") from exc
        art.bytes = data
        return data

    # -------------------------------------------------------------- sessions

    def create_session(self, mode: str, tier_override: str | None = None) -> Session:
        if mode not in MODES:
            raise ValidationError(f"unknown session mode {mode!r}")
        if tier_override is not None and tier_override not in TIERS:
            raise ValidationError(f"unknown tier {tier_override!r}")
        with self._lock:
            sess = Session(id=_token("sess"), created_at=time.time(), mode=mode, tier_override=tier_override)
            self._sessions[sess.id] = sess
            self._append_index(
                {
                    "kind": "session",
                    "id": sess.id,
                    "created_at": sess.created_at,
                    "mode": sess.mode,
                    "tier_override": sess.tier_override,
                }
            )
            return sess

    def get_session(self, session_id: str) -> Session:
        with self._lock:
            sess = self._sessions.get(session_id)
            if sess is None:
                raise NotFoundError(f"unknown session {session_id}")
            return sess

    def append_turn(self, session_id: str, role: str, text: str, attachments: list[str] | None = None) -> Turn:
        attachments = list(attachments or [])
        if role not in ROLES:
            raise ValidationError(f"unknown turn role {role!r}")
        with self._lock:
            sess = self.get_session(session_id)
            for art_id in attachments:
                if art_id not in self._artifacts:
                    raise IntegrityError(f"turn attachment {art_id} does not exist")
            turn = Turn(id=_token("turn"), role=role, text=text, attachments=attachments, created_at=time.time())
            self._turns[turn.id] = turn
            sess.turns.append(turn.id)
            self._append_index(
                {
                    "kind": "turn",
                    "id": turn.id,
                    "session": session_id,
                    "role": role,
                    "text": text,
                    "attachments": attachments,
                    "created_at": turn.created_at,
                }
            )
            return turn

    def get_turn(self, turn_id: str) -> Turn:
        with self._lock:
            turn = self._turns.get(turn_id)
            if turn is None:
                raise NotFoundError(f"unknown turn {turn_id}")
            return turn

    def set_active_plan(self, session_id: str, plan_id: str | None) -> None:
        with self._lock:
            self.get_session(session_id).active_plan = plan_id

    def record_plan_artifact(self, plan_id: str, artifact_id: str) -> None:
        """Mark an artifact as belonging to a plan so eviction pins it while active."""
        with self._lock:
            self._plan_artifacts.setdefault(plan_id, set()).add(artifact_id)

    # ------------------------------------------------------------- artifacts

    def put_artifact(
        self,
        data: bytes,
        modality: str,
        fmt: str,
        producer: str,
        inputs: list[str] | None = None,
    ) -> str:
        inputs = list(inputs or [])
        check_pair(modality, fmt)
        with self._lock:
            for input_id in inputs:
                if input_id not in self._artifacts:
                    raise IntegrityError(f"input artifact {input_id} does not exist")
            art_id = sha256_hex(data)
            if art_id in self._artifacts:
                self._access[art_id] = next(self._clock)
                return art_id
            art = Artifact(
                id=art_id,
                modality=modality,
                format=fmt,
                bytes=data,
                producer=producer,
                inputs=inputs,
                created_at=time.time(),
                size_bytes=len(data),
            )
            if self._cache_dir is not None:
                path = self._blob_path(art_id)
                try:
                    path.parent.mkdir(parents=True, exist_ok=True)
                    path.write_bytes(data)
                except OSError as exc:
                    raise StoreError(f"blob write failed for {art_id}: {exc}") from exc
            self._artifacts[art_id] = art
            self._access[art_id] = next(self._clock)
            self._append_index(
                {
                    "kind": "artifact",
                    "id": art_id,
                    "modality": modality,
                    "format": fmt,
                    "producer": producer,
                    "inputs": inputs,
                    "created_at": art.created_at,
                    "size_bytes": art.size_bytes,
                }
            )
            return art_id

    def get_artifact(self, artifact_id: str) -> Artifact:
        with self._lock:
            art = self._artifacts.get(artifact_id)
            if art is None:
                raise NotFoundError(f"unknown artifact {artifact_id}")
            self._load_bytes(art)
            self._access[artifact_id] = next(self._clock)
            return art

    def has_artifact(self, artifact_id: str) -> bool:
        with self._lock:
            return artifact_id in self._artifacts

    def total_bytes(self) -> int:
        with self._lock:
            return sum(a.size_bytes for a in self._artifacts.values())

    # ----------------------------------------------------------------- memos

    def memo_lookup(self, key: MemoKey) -> str | None:
        with self._lock:
            art_id = self._memos.get(key)
            if art_id is not None:
                self._access[art_id] = next(self._clock)
            return art_id

    def memo_record(self, key: MemoKey, artifact_id: str) -> None:
        with self._lock:
            if artifact_id not in self._artifacts:
                raise IntegrityError(f"memo target {artifact_id} does not exist")
            self._memos[key] = artifact_id
            self._append_index(
                {
                    "kind": "memo",
                    "tool_id": key.tool_id,
                    "input_digest": key.input_digest,
                    "policy_digest": key.policy_digest,
                    "artifact": artifact_id,
                }
            )

    # -------------------------------------------------------------- eviction

    def _pinned_ids(self) -> set[str]:
        pinned: set[str] = set()
        for sess in self._sessions.values():
            for turn_id in sess.turns:
                turn = self._turns.get(turn_id)
                if turn:
                    pinned.update(turn.attachments)
            if sess.active_plan:
                pinned.update(self._plan_artifacts.get(sess.active_plan, ()))
        return pinned

    def evict(self, target_bytes: int) -> int:
        """Drop least-recently-accessed unpinned artifacts until the store
        holds at most target_bytes. Returns bytes freed."""
        if target_bytes < 0:
            raise ValidationError("target_bytes must be non-negative")
        with self._lock:
            pinned = self._pinned_ids()
            total = self.total_bytes()
            freed = 0
            candidates = sorted(
                (a for a in self._artifacts.values() if a.id not in pinned),
                key=lambda a: self._access.get(a.id, 0),
            )
            for art in candidates:
                if total <= target_bytes:
                    break
                del self._artifacts[art.id]
                self._access.pop(art.id, None)
                self._memos = {k: v for k, v in self._memos.items() if v != art.id}
                if self._cache_dir is not None:
                    try:
                        self._blob_path(art.id).unlink(missing_ok=True)
                    except OSError:
                        pass
                self._append_index({"kind": "evict", "id": art.id})
                total -= art.size_bytes
                freed += art.size_bytes
            return freed
