from __future__ import annotations

import base64
import hashlib
import json

import pytest
from fastapi.testclient import TestClient

from weavekit import HardwareProfile
from weavekit.gateway import create_app
from weavekit.service import WeaveService

PROFILE = HardwareProfile(46068, 65536, 200000)
JIG = "compose a jig in G, 6/8 time, and let me hear it"


@pytest.fixture
def client(tmp_path):
    service = WeaveService(mode="local", profile=PROFILE, cache_dir=tmp_path / "cache")
    with TestClient(create_app(service)) as tc:
        tc.service = service
        yield tc


def new_session(client) -> str:
    response = client.post("/v1/sessions", json={})
    assert response.status_code == 201
    return response.json()["session_id"]


def send(client, session_id, text, attachments=None):
    response = client.post(
        f"/v1/sessions/{session_id}/messages",
        json={"text": text, "attachments": attachments or []},
    )
    return response


def read_events(client, session_id):
    """Consume the poll-mode stream: ends after the active plan finishes."""
    events = []
    with client.stream("GET", f"/v1/sessions/{session_id}/events?follow=false") as response:
        assert response.headers["content-type"].startswith("text/event-stream")
        current = {}
        for line in response.iter_lines():
            if line.startswith("event: "):
                current["event"] = line[7:]
            elif line.startswith("data: "):
                current["data"] = json.loads(line[6:])
            elif not line and current:
                events.append(current)
                current = {}
    return events


class TestRest:
    def test_health(self, client):
        body = client.get("/v1/health").json()
        assert body["status"] == "ok"
        assert body["mode"] == "local"

    def test_tools_table(self, client):
        body = client.get("/v1/tools").json()
        ids = [t["id"] for t in body["tools"]]
        assert "compose.abc" in ids and "synth.midi2wav" in ids

    def test_message_returns_plan_and_turn(self, client):
        session_id = new_session(client)
        response = send(client, session_id, JIG)
        assert response.status_code == 202
        body = response.json()
        assert body["plan_id"].startswith("plan-")
        assert body["turn_id"].startswith("turn-")

    def test_message_to_missing_session_404(self, client):
        response = send(client, "sess-missing", "hello")
        assert response.status_code == 404
        assert response.json()["error"]["type"] == "NotFoundError"

    def test_empty_message_rejected(self, client):
        session_id = new_session(client)
        response = send(client, session_id, "")
        assert response.status_code == 400

    def test_unplannable_names_goal(self, tmp_path):
        from weavekit.registry import ToolRegistry, ToolSpec

        registry = ToolRegistry()
        registry.register_tool(
            ToolSpec("enrich.text", (("text", "plain"),), ("text", "plain"), 10,
                     {"int4": 1, "int8": 1, "fp16": 1}, "enrich")
        )
        service = WeaveService(mode="local", profile=PROFILE, cache_dir=tmp_path / "c2", registry=registry)
        with TestClient(create_app(service)) as tc:
            session_id = new_session(tc)
            response = send(tc, session_id, "let me hear it")
            assert response.status_code == 422
            assert response.json()["error"]["goal"] == ["audio", "wav"]

    def test_plan_endpoint_canonical(self, client):
        session_id = new_session(client)
        plan_id = send(client, session_id, JIG).json()["plan_id"]
        client.service.wait_plan(plan_id, timeout=30)
        body = client.get(f"/v1/plans/{plan_id}")
        assert body.status_code == 200
        payload = body.json()
        assert payload["status"] == "done"
        assert [n["tool_id"] for n in payload["plan"]["nodes"]] == [
            "compose.abc", "convert.abc2midi", "synth.midi2wav",
        ]

    def test_artifact_bytes_rehash_to_id(self, client):
        session_id = new_session(client)
        plan_id = send(client, session_id, JIG).json()["plan_id"]
        record = client.service.wait_plan(plan_id, timeout=30)
        art_id = record.report.final_artifacts[("audio", "wav")]
        response = client.get(f"/v1/artifacts/{art_id}")
        assert response.status_code == 200
        assert response.headers["content-type"] == "audio/wav"
        assert hashlib.sha256(response.content).hexdigest() == art_id

    def test_artifact_unknown_404(self, client):
        assert client.get(f"/v1/artifacts/{'0' * 64}").status_code == 404

    def test_attachment_upload(self, client):
        session_id = new_session(client)
        abc = b"X:1\nT:T\nM:4/4\nL:1/4\nK:C\nCDEF|\n"
        response = send(
            client,
            session_id,
            "analyze this tune",
            attachments=[{"b64": base64.b64encode(abc).decode(), "modality": "symbolic", "format": "abc"}],
        )
        assert response.status_code == 202
        record = client.service.wait_plan(response.json()["plan_id"], timeout=30)
        assert record.status == "done"
        report_id = record.report.final_artifacts[("report", "json")]
        payload = json.loads(client.get(f"/v1/artifacts/{report_id}").content)
        assert payload["note_count"] == 4


class TestEvents:
    def test_subscribe_then_send_first_event_is_plan(self, client):
        session_id = new_session(client)
        send(client, session_id, JIG)
        events = read_events(client, session_id)
        assert events[0]["event"] == "plan"
        assert events[-1]["event"] == "done"
        step_events = [e for e in events if e["event"].startswith("step_")]
        assert len(step_events) >= 4  # 3 started + 3 finished on a cold cache

    def test_replay_after_completion_ends_with_done(self, client):
        session_id = new_session(client)
        plan_id = send(client, session_id, JIG).json()["plan_id"]
        client.service.wait_plan(plan_id, timeout=30)
        events = read_events(client, session_id)
        assert events[0]["event"] == "plan"
        assert events[-1]["event"] == "done"

    def test_two_subscribers_identical(self, client):
        session_id = new_session(client)
        plan_id = send(client, session_id, JIG).json()["plan_id"]
        client.service.wait_plan(plan_id, timeout=30)
        first = read_events(client, session_id)
        second = read_events(client, session_id)
        assert first == second

    def test_step_events_respect_topology(self, client):
        session_id = new_session(client)
        plan_id = send(client, session_id, JIG).json()["plan_id"]
        client.service.wait_plan(plan_id, timeout=30)
        events = read_events(client, session_id)
        plan_payload = events[0]["data"]["payload"]
        producers = {}
        for producer, consumer, _ in plan_payload["edges"]:
            producers.setdefault(consumer, []).append(producer)
        finished: set[str] = set()
        for event in events:
            if event["event"] == "step_started":
                node = event["data"]["payload"]["node_id"]
                for producer in producers.get(node, []):
                    assert producer == "SOURCE" or producer in finished
            if event["event"] in ("step_finished", "step_cached"):
                finished.add(event["data"]["payload"]["node_id"])

    def test_events_unknown_session_404(self, client):
        assert client.get("/v1/sessions/sess-nope/events").status_code == 404


FIXTURE_REQUESTS = [
    "compose a jig in G, 6/8 time, and let me hear it",
    "show me the score for a march in D",
    "play something gentle in F, 3/4 time",
    "analyze a short reel in A",
    "give me the midi for a tune in Bb",
    "compose a slow air in Eb at 60 bpm",
    "sheet music and audio for a polka in C",
    "describe a melody in E, keep it under 20 seconds",
    "hum something simple",
    "score, audio, and midi for a waltz in Ab, 3/4 time",
]


class TestModeParity:
    def test_plan_json_identical_local_vs_hosted(self, tmp_path, stub_server):
        local = WeaveService(mode="local", profile=PROFILE, cache_dir=tmp_path / "l")
        hosted = WeaveService(
            mode="hosted", profile=PROFILE, cache_dir=tmp_path / "h",
            remote_base_url=stub_server.base_url,
        )
        transcripts = {}
        for mode, service in (("local", local), ("hosted", hosted)):
            lines = []
            session = service.create_session()
            for text in FIXTURE_REQUESTS:
                result = service.handle_message(session.id, text, wait=True)
                lines.append(service.get_plan(result["plan_id"]).json)
            transcripts[mode] = lines
        assert transcripts["local"] == transcripts["hosted"]

    def test_hosted_execution_succeeds_via_stub(self, tmp_path, stub_server):
        hosted = WeaveService(
            mode="hosted", profile=PROFILE, cache_dir=tmp_path / "h2",
            remote_base_url=stub_server.base_url,
        )
        session = hosted.create_session()
        result = hosted.handle_message(session.id, JIG, wait=True)
        record = hosted.get_plan(result["plan_id"])
        assert record.status == "done"
        assert record.report.verdict.status == "pass"
        assert stub_server.counts.get("compose.abc", 0) == 1
