"""REST + server-sent-events surface over the service.

The console (or any client) drives everything through this API; there is no
privileged channel. All JSON is canonical (sorted keys) so responses can be
used as byte-stable fixtures.
"""

from __future__ import annotations

import base64
import binascii

from fastapi import Body, FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response, StreamingResponse

from .errors import (
    CapacityError,
    IntegrityError,
    NotFoundError,
    UnplannableError,
    ValidationError,
    WeaveError,
)
from .media import CONTENT_TYPES, canonical_json
from .service import WeaveService

_STATUS = {
    NotFoundError: 404,
    ValidationError: 400,
    IntegrityError: 409,
    CapacityError: 422,
    UnplannableError: 422,
}


def _error_response(exc: WeaveError) -> Response:
    status = next((code for klass, code in _STATUS.items() if isinstance(exc, klass)), 500)
    body = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    if isinstance(exc, UnplannableError):
        body["error"]["goal"] = list(exc.goal)
    return Response(canonical_json(body), status_code=status, media_type="application/json")


def _json(payload, status_code: int = 200) -> Response:
    return Response(canonical_json(payload), status_code=status_code, media_type="application/json")


def create_app(service: WeaveService) -> FastAPI:
    app = FastAPI(title="weavekit gateway", docs_url=None, redoc_url=None)
    app.state.service = service
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(WeaveError)
    async def weave_error_handler(_request: Request, exc: WeaveError):
        return _error_response(exc)

    @app.get("/v1/health")
    def health():
        return _json({"status": "ok", "mode": service.mode, "tier": service.tier})

    @app.get("/v1/tools")
    def tools():
        return _json(
            {
                "tools": [
                    {
                        "id": spec.id,
                        "inputs": [list(p) for p in spec.inputs],
                        "output": list(spec.output),
                        "cost_estimate": spec.cost_estimate,
                        "mem_estimate_mb": spec.mem_estimate_mb,
                        "kind": spec.kind,
                        "backend": spec.backend,
                        "endpoint": spec.endpoint,
                        "supports_batching": spec.supports_batching,
                    }
                    for spec in service.registry.list_tools()
                ]
            }
        )

    @app.post("/v1/sessions")
    def create_session(payload: dict = Body(default={})):
        session = service.create_session(
            mode=payload.get("mode"), tier_override=payload.get("tier")
        )
        return _json(
            {
                "session_id": session.id,
                "mode": session.mode,
                "tier_override": session.tier_override,
            },
            status_code=201,
        )

    @app.post("/v1/sessions/{session_id}/messages")
    def post_message(session_id: str, payload: dict = Body(...)):
        text = payload.get("text", "")
        raw_attachments = payload.get("attachments", [])
        attachments = []
        for att in raw_attachments:
            try:
                data = base64.b64decode(att["b64"], validate=True)
            except (KeyError, binascii.Error, TypeError) as exc:
                raise ValidationError(f"bad attachment encoding: {exc}") from exc
            if "modality" not in att or "format" not in att:
                raise ValidationError("attachment needs modality and format")
            attachments.append((data, att["modality"], att["format"]))
        result = service.handle_message(session_id, text, attachments)
        return _json(result, status_code=202)

    @app.get("/v1/sessions/{session_id}/events")
    def stream_events(session_id: str, follow: bool = True):
        """Replay the active plan's events, then stream live ones.

        With follow=false the stream ends once a done/error event has been
        sent (poll mode for plain HTTP clients); the default streams forever.
        """
        buffer = service.events_buffer(session_id)

        def generate():
            index = buffer.replay_start()
            gap_reported = False
            finished = False
            while True:
                events, index, gap = buffer.read(index, timeout=0.25)
                if gap and not gap_reported:
                    gap_reported = True
                    yield ": dropped oldest events (buffer overflow)\n\n"
                if not events:
                    if finished and not follow:
                        return
                    yield ": keepalive\n\n"
                for event in events:
                    data = canonical_json(
                        {"plan_id": event["plan_id"], "payload": event["payload"]}
                    )
                    yield f"event: {event['event']}\ndata: {data}\n\n"
                    if event["event"] in ("done", "error"):
                        finished = True
                if finished and not follow:
                    return

        return StreamingResponse(
            generate(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    @app.get("/v1/plans/{plan_id}")
    def get_plan(plan_id: str):
        record = service.get_plan(plan_id)
        body = {
            "plan_id": record.plan_id,
            "session_id": record.session_id,
            "status": record.status,
            "tier": record.tier,
            "plan": record.graph.canonical(),
            "report": record.report.canonical() if record.report else None,
            "error": record.error,
        }
        return _json(body)

    @app.get("/v1/artifacts/{artifact_id}")
    def get_artifact(artifact_id: str):
        art = service.store.get_artifact(artifact_id)
        return Response(
            art.bytes,
            media_type=CONTENT_TYPES[art.format],
            headers={"X-Artifact-Id": art.id, "Cache-Control": "immutable"},
        )

    return app
