"""HTTP front end: a JSON API mirroring the CLI operation set one-to-one.

Every mutation returns the updated session snapshot, so a client never needs
a follow-up read to learn the new phase. Event history is exposed through a
cursor query (``/events?cursor=N`` returns events after N), which is what the
browser UI polls during long validation runs.

All error responses share one body shape::

    {"status": <http status>, "code": <stable machine tag>, "message": <text>}

404 unknown session or version, 409 operation not legal in the current phase,
422 malformed body or invalid design payload, 502 model gateway or harness
breakdown.

When a static asset directory is supplied, the browser UI inside it is served
under ``/`` with the API mounted beside it; API routes always take precedence.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from starlette.exceptions import HTTPException as StarletteHTTPException

from ..design_schema import DesignDocumentError, InvalidDesignChoice, from_document
from ..ice_session import (
    SessionEngine,
    SessionNotFound,
    SessionPhaseError,
    SessionState,
    StorageCorruption,
    events_since,
    metrics_for,
    phase_label,
    session_to_dict,
)
from ..llm_gateway import GatewayError
from ..sandbox_executor import HarnessError

API_PREFIX = "/api/v1"


class BadRequestBody(ValueError):
    """Request body is missing, not JSON, or missing a required field."""


def api_error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"status": status, "code": code, "message": message},
    )


def snapshot(state: SessionState) -> dict[str, Any]:
    data = session_to_dict(state)
    data["phase_label"] = phase_label(state)
    return data


async def _json_body(request: Request, required: bool = True) -> Mapping[str, Any]:
    raw = await request.body()
    if not raw:
        if required:
            raise BadRequestBody("request body must be a JSON object")
        return {}
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise BadRequestBody(f"request body is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise BadRequestBody("request body must be a JSON object")
    return data


def create_app(engine: SessionEngine, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="delf-studio", docs_url=None, redoc_url=None, openapi_url=None)

    # -- error mapping -------------------------------------------------------

    @app.exception_handler(SessionNotFound)
    async def _not_found(request: Request, exc: SessionNotFound):
        return api_error(404, "session-not-found", str(exc))

    @app.exception_handler(SessionPhaseError)
    async def _wrong_phase(request: Request, exc: SessionPhaseError):
        return api_error(409, "wrong-phase", str(exc))

    @app.exception_handler(BadRequestBody)
    async def _bad_body(request: Request, exc: BadRequestBody):
        return api_error(422, "invalid-body", str(exc))

    @app.exception_handler(DesignDocumentError)
    async def _bad_document(request: Request, exc: DesignDocumentError):
        return api_error(422, "invalid-body", str(exc))

    @app.exception_handler(InvalidDesignChoice)
    async def _bad_design(request: Request, exc: InvalidDesignChoice):
        return api_error(422, "invalid-design", str(exc))

    @app.exception_handler(ValueError)
    async def _bad_value(request: Request, exc: ValueError):
        return api_error(422, "invalid-body", str(exc))

    @app.exception_handler(GatewayError)
    async def _gateway(request: Request, exc: GatewayError):
        return api_error(502, "gateway-failure", str(exc))

    @app.exception_handler(HarnessError)
    async def _harness(request: Request, exc: HarnessError):
        return api_error(502, "harness-failure", str(exc))

    @app.exception_handler(StorageCorruption)
    async def _corrupt(request: Request, exc: StorageCorruption):
        return api_error(500, "storage-corruption", str(exc))

    @app.exception_handler(RequestValidationError)
    async def _invalid_request(request: Request, exc: RequestValidationError):
        return api_error(422, "invalid-body", str(exc))

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request: Request, exc: StarletteHTTPException):
        code = "not-found" if exc.status_code == 404 else "http-error"
        return api_error(exc.status_code, code, str(exc.detail))

    # -- sessions ------------------------------------------------------------

    @app.post(API_PREFIX + "/sessions", status_code=201)
    async def create_session(request: Request):
        body = await _json_body(request)
        description = body.get("description")
        if not isinstance(description, str):
            raise BadRequestBody("'description' must be a string")
        state = engine.create_session(description)
        return snapshot(state)

    @app.get(API_PREFIX + "/sessions")
    async def list_sessions():
        summaries = engine.list_sessions()
        return {
            "sessions": [
                {
                    "session_id": s.session_id,
                    "phase": s.phase,
                    "description_tokens": s.description_tokens,
                    "created_at": s.created_at,
                    "updated_at": s.updated_at,
                }
                for s in summaries
            ]
        }

    @app.get(API_PREFIX + "/sessions/{session_id}")
    async def get_session(session_id: str):
        return snapshot(engine.get(session_id))

    # -- workflow mutations ---------------------------------------------------

    @app.post(API_PREFIX + "/sessions/{session_id}/design")
    async def propose_design(session_id: str):
        return snapshot(engine.propose_design(session_id))

    @app.post(API_PREFIX + "/sessions/{session_id}/feedback")
    async def submit_feedback(session_id: str, request: Request):
        body = await _json_body(request)
        feedback = body.get("feedback")
        if not isinstance(feedback, str):
            raise BadRequestBody("'feedback' must be a string")
        return snapshot(engine.submit_feedback(session_id, feedback))

    @app.post(API_PREFIX + "/sessions/{session_id}/approve")
    async def approve_design(session_id: str, request: Request):
        body = await _json_body(request, required=False)
        edited = body.get("edited")
        parsed = None
        if edited is not None:
            if not isinstance(edited, dict) or "observation" not in edited or "action" not in edited:
                raise BadRequestBody("'edited' must hold 'observation' and 'action' documents")
            parsed = (from_document(edited["observation"]), from_document(edited["action"]))
        return snapshot(engine.approve_design(session_id, parsed))

    @app.post(API_PREFIX + "/sessions/{session_id}/codify")
    async def codify(session_id: str):
        return snapshot(engine.codify(session_id))

    @app.post(API_PREFIX + "/sessions/{session_id}/validate")
    async def validate(session_id: str):
        return snapshot(engine.validate(session_id))

    @app.post(API_PREFIX + "/sessions/{session_id}/abandon")
    async def abandon(session_id: str):
        return snapshot(engine.abandon(session_id))

    # -- reads ----------------------------------------------------------------

    @app.get(API_PREFIX + "/sessions/{session_id}/code/{version}")
    async def get_code(session_id: str, version: int):
        state = engine.get(session_id)
        if not 1 <= version <= len(state.code_versions):
            return api_error(
                404,
                "not-found",
                f"session has {len(state.code_versions)} code version(s), no version {version}",
            )
        record = state.code_versions[version - 1]
        return {
            "version": version,
            "language_tag": record.candidate.language_tag,
            "source": record.candidate.source,
            "origin": record.origin,
            "created_at": record.at,
        }

    @app.get(API_PREFIX + "/sessions/{session_id}/metrics")
    async def get_metrics(session_id: str):
        metrics = metrics_for(engine.get(session_id))
        return {
            "description_tokens": metrics.description_tokens,
            "trials_to_execution": metrics.trials_to_execution,
            "space_kind": metrics.space_kind.value if metrics.space_kind else None,
            "outcome": metrics.outcome,
        }

    @app.get(API_PREFIX + "/sessions/{session_id}/events")
    async def get_events(session_id: str, cursor: int = 0):
        state = engine.get(session_id)
        events = events_since(state, cursor)
        return {
            "events": [
                {"cursor": e.cursor, "kind": e.kind, "detail": e.detail, "at": e.at}
                for e in events
            ],
            "cursor": events[-1].cursor if events else cursor,
            "phase": state.phase.value,
            "phase_label": phase_label(state),
        }

    # Mounted last so API routes always win; html=True serves index.html at /.
    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
