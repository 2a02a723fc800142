"""Network boundary: HTTP endpoints plus the bidirectional event channel.

State lives in the session layer; this module only translates between
wire JSON and session operations. Channel message schemas are documented
in docs/protocol.md and consumed verbatim by the browser client.
"""

from __future__ import annotations

import asyncio
import logging

from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from pydantic import BaseModel
from starlette.concurrency import run_in_threadpool

from .config import EngineConfig
from .errors import (BackendUnavailable, EmptyRequest, EngineError,
                     KernelDead, KernelTimeout, MalformedNotebook,
                     NotAPromptCell, NotExecutable, PipelineError, ReplayMiss,
                     SpawnFailure, StaleEvent, StalePanel, StubMiss,
                     UnknownCell, UnknownSession)
from .session import Session, SessionManager
from .widgets import WidgetEvent

logger = logging.getLogger(__name__)

# Event-channel poll interval; outbound latency is bounded by this.
CHANNEL_TICK_S = 0.025

_STATUS_FOR = (
    ((UnknownSession, UnknownCell), 404),
    ((MalformedNotebook,), 400),
    ((NotAPromptCell, NotExecutable, EmptyRequest, StalePanel, StaleEvent), 409),
    ((KernelDead, KernelTimeout, SpawnFailure), 503),
    ((ReplayMiss, StubMiss, BackendUnavailable), 502),
    ((PipelineError,), 422),
)


def _status_for(exc: EngineError) -> int:
    for classes, status in _STATUS_FOR:
        if isinstance(exc, classes):
            return status
    return 500


class OpenSessionRequest(BaseModel):
    notebook_path: str


class SetSourceRequest(BaseModel):
    source: str


def _notebook_view(session: Session) -> dict:
    return {
        "session_id": session.session_id,
        "notebook_path": str(session.notebook_path),
        "version": session.doc.version,
        "cells": [
            {"id": c.id, "kind": c.kind, "source": c.source,
             "origin": c.origin, "outputs": c.outputs}
            for c in session.doc.cells
        ],
    }


def create_app(config: EngineConfig | None = None,
               manager: SessionManager | None = None) -> FastAPI:
    app = FastAPI(title="nbeui engine")
    app.state.manager = manager or SessionManager(config or EngineConfig())

    def sessions() -> SessionManager:
        return app.state.manager

    @app.exception_handler(EngineError)
    async def engine_error_handler(request: Request, exc: EngineError):
        return JSONResponse(status_code=_status_for(exc),
                            content={"error": {"kind": exc.kind, "message": str(exc)}})

    @app.get("/health")
    async def health():
        return {"status": "ok"}

    @app.post("/sessions")
    async def open_session(body: OpenSessionRequest):
        session = await run_in_threadpool(sessions().open_session, body.notebook_path)
        return {"session_id": session.session_id}

    @app.get("/sessions/{session_id}/notebook")
    async def get_notebook(session_id: str):
        return _notebook_view(sessions().get(session_id))

    @app.post("/sessions/{session_id}/cells/{cell_id}/run")
    async def run_cell(session_id: str, cell_id: str):
        session = sessions().get(session_id)
        result = await run_in_threadpool(session.run_cell, cell_id)
        return {"ok": result.ok, "stdout": result.stdout, "stderr": result.stderr,
                "error": result.error, "value_repr": result.value_repr,
                "duration_ms": result.duration_ms}

    @app.post("/sessions/{session_id}/cells/{cell_id}/source")
    async def set_source(session_id: str, cell_id: str, body: SetSourceRequest):
        session = sessions().get(session_id)
        cell = await run_in_threadpool(session.set_cell_source, cell_id, body.source)
        return {"id": cell.id, "kind": cell.kind, "source": cell.source}

    @app.post("/sessions/{session_id}/cells/{cell_id}/suggest")
    async def trigger_suggest(session_id: str, cell_id: str):
        session = sessions().get(session_id)
        text = await run_in_threadpool(session.trigger_suggest, cell_id)
        return {"cell_id": cell_id, "text": text}

    @app.post("/sessions/{session_id}/cells/{cell_id}/ephemeral-ui")
    async def trigger_ephemeral_ui(session_id: str, cell_id: str):
        session = sessions().get(session_id)
        handle = await run_in_threadpool(session.trigger_ephemeral_ui, cell_id)
        return {"panel_id": handle.panel_id, **handle.payload.to_json()}

    @app.post("/sessions/{session_id}/panels/{panel_id}/submit")
    async def submit_panel(session_id: str, panel_id: str):
        session = sessions().get(session_id)
        cell = await run_in_threadpool(session.submit_panel, panel_id)
        return {"new_cell_id": cell.id, "code": cell.source,
                "index": session.doc.index_of(cell.id)}

    @app.websocket("/sessions/{session_id}/events")
    async def events_channel(websocket: WebSocket, session_id: str):
        try:
            session = sessions().get(session_id)
        except UnknownSession:
            await websocket.close(code=4404, reason="unknown session")
            return
        await websocket.accept()
        cursor = int(websocket.query_params.get("since_seq", 0))

        inbound: asyncio.Queue = asyncio.Queue()
        closed = asyncio.Event()

        async def reader():
            try:
                while True:
                    await inbound.put(await websocket.receive_json())
            except WebSocketDisconnect:
                closed.set()
            except Exception:  # malformed frame or transport gone
                closed.set()

        async def flush() -> None:
            nonlocal cursor
            for event in session.events_since(cursor):
                await websocket.send_json({"type": "event", "event": event.to_json()})
                cursor = event.server_seq

        reader_task = asyncio.create_task(reader())
        try:
            while not closed.is_set():
                await flush()
                try:
                    message = await asyncio.wait_for(inbound.get(), timeout=CHANNEL_TICK_S)
                except asyncio.TimeoutError:
                    continue
                if message.get("type") != "widget_event":
                    await websocket.send_json({
                        "type": "error",
                        "message": f"unsupported message type {message.get('type')!r}"})
                    continue
                event = WidgetEvent(panel_id=message.get("panel_id", ""),
                                    element_id=int(message.get("element_id", 0)),
                                    value=message.get("value"),
                                    sequence_no=int(message.get("sequence_no", 0)))
                ack = await run_in_threadpool(session.receive_widget_event, event)
                # Events emitted before the ack must reach the client first.
                await flush()
                await websocket.send_json({"type": "ack", "ack": ack})
        except WebSocketDisconnect:
            pass
        finally:
            reader_task.cancel()

    return app
