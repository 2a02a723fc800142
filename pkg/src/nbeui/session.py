"""Session core: one open notebook, one kernel, one event stream.

Both the HTTP server and the headless scenario runner drive sessions
through this layer, so every behavior is testable without a network.
Within a session all triggers and edits are serialized; different
sessions run concurrently.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from . import notebook as nb
from .config import EngineConfig, build_gateway
from .errors import (EmptyRequest, EngineError, NotAPromptCell, NotExecutable,
                     PipelineError, UnknownSession)
from .gateway import TranscriptStore
from .kernel import ExecResult, KernelConfig, KernelSession, start_session
from .pipeline import AgentPipeline, EphemeralUiHandle
from .widgets import PanelRegistry, WidgetEvent, apply_event, snapshot_state

logger = logging.getLogger(__name__)

PANEL_RENDER = "panel_render"
PANEL_ERROR = "panel_error"
CELL_INJECTED = "cell_injected"
SUGGESTION_OUTPUT = "suggestion_output"
EXEC_OUTPUT = "exec_output"
NOTEBOOK_CHANGED = "notebook_changed"
EVENT_KINDS = (PANEL_RENDER, PANEL_ERROR, CELL_INJECTED, SUGGESTION_OUTPUT,
               EXEC_OUTPUT, NOTEBOOK_CHANGED)


@dataclass
class ServerEvent:
    kind: str
    payload: dict
    session_id: str
    server_seq: int
    ts_ms: int

    def to_json(self) -> dict:
        # Deterministic part only; the timestamp travels separately so
        # traces can be compared after masking.
        return {"kind": self.kind, "payload": self.payload,
                "session_id": self.session_id, "server_seq": self.server_seq}


class Session:
    """One open notebook plus its kernel, panels, and event log."""

    def __init__(self, session_id: str, notebook_path: Path, doc: nb.NotebookDoc,
                 kernel: KernelSession, pipeline: AgentPipeline,
                 clock=time.monotonic):
        self.session_id = session_id
        self.notebook_path = notebook_path
        self.doc = doc
        self.kernel = kernel
        self.pipeline = pipeline
        self.panels = PanelRegistry()
        self.events: list[ServerEvent] = []
        self._clock = clock
        self.last_used = clock()
        self._lock = threading.RLock()
        self._seq = 0
        # Request and context captured when each panel was generated; the
        # injector must see what produced the panel, not a later edit.
        self._panel_origin: dict[str, tuple[str, str, nb.CodeContext]] = {}

    # -- event stream ----------------------------------------------------------

    def emit(self, kind: str, payload: dict) -> ServerEvent:
        with self._lock:
            self._seq += 1
            event = ServerEvent(kind=kind, payload=payload,
                                session_id=self.session_id, server_seq=self._seq,
                                ts_ms=int(time.time() * 1000))
            self.events.append(event)
            return event

    def events_since(self, seq: int) -> list[ServerEvent]:
        return [e for e in self.events if e.server_seq > seq]

    def touch(self) -> None:
        self.last_used = self._clock()

    # -- notebook operations ----------------------------------------------------

    def save(self) -> None:
        self.notebook_path.write_text(nb.save_notebook(self.doc), encoding="utf-8")

    def set_cell_source(self, cell_id: str, source: str) -> nb.Cell:
        with self._lock:
            self.touch()
            cell = self.doc.cell_by_id(cell_id)
            cell.source = source
            if cell.kind != nb.MARKDOWN:  # markdown identity comes from the file format
                cell.kind = nb.classify_cell(source)
            self.doc.version += 1
            self.save()
            self.emit(NOTEBOOK_CHANGED, {"version": self.doc.version})
            return cell

    def run_cell(self, cell_id: str) -> ExecResult:
        with self._lock:
            self.touch()
            cell = self.doc.cell_by_id(cell_id)
            if cell.kind != nb.CODE:
                raise NotExecutable(f"cell {cell_id} is {cell.kind}, not executable")
            result = self.kernel.execute(cell.source)
            cell.outputs = _outputs_from(result)
            self.save()
            self.emit(EXEC_OUTPUT, {
                "cell_id": cell_id, "ok": result.ok,
                "stdout": result.stdout, "stderr": result.stderr,
                "error": ({"type": result.error["type"],
                           "message": result.error["message"]}
                          if result.error else None),
            })
            self.emit(NOTEBOOK_CHANGED, {"version": self.doc.version})
            return result

    # -- triggers ----------------------------------------------------------------

    def trigger_suggest(self, cell_id: str) -> str:
        with self._lock:
            self.touch()
            cell = self.doc.cell_by_id(cell_id)
            if cell.kind != nb.PROMPT:
                raise NotAPromptCell(f"cell {cell_id} is not a prompt cell")
            existing = nb.extract_request(cell)
            context = nb.build_code_context(self.doc, cell_id)
            try:
                suggestion = self.pipeline.suggest_prompt(existing or None, context)
            except EngineError as exc:
                self._emit_panel_error(exc, cell_id)
                raise
            cell.outputs.append({"output_type": "stream", "name": "stdout",
                                 "text": suggestion + "\n"})
            self.save()
            self.emit(SUGGESTION_OUTPUT, {"cell_id": cell_id, "text": suggestion})
            return suggestion

    def trigger_ephemeral_ui(self, cell_id: str) -> EphemeralUiHandle:
        with self._lock:
            self.touch()
            cell = self.doc.cell_by_id(cell_id)
            if cell.kind != nb.PROMPT:
                raise NotAPromptCell(f"cell {cell_id} is not a prompt cell")
            try:
                request = nb.extract_request(cell)
                if not request:
                    raise EmptyRequest("prompt cell has no request text")
                context = nb.build_code_context(self.doc, cell_id)
                handle = self.pipeline.run_ephemeral_ui(request, context,
                                                        self.kernel, self.panels)
            except EngineError as exc:
                self._emit_panel_error(exc, cell_id)
                raise
            self._panel_origin[handle.panel_id] = (cell_id, request, context)
            self.emit(PANEL_RENDER, {"cell_id": cell_id, **handle.payload.to_json()})
            return handle

    def submit_panel(self, panel_id: str) -> nb.Cell:
        with self._lock:
            self.touch()
            manifest = self.panels.manifest_for(panel_id)  # StalePanel if replaced
            cell_id, request, context = self._panel_origin[panel_id]
            try:
                state = snapshot_state(manifest, self.kernel)
                code = self._inject_with_retry(state, request, context)
            except EngineError as exc:
                self._emit_panel_error(exc, cell_id)
                raise
            anchor = nb.injection_anchor(self.doc, cell_id)
            cell = nb.insert_cell_below(self.doc, anchor, code, nb.INJECTED)
            self.save()
            self.emit(CELL_INJECTED, {
                "anchor_cell_id": cell_id, "new_cell_id": cell.id,
                "code": code, "index": self.doc.index_of(cell.id),
            })
            self.emit(NOTEBOOK_CHANGED, {"version": self.doc.version})
            return cell

    def _inject_with_retry(self, state: dict, request: str,
                           context: nb.CodeContext) -> str:
        try:
            return self.pipeline.inject_code(state, request, context)
        except PipelineError:
            if not self.pipeline.retry_enabled:
                raise
            return self.pipeline.inject_code(state, request, context)

    def _emit_panel_error(self, exc: EngineError, cell_id: str) -> None:
        self.emit(PANEL_ERROR, {"kind": exc.kind, "message": str(exc),
                                "cell_id": cell_id})

    # -- widget channel ------------------------------------------------------------

    def receive_widget_event(self, event: WidgetEvent) -> dict:
        """Apply one client event; rejections come back as acks, not errors."""
        with self._lock:
            self.touch()
            try:
                manifest = self.panels.manifest_for(event.panel_id)
                apply_event(event, manifest, self.kernel)
            except EngineError as exc:
                return {"status": "rejected", "kind": exc.kind,
                        "message": str(exc), "panel_id": event.panel_id,
                        "element_id": event.element_id,
                        "sequence_no": event.sequence_no}
            return {"status": "ok", "panel_id": event.panel_id,
                    "element_id": event.element_id,
                    "sequence_no": event.sequence_no, "value": event.value}

    def close(self) -> None:
        self.kernel.shutdown()


def _outputs_from(result: ExecResult) -> list[dict]:
    outputs: list[dict] = []
    if result.stdout:
        outputs.append({"output_type": "stream", "name": "stdout", "text": result.stdout})
    if result.stderr:
        outputs.append({"output_type": "stream", "name": "stderr", "text": result.stderr})
    if result.error:
        outputs.append({"output_type": "error", "ename": result.error["type"],
                        "evalue": result.error["message"],
                        "traceback": result.error["traceback"].splitlines()})
    elif result.value_repr is not None:
        outputs.append({"output_type": "execute_result", "execution_count": None,
                        "data": {"text/plain": result.value_repr}, "metadata": {}})
    return outputs


class SessionManager:
    """Owns all live sessions; expires the idle ones."""

    def __init__(self, config: EngineConfig | None = None, clock=time.monotonic):
        self.config = config or EngineConfig()
        self.sessions: dict[str, Session] = {}
        self._clock = clock
        self._counter = 0
        self._lock = threading.Lock()
        self._replay_store: TranscriptStore | None = None
        self.record_store: TranscriptStore | None = None
        self.live_transport = None  # injectable for tests and fixture building

    def _shared_replay_store(self) -> TranscriptStore | None:
        if self.config.llm_mode != "replay":
            return None
        if self._replay_store is None and self.config.transcripts_path:
            self._replay_store = TranscriptStore.import_file(self.config.transcripts_path)
        return self._replay_store

    def open_session(self, notebook_path: str | Path) -> Session:
        self.expire_idle()
        path = Path(notebook_path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise nb.MalformedNotebook(f"cannot read {path}: {exc}") from exc
        doc = nb.load_notebook(text)
        kernel = start_session(KernelConfig(
            workdir=str(path.resolve().parent),
            timeout_s=self.config.kernel_timeout_s,
            memory_cap_mb=self.config.kernel_memory_cap_mb,
            env_allowlist=tuple(self.config.kernel_env_allowlist)))
        gateway = build_gateway(self.config,
                                replay_store=self._shared_replay_store(),
                                record_to=self.record_store,
                                live_transport=self.live_transport)
        pipeline = AgentPipeline(gateway, retry_enabled=self.config.retry_enabled)
        with self._lock:
            self._counter += 1
            session = Session(f"s{self._counter}", path, doc, kernel, pipeline,
                              clock=self._clock)
            self.sessions[session.session_id] = session
        logger.info("opened session %s on %s", session.session_id, path)
        return session

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id!r}")
        session.touch()
        return session

    def expire_idle(self) -> None:
        now = self._clock()
        for session_id, session in list(self.sessions.items()):
            if now - session.last_used > self.config.idle_timeout_s:
                logger.info("expiring idle session %s", session_id)
                session.close()
                del self.sessions[session_id]

    def close_all(self) -> None:
        for session in self.sessions.values():
            session.close()
        self.sessions.clear()
