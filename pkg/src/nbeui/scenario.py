"""Headless scenario scripts: open a notebook, trigger, interact, assert.

A script is JSON: the notebook it drives, the llm mode, and an ordered
step list. The runner copies the notebook into a working directory (the
fixture on disk is never touched), drives a session in-process, writes a
JSON-lines trace of every server event, and checks assert steps against
the trace so far. Timestamps live in their own field so golden traces
can be compared after masking.
"""

from __future__ import annotations

import json
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .config import LLM_MODES, EngineConfig
from .errors import (EmptyRequest, EngineError, NotAPromptCell, PipelineError,
                     StaleEvent, StalePanel)
from .notebook import load_notebook
from .session import EVENT_KINDS, ServerEvent, Session, SessionManager
from .widgets import WidgetEvent

STEP_KINDS = ("run_cell", "trigger_suggest", "trigger_ui", "widget_event",
              "submit", "assert")

# Failures a scenario may legitimately observe and assert on; anything
# else aborts the run as an engine error.
EXPECTED_FAILURES = (PipelineError, EmptyRequest, NotAPromptCell, StalePanel,
                     StaleEvent)

EXIT_OK = 0
EXIT_ASSERT_FAILED = 1
EXIT_ENGINE_ERROR = 2


class ScriptError(Exception):
    """Script does not validate; the run never starts."""


@dataclass
class ScenarioScript:
    notebook_path: Path
    steps: list[dict]
    llm_mode: str | None = None
    transcripts: Path | None = None
    stub_responses: dict = field(default_factory=dict)


@dataclass
class RunResult:
    exit_code: int
    message: str
    trace_path: Path | None = None
    notebook_path: Path | None = None
    workdir: Path | None = None


def load_script(path: str | Path) -> ScenarioScript:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ScriptError(f"cannot read script: {exc}") from exc
    if not isinstance(data, dict):
        raise ScriptError("script must be a JSON object")
    notebook = data.get("notebook_path")
    if not isinstance(notebook, str):
        raise ScriptError("script needs a notebook_path string")
    steps = data.get("steps")
    if not isinstance(steps, list):
        raise ScriptError("script needs a steps list")
    llm_mode = data.get("llm_mode")
    if llm_mode is not None and llm_mode not in LLM_MODES:
        raise ScriptError(f"llm_mode must be one of {LLM_MODES}")
    transcripts = data.get("transcripts")
    return ScenarioScript(
        notebook_path=(path.parent / notebook).resolve(),
        steps=steps,
        llm_mode=llm_mode,
        transcripts=(path.parent / transcripts).resolve() if transcripts else None,
        stub_responses=data.get("stub_responses", {}),
    )


def validate_script(script: ScenarioScript) -> None:
    """Static validation; every problem here is an exit-2 before any step runs."""
    if not script.notebook_path.exists():
        raise ScriptError(f"notebook not found: {script.notebook_path}")
    doc = load_notebook(script.notebook_path.read_text(encoding="utf-8"))
    known_ids = {c.id for c in doc.cells}
    panel_available = False
    for i, step in enumerate(script.steps):
        where = f"steps[{i}]"
        if not isinstance(step, dict) or len(step) != 1:
            raise ScriptError(f"{where}: each step is an object with one step key")
        kind, body = next(iter(step.items()))
        if kind not in STEP_KINDS:
            raise ScriptError(f"{where}: unknown step kind {kind!r}")
        if not isinstance(body, dict):
            raise ScriptError(f"{where}: step body must be an object")
        if kind in ("run_cell", "trigger_suggest", "trigger_ui"):
            ref = body.get("cell")
            if isinstance(ref, int):
                if not 0 <= ref < len(doc.cells):
                    raise ScriptError(f"{where}: cell index {ref} out of range")
            elif isinstance(ref, str):
                if ref not in known_ids:
                    raise ScriptError(f"{where}: unknown cell id {ref!r}")
            else:
                raise ScriptError(f"{where}: cell must be an index or id")
        if kind == "trigger_ui":
            panel_available = True
        if kind in ("widget_event", "submit") and not panel_available:
            raise ScriptError(f"{where}: {kind} before any trigger_ui")
        if kind == "widget_event" and "element_id" not in body:
            raise ScriptError(f"{where}: widget_event needs element_id")
        if kind == "assert":
            if body.get("event") not in EVENT_KINDS:
                raise ScriptError(f"{where}: assert needs a valid event kind")
            for pred in body.get("where", []):
                if not isinstance(pred, dict) or "path" not in pred:
                    raise ScriptError(f"{where}: predicates need a path")


def resolve_path(obj, dotted: str):
    """Walk a dotted path through dicts and lists; missing -> (False, None)."""
    current = obj
    for part in dotted.split("."):
        if isinstance(current, list):
            try:
                current = current[int(part)]
            except (ValueError, IndexError):
                return False, None
        elif isinstance(current, dict):
            if part not in current:
                return False, None
            current = current[part]
        else:
            return False, None
    return True, current


def check_predicate(event_json: dict, pred: dict) -> str | None:
    """None when satisfied, else a failure description."""
    found, value = resolve_path(event_json, pred["path"])
    if "exists" in pred:
        if found != bool(pred["exists"]):
            return f"path {pred['path']}: exists is {found}"
        return None
    if not found:
        return f"path {pred['path']} not present"
    if "equals" in pred:
        if value != pred["equals"]:
            return f"path {pred['path']}: {value!r} != {pred['equals']!r}"
        return None
    if "contains" in pred:
        try:
            ok = pred["contains"] in value
        except TypeError:
            ok = False
        if not ok:
            return f"path {pred['path']}: {value!r} does not contain {pred['contains']!r}"
        return None
    return f"predicate for {pred['path']} has no operator"


def eval_assert(events: list[ServerEvent], spec: dict) -> str | None:
    kind = spec["event"]
    where = spec.get("where", [])
    matching = [e.to_json() for e in events if e.kind == kind]
    if "count" in spec:
        satisfying = [e for e in matching
                      if all(check_predicate(e, p) is None for p in where)]
        if len(satisfying) != spec["count"]:
            return (f"expected {spec['count']} {kind} event(s) matching predicates, "
                    f"found {len(satisfying)}")
        return None
    if not matching:
        return f"no {kind} event in trace"
    latest = matching[-1]
    for pred in where:
        problem = check_predicate(latest, pred)
        if problem:
            return f"latest {kind} event: {problem}"
    return None


def masked_trace(path: str | Path) -> str:
    """Trace content with the timestamp field dropped, for golden comparison."""
    lines = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        record = json.loads(line)
        record.pop("ts_ms", None)
        lines.append(json.dumps(record, ensure_ascii=False))
    return "\n".join(lines) + "\n"


class ScenarioRunner:
    def __init__(self, script: ScenarioScript, llm_mode: str | None = None,
                 trace_path: str | Path | None = None,
                 workdir: str | Path | None = None,
                 manager: SessionManager | None = None):
        self.script = script
        self.mode = llm_mode or script.llm_mode or "stub"
        self.workdir = Path(workdir) if workdir else Path(tempfile.mkdtemp(prefix="nbeui-run-"))
        self.trace_path = Path(trace_path) if trace_path else self.workdir / "trace.jsonl"
        self._manager = manager
        self._written_seq = 0

    def _build_manager(self) -> SessionManager:
        if self._manager is not None:
            return self._manager
        config = EngineConfig(
            llm_mode=self.mode,
            transcripts_path=str(self.script.transcripts) if self.script.transcripts else None,
            stub_responses=self.script.stub_responses,
        )
        return SessionManager(config)

    def run(self) -> RunResult:
        validate_script(self.script)
        if self.mode == "replay":
            if not self.script.transcripts or not self.script.transcripts.exists():
                raise ScriptError(f"replay mode needs a transcripts file, "
                                  f"got {self.script.transcripts}")

        self.workdir.mkdir(parents=True, exist_ok=True)
        notebook_copy = self.workdir / self.script.notebook_path.name
        shutil.copyfile(self.script.notebook_path, notebook_copy)

        manager = self._build_manager()
        session = manager.open_session(notebook_copy)
        active_panel: str | None = None
        event_seq = 0
        try:
            with open(self.trace_path, "w", encoding="utf-8") as trace:
                for i, step in enumerate(self.script.steps):
                    kind, body = next(iter(step.items()))
                    try:
                        if kind == "run_cell":
                            session.run_cell(self._cell_id(session, body["cell"]))
                        elif kind == "trigger_suggest":
                            self._try_trigger(session.trigger_suggest,
                                              self._cell_id(session, body["cell"]))
                        elif kind == "trigger_ui":
                            handle = self._try_trigger(session.trigger_ephemeral_ui,
                                                       self._cell_id(session, body["cell"]))
                            if handle is not None:
                                active_panel = handle.panel_id
                                event_seq = 0
                        elif kind == "widget_event":
                            if active_panel is None:
                                raise ScriptError(f"steps[{i}]: no active panel")
                            event_seq = body.get("sequence_no", event_seq + 1)
                            ack = session.receive_widget_event(WidgetEvent(
                                panel_id=body.get("panel_id", active_panel),
                                element_id=body["element_id"],
                                value=body.get("value"),
                                sequence_no=event_seq))
                            if ack["status"] != "ok" and not body.get("allow_rejected"):
                                return self._finish(
                                    EXIT_ENGINE_ERROR,
                                    f"steps[{i}]: widget event rejected: {ack}",
                                    notebook_copy)
                        elif kind == "submit":
                            if active_panel is None:
                                raise ScriptError(f"steps[{i}]: no active panel")
                            self._try_trigger(session.submit_panel,
                                              body.get("panel_id", active_panel))
                        elif kind == "assert":
                            problem = eval_assert(session.events, body)
                            if problem:
                                self._flush(session, trace)
                                return self._finish(
                                    EXIT_ASSERT_FAILED,
                                    f"steps[{i}]: assertion failed: {problem}",
                                    notebook_copy)
                    except EXPECTED_FAILURES:
                        pass  # surfaced as a panel_error event; asserts decide
                    self._flush(session, trace)
            return self._finish(EXIT_OK, "all assertions passed", notebook_copy)
        except ScriptError:
            raise
        except EngineError as exc:
            return self._finish(EXIT_ENGINE_ERROR,
                                f"engine error: {exc.kind}: {exc}", notebook_copy)
        finally:
            manager.close_all()

    @staticmethod
    def _try_trigger(operation, *args):
        try:
            return operation(*args)
        except EXPECTED_FAILURES:
            return None

    @staticmethod
    def _cell_id(session: Session, ref) -> str:
        if isinstance(ref, int):
            return session.doc.cells[ref].id
        return ref

    def _flush(self, session: Session, trace) -> None:
        for event in session.events_since(self._written_seq):
            record = {"ts_ms": event.ts_ms, **event.to_json()}
            trace.write(json.dumps(record, ensure_ascii=False) + "\n")
            self._written_seq = event.server_seq
        trace.flush()

    def _finish(self, exit_code: int, message: str, notebook_copy: Path) -> RunResult:
        return RunResult(exit_code=exit_code, message=message,
                         trace_path=self.trace_path, notebook_path=notebook_copy,
                         workdir=self.workdir)


def run_scenario(script_path: str | Path, llm_mode: str | None = None,
                 trace_path: str | Path | None = None,
                 workdir: str | Path | None = None,
                 manager: SessionManager | None = None) -> RunResult:
    """Load, validate, and run a script; script problems exit 2 up front."""
    try:
        script = load_script(script_path)
        runner = ScenarioRunner(script, llm_mode=llm_mode, trace_path=trace_path,
                                workdir=workdir, manager=manager)
        return runner.run()
    except ScriptError as exc:
        return RunResult(exit_code=EXIT_ENGINE_ERROR, message=f"script error: {exc}")
