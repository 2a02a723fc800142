"""The agent chain: advisor, UI planner, UI coder, and code injector.

The advisor turns a request into one concrete next step; the planner
describes widgets as JSON; the coder emits a globals snippet and a
widget-construction snippet that run in the kernel; after the user
interacts with the rendered panel, the injector turns the widget values
plus the original request into the code that lands in the notebook. A
separate suggester produces request ideas for the light-bulb button.

Nothing here repairs model output beyond one mechanical JSON cleanup
pass: a bad generation is surfaced as a typed error so the client can
simply regenerate.
"""

from __future__ import annotations

import ast
import io
import itertools
import json
import re
import tokenize
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

from . import gateway as gw
from .errors import (CompileFailure, EmptyAdvice, EmptyGeneration, EmptyPlan,
                     EmptyRequest, EmptySuggestion, KernelDead, KernelError,
                     KernelTimeout, MalformedPlan, ManifestMismatch,
                     PipelineError)
from .kernel import KernelSession, compile_check
from .notebook import CodeContext
from .toolkit import WIDGET_KINDS, binding_name

if TYPE_CHECKING:
    from .widgets import PanelRegistry, RenderPayload, WidgetManifest

TEMPLATE_DIR = Path(__file__).parent / "templates"
TEMPLATE_SLOTS = ("request", "focal_code", "preamble", "instruction",
                  "ui_plan", "widget_state")

_SLOT_PATTERN = re.compile(r"\{(%s)\}" % "|".join(TEMPLATE_SLOTS))

_handle_counter = itertools.count(1)


def render_template(agent_id: str, **slots: str) -> str:
    """Fill the agent's template file. Only the known slot tokens are
    replaced, so literal braces in template text survive untouched."""
    text = (TEMPLATE_DIR / f"{agent_id}.txt").read_text(encoding="utf-8")
    return _SLOT_PATTERN.sub(lambda m: slots.get(m.group(1), m.group(0)), text)


# --- domain types -------------------------------------------------------------

@dataclass
class AdvisorInstruction:
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("instruction must be non-empty")


@dataclass
class UIPlanElement:
    element_id: int
    name: str
    description: str = ""
    widget_kind: str = "textbox"
    options: list[str] | None = None
    range: dict | None = None

    def to_json(self) -> dict:
        data: dict = {"id": self.element_id, "name": self.name,
                      "description": self.description,
                      "widget_kind": self.widget_kind}
        if self.options is not None:
            data["options"] = self.options
        if self.range is not None:
            data["range"] = self.range
        return data


@dataclass
class UIPlan:
    elements: list[UIPlanElement]
    instruction: AdvisorInstruction

    def to_json(self) -> list[dict]:
        return [e.to_json() for e in self.elements]


@dataclass
class UICodeBundle:
    globals_snippet: str
    widgets_snippet: str
    bindings: dict[int, str]  # element_id -> kernel global name


@dataclass
class EphemeralUiHandle:
    """Result of one successful panel generation."""

    plan: UIPlan
    bindings: dict[int, str]
    manifest: "WidgetManifest"
    payload: "RenderPayload"
    panel_id: str
    superseded: bool = False


# --- model-output parsing ----------------------------------------------------

def strip_code_fences(text: str) -> str:
    stripped = text.strip()
    if not stripped.startswith("```"):
        return stripped
    lines = stripped.splitlines()
    lines = lines[1:]
    if lines and lines[-1].strip().startswith("```"):
        lines = lines[:-1]
    return "\n".join(lines).strip()


def repair_json(text: str) -> str:
    """The single mechanical cleanup pass: drop code fences, drop trailing
    commas. Anything still unparseable afterwards is a typed failure."""
    cleaned = strip_code_fences(text)
    return re.sub(r",\s*([}\]])", r"\1", cleaned)


def _parse_plan_elements(raw: str) -> list[dict]:
    try:
        data = json.loads(raw)
    except json.JSONDecodeError:
        try:
            data = json.loads(repair_json(raw))
        except json.JSONDecodeError as exc:
            raise MalformedPlan(f"planner output is not JSON: {exc}") from exc
    if isinstance(data, dict) and isinstance(data.get("elements"), list):
        data = data["elements"]
    if not isinstance(data, list):
        raise MalformedPlan("planner output is not a JSON array of elements")
    if not all(isinstance(item, dict) for item in data):
        raise MalformedPlan("planner elements must be JSON objects")
    return data


def _validate_element(item: dict) -> UIPlanElement:
    element_id = item.get("id")
    if not isinstance(element_id, int) or isinstance(element_id, bool) or element_id <= 0:
        raise MalformedPlan(f"element id must be a positive integer, got {element_id!r}")
    name = item.get("name")
    if not isinstance(name, str) or not name.strip():
        raise MalformedPlan(f"element {element_id}: name must be a non-empty string")
    kind = item.get("widget_kind")
    if kind not in WIDGET_KINDS:
        raise MalformedPlan(f"element {element_id}: unknown widget_kind {kind!r}")
    options = item.get("options")
    value_range = item.get("range")
    if kind == "dropdown":
        if not isinstance(options, list) or not options:
            raise MalformedPlan(f"element {element_id}: dropdown requires non-empty options")
        options = [str(o) for o in options]
    if kind in ("slider", "number_input"):
        if not isinstance(value_range, dict):
            raise MalformedPlan(f"element {element_id}: {kind} requires a range")
        try:
            minimum, maximum, step = (value_range[k] for k in ("min", "max", "step"))
        except KeyError as exc:
            raise MalformedPlan(f"element {element_id}: range missing {exc}") from exc
        if not (isinstance(minimum, (int, float)) and isinstance(maximum, (int, float))
                and isinstance(step, (int, float))):
            raise MalformedPlan(f"element {element_id}: range values must be numbers")
        if not minimum < maximum:
            raise MalformedPlan(f"element {element_id}: range min must be < max")
        if not step > 0:
            raise MalformedPlan(f"element {element_id}: range step must be > 0")
        value_range = {"min": minimum, "max": maximum, "step": step}
    return UIPlanElement(element_id=element_id, name=name.strip(),
                         description=str(item.get("description", "")),
                         widget_kind=kind, options=options, range=value_range)


def top_level_assigned_names(code: str) -> list[str]:
    """Module-level names bound by assignment, in source order."""
    names: list[str] = []
    for node in ast.parse(code).body:
        targets: list[ast.expr] = []
        if isinstance(node, ast.Assign):
            targets = node.targets
        elif isinstance(node, ast.AnnAssign) and node.value is not None:
            targets = [node.target]
        for target in targets:
            parts = target.elts if isinstance(target, (ast.Tuple, ast.List)) else [target]
            names.extend(p.id for p in parts if isinstance(p, ast.Name))
    return names


def rename_identifiers(code: str, mapping: dict[str, str]) -> str:
    """Rename identifiers token-wise, leaving strings and comments alone."""
    if not mapping:
        return code
    tokens = []
    reader = io.BytesIO(code.encode("utf-8")).readline
    for tok in tokenize.tokenize(reader):
        if tok.type == tokenize.NAME and tok.string in mapping:
            tokens.append((tok.type, mapping[tok.string]))
        else:
            tokens.append((tok.type, tok.string))
    return tokenize.untokenize(tokens).decode("utf-8")


def format_widget_state(state: dict) -> str:
    return "\n".join(f"- {label}: {json.dumps(value)}" for label, value in state.items())


# --- the pipeline -------------------------------------------------------------

class AgentPipeline:
    """Four chained agents plus the prompt suggester, over one gateway."""

    def __init__(self, llm_gateway: gw.LlmGateway, retry_enabled: bool = False):
        self.gateway = llm_gateway
        self.retry_enabled = retry_enabled

    def _preamble_text(self, context: CodeContext) -> str:
        return gw.render_context(context.preamble, self.gateway.context_budget)

    def advise(self, request: str, context: CodeContext) -> AdvisorInstruction:
        if not request.strip():
            raise EmptyRequest("request must be non-empty")
        rendered = render_template(gw.ADVISOR, request=request,
                                   focal_code=context.focal_code,
                                   preamble=self._preamble_text(context))
        raw = self.gateway.complete(gw.ADVISOR, rendered).strip()
        if not raw:
            raise EmptyAdvice("advisor returned an empty response")
        # Multi-paragraph answers collapse to the first paragraph.
        return AdvisorInstruction(raw.split("\n\n")[0].strip())

    def plan_ui(self, instruction: AdvisorInstruction, request: str,
                context: CodeContext) -> UIPlan:
        rendered = render_template(gw.UI_PLANNER, instruction=instruction.text,
                                   request=request, focal_code=context.focal_code,
                                   preamble=self._preamble_text(context))
        raw = self.gateway.complete(gw.UI_PLANNER, rendered)
        if not raw.strip():
            raise EmptyPlan("planner returned an empty response")
        items = _parse_plan_elements(raw)
        if not items:
            raise EmptyPlan("planner returned no elements")
        elements = [_validate_element(item) for item in items]
        seen: set[int] = set()
        for element in elements:
            if element.element_id in seen:
                raise MalformedPlan(f"duplicate element id {element.element_id}")
            seen.add(element.element_id)
        return UIPlan(elements=elements, instruction=instruction)

    def code_ui(self, plan: UIPlan, context: CodeContext) -> UICodeBundle:
        if not plan.elements:
            raise ValueError("plan has no elements")
        rendered = render_template(
            gw.UI_CODER,
            ui_plan=json.dumps(plan.to_json(), ensure_ascii=False, indent=2),
            focal_code=context.focal_code)
        raw = self.gateway.complete(gw.UI_CODER, rendered)
        if not raw.strip():
            raise EmptyGeneration("widget coder returned an empty response")
        try:
            data = json.loads(repair_json(raw))
        except json.JSONDecodeError as exc:
            raise CompileFailure(f"widget code response is not valid JSON: {exc}") from exc
        if not isinstance(data, dict) or not isinstance(data.get("globals"), str) \
                or not isinstance(data.get("widgets"), str):
            raise CompileFailure("widget code response must carry globals and widgets snippets")

        globals_snippet, widgets_snippet = data["globals"], data["widgets"]
        for label, snippet in (("globals", globals_snippet), ("widgets", widgets_snippet)):
            diagnostic = compile_check(snippet)
            if diagnostic is not None:
                raise CompileFailure(
                    f"{label} snippet: line {diagnostic.line}: {diagnostic.message}",
                    line=diagnostic.line)

        # Bindings are synthesized from element ids: whatever names the model
        # declared are rewritten positionally to the reserved-prefix names.
        declared = top_level_assigned_names(globals_snippet)
        if len(declared) != len(plan.elements):
            raise CompileFailure(
                f"globals snippet declares {len(declared)} names "
                f"for {len(plan.elements)} plan elements")
        bindings = {e.element_id: binding_name(e.element_id) for e in plan.elements}
        mapping = {old: bindings[e.element_id]
                   for old, e in zip(declared, plan.elements) if old != bindings[e.element_id]}
        try:
            globals_snippet = rename_identifiers(globals_snippet, mapping)
            widgets_snippet = rename_identifiers(widgets_snippet, mapping)
        except tokenize.TokenError as exc:
            raise CompileFailure(f"could not rewrite binding names: {exc}") from exc
        return UICodeBundle(globals_snippet=globals_snippet,
                            widgets_snippet=widgets_snippet, bindings=bindings)

    def inject_code(self, state: dict, request: str, context: CodeContext) -> str:
        if not state:
            raise ValueError("widget state is empty")
        rendered = render_template(gw.CODE_INJECTOR, request=request,
                                   focal_code=context.focal_code,
                                   preamble=self._preamble_text(context),
                                   widget_state=format_widget_state(state))
        raw = self.gateway.complete(gw.CODE_INJECTOR, rendered)
        code = strip_code_fences(raw)
        if not code:
            raise EmptyGeneration("code injector returned an empty response")
        diagnostic = compile_check(code)
        if diagnostic is not None:
            raise CompileFailure(
                f"injected code: line {diagnostic.line}: {diagnostic.message}",
                line=diagnostic.line)
        return code

    def suggest_prompt(self, existing_request: str | None,
                       context: CodeContext) -> str:
        rendered = render_template(gw.PROMPT_SUGGESTER,
                                   request=existing_request or "",
                                   focal_code=context.focal_code,
                                   preamble=self._preamble_text(context))
        raw = self.gateway.complete(gw.PROMPT_SUGGESTER, rendered).strip()
        if not raw:
            raise EmptySuggestion("suggester returned an empty response")
        return raw

    # -- orchestration --------------------------------------------------------

    def run_ephemeral_ui(self, request: str, context: CodeContext,
                         kernel_session: KernelSession,
                         panels: "PanelRegistry") -> EphemeralUiHandle:
        """Full chain through widget render; one retry when enabled.

        A failed run leaves the kernel namespace unchanged except for
        bound globals that were already declared; those reserved-prefix
        names are overwritten by the next run.
        """
        try:
            return self._run_once(request, context, kernel_session, panels)
        except PipelineError:
            if not self.retry_enabled:
                raise
            return self._run_once(request, context, kernel_session, panels)

    def _run_once(self, request: str, context: CodeContext,
                  kernel_session: KernelSession,
                  panels: "PanelRegistry") -> EphemeralUiHandle:
        from .widgets import render  # local import to avoid a module cycle

        instruction = self.advise(request, context)
        plan = self.plan_ui(instruction, request, context)
        bundle = self.code_ui(plan, context)
        try:
            kernel_session.eval_json("_eui_toolkit.reset()")
            for label, snippet in (("globals", bundle.globals_snippet),
                                   ("widgets", bundle.widgets_snippet)):
                result = kernel_session.execute(snippet)
                if not result.ok:
                    error = result.error or {}
                    raise KernelError(
                        f"{label} snippet failed in kernel: "
                        f"{error.get('type')}: {error.get('message')}")
            payload = render(bundle, plan, kernel_session, panels)
        except (KernelTimeout, KernelDead) as exc:
            raise KernelError(str(exc)) from exc
        except ManifestMismatch as exc:
            # Widget code ran but registered the wrong element set; for
            # clients this is a kernel-stage failure to regenerate from.
            raise KernelError(str(exc)) from exc
        handle = EphemeralUiHandle(plan=plan, bindings=bundle.bindings,
                                   manifest=payload.manifest, payload=payload,
                                   panel_id=payload.manifest.panel_id)
        panels.activate(handle)
        return handle
