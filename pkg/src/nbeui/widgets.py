"""Widget runtime: panels, manifests, and real-time value sync.

Turns an executed code bundle into a render payload plus a structured
manifest, and applies client widget events to the bound kernel globals.
A session has at most one panel accepting events; regenerating replaces
the panel wholesale.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .errors import (ManifestMismatch, StaleEvent, StalePanel, UnknownElement,
                     ValueOutOfDomain)
from .kernel import KernelSession
from .kernel_worker import is_syncable
from .toolkit import (CHECKBOX, COLOR_PICKER, DROPDOWN, IMAGE_GALLERY,
                      NUMBER_INPUT, SLIDER, TEXTBOX)

if TYPE_CHECKING:
    from .pipeline import EphemeralUiHandle, UICodeBundle, UIPlan

COLOR_PATTERN = re.compile(r"^#[0-9a-fA-F]{6}$")


@dataclass
class WidgetInfo:
    element_id: int
    widget_kind: str
    label: str
    binding: str
    current_value: object = None
    options: list[str] | None = None
    range: dict | None = None

    def to_json(self) -> dict:
        data: dict = {"element_id": self.element_id, "widget_kind": self.widget_kind,
                      "label": self.label, "binding": self.binding,
                      "current_value": self.current_value}
        if self.options is not None:
            data["options"] = self.options
        if self.range is not None:
            data["range"] = self.range
        return data


@dataclass
class WidgetManifest:
    panel_id: str
    widgets: list[WidgetInfo]
    submit_present: bool = True  # every panel carries exactly one submit control
    last_applied_seq: int = 0

    def widget(self, element_id: int) -> WidgetInfo:
        for info in self.widgets:
            if info.element_id == element_id:
                return info
        raise UnknownElement(f"no element {element_id} in panel {self.panel_id}")

    def to_json(self) -> dict:
        return {"panel_id": self.panel_id,
                "widgets": [w.to_json() for w in self.widgets],
                "submit_present": self.submit_present}


@dataclass
class RenderPayload:
    html: str
    manifest: WidgetManifest

    def to_json(self) -> dict:
        return {"html": self.html, "manifest": self.manifest.to_json()}


@dataclass
class WidgetEvent:
    panel_id: str
    element_id: int
    value: object
    sequence_no: int


class PanelRegistry:
    """Per-session panel lifecycle: one active panel, the rest superseded."""

    def __init__(self):
        self._counter = 0
        self._manifests: dict[str, WidgetManifest] = {}
        self.active_panel_id: str | None = None
        self._active_handle = None

    def new_panel_id(self) -> str:
        self._counter += 1
        return f"panel-{self._counter}"

    def replace_panel(self, old_panel_id: str | None, new_payload: RenderPayload) -> str:
        """Activate the new panel; the old one (if any) stops accepting events.

        Panel identity is per-generation: re-rendering an identical
        payload still yields the fresh id minted at render time.
        """
        panel_id = new_payload.manifest.panel_id
        self._manifests[panel_id] = new_payload.manifest
        self.active_panel_id = panel_id
        return panel_id

    def activate(self, handle: "EphemeralUiHandle") -> None:
        if self._active_handle is not None:
            self._active_handle.superseded = True
        self.replace_panel(self.active_panel_id, handle.payload)
        self._active_handle = handle

    def active_manifest(self) -> WidgetManifest | None:
        if self.active_panel_id is None:
            return None
        return self._manifests[self.active_panel_id]

    def manifest_for(self, panel_id: str) -> WidgetManifest:
        """Manifest of the active panel; superseded or unknown panels reject."""
        if panel_id != self.active_panel_id:
            raise StalePanel(f"panel {panel_id} is not the active panel")
        return self._manifests[panel_id]


def render(bundle: "UICodeBundle", plan: "UIPlan", session: KernelSession,
           panels: PanelRegistry) -> RenderPayload:
    """Collect the toolkit registrations into a manifest plus panel HTML.

    The bundle's snippets must already have executed in the session.
    Each widget's current value is its declared default, read fresh from
    the kernel.
    """
    entries = {e["element_id"]: e for e in session.eval_json("_eui_toolkit.registry_snapshot()")}
    planned = {e.element_id: e for e in plan.elements}
    if set(entries) != set(planned):
        raise ManifestMismatch(
            f"toolkit registered elements {sorted(entries)} "
            f"but the plan has {sorted(planned)}")
    for element_id, planned_element in planned.items():
        got = entries[element_id]["widget_kind"]
        if got != planned_element.widget_kind:
            raise ManifestMismatch(
                f"element {element_id}: plan says {planned_element.widget_kind}, "
                f"toolkit registered {got}")

    panel_id = panels.new_panel_id()
    widgets: list[WidgetInfo] = []
    fragments: list[str] = []
    for element in plan.elements:  # manifest and html follow plan order
        entry = entries[element.element_id]
        widgets.append(WidgetInfo(
            element_id=element.element_id,
            widget_kind=entry["widget_kind"],
            label=entry["label"],
            binding=entry["binding"],
            current_value=session.get_global(entry["binding"]),
            options=entry.get("options"),
            range=entry.get("range"),
        ))
        fragments.append(entry["html"])
    html = (
        f'<div class="eui-panel" data-eui-panel="{panel_id}">'
        + "".join(fragments)
        + '<div class="eui-submit"><button data-eui-submit="1">Submit</button></div></div>'
    )
    return RenderPayload(html=html, manifest=WidgetManifest(panel_id=panel_id, widgets=widgets))


def _check_domain(info: WidgetInfo, value) -> None:
    kind = info.widget_kind
    if kind in (SLIDER, NUMBER_INPUT):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueOutOfDomain(f"{info.label}: expected a number, got {value!r}")
        bounds = info.range or {}
        if not bounds.get("min") <= value <= bounds.get("max"):
            raise ValueOutOfDomain(
                f"{info.label}: {value} outside [{bounds.get('min')}, {bounds.get('max')}]")
    elif kind == DROPDOWN:
        if value not in (info.options or []):
            raise ValueOutOfDomain(f"{info.label}: {value!r} is not one of the options")
    elif kind == CHECKBOX:
        if not isinstance(value, bool):
            raise ValueOutOfDomain(f"{info.label}: expected a boolean, got {value!r}")
    elif kind == COLOR_PICKER:
        if not isinstance(value, str) or not COLOR_PATTERN.match(value):
            raise ValueOutOfDomain(f"{info.label}: expected a #rrggbb color, got {value!r}")
    elif kind == TEXTBOX:
        if not isinstance(value, str):
            raise ValueOutOfDomain(f"{info.label}: expected a string, got {value!r}")
    elif kind == IMAGE_GALLERY:
        if not is_syncable(value):
            raise ValueOutOfDomain(f"{info.label}: value is not syncable")


def apply_event(event: WidgetEvent, manifest: WidgetManifest,
                session: KernelSession) -> WidgetManifest:
    """Write one widget event through to its kernel global.

    Events apply strictly in sequence order per panel; the global and the
    manifest's cached value are only touched after validation passes.
    """
    info = manifest.widget(event.element_id)
    if event.sequence_no <= manifest.last_applied_seq:
        raise StaleEvent(
            f"sequence {event.sequence_no} <= last applied {manifest.last_applied_seq}")
    _check_domain(info, event.value)
    session.set_global(info.binding, event.value)
    manifest.last_applied_seq = event.sequence_no
    info.current_value = event.value
    return manifest


def snapshot_state(manifest: WidgetManifest, session: KernelSession) -> dict:
    """Widget label -> current kernel value, read fresh for every binding."""
    return {info.label: session.get_global(info.binding) for info in manifest.widgets}
