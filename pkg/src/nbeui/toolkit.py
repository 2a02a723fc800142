"""Widget toolkit preloaded into every kernel under a reserved name.

Generated widget code calls these constructors instead of hand-writing
HTML: each call registers a manifest entry plus an HTML fragment built
from fixed templates, so rendering is deterministic and the model output
surface stays small. Widget values live in kernel globals named by the
reserved binding prefix, which keeps them clear of user variables even
though the code runs in the notebook namespace.
"""

from __future__ import annotations

import html

RESERVED_TOOLKIT_NAME = "_eui_toolkit"
BINDING_PREFIX = "__eui_"

SLIDER = "slider"
DROPDOWN = "dropdown"
CHECKBOX = "checkbox"
COLOR_PICKER = "color_picker"
TEXTBOX = "textbox"
NUMBER_INPUT = "number_input"
IMAGE_GALLERY = "image_gallery"
WIDGET_KINDS = (SLIDER, DROPDOWN, CHECKBOX, COLOR_PICKER, TEXTBOX,
                NUMBER_INPUT, IMAGE_GALLERY)


def binding_name(element_id: int) -> str:
    return f"{BINDING_PREFIX}{element_id}"


def _esc(value) -> str:
    return html.escape(str(value), quote=True)


class Toolkit:
    """Constructor registry bound to one kernel namespace."""

    def __init__(self, namespace: dict):
        self._namespace = namespace
        self._entries: list[dict] = []

    # -- registry management -------------------------------------------------

    def reset(self) -> None:
        self._entries = []

    def registry_snapshot(self) -> list[dict]:
        return [dict(entry) for entry in self._entries]

    def _register(self, element_id, widget_kind, label, body_html,
                  options=None, value_range=None) -> None:
        if not isinstance(element_id, int) or element_id <= 0:
            raise ValueError(f"element_id must be a positive integer, got {element_id!r}")
        if any(e["element_id"] == element_id for e in self._entries):
            raise ValueError(f"element_id {element_id} registered twice")
        binding = binding_name(element_id)
        default = self._namespace.setdefault(binding, None)
        fragment = (
            f'<div class="eui-widget" data-eui-id="{element_id}">'
            f'<label class="eui-label">{_esc(label)}</label>{body_html}</div>'
        )
        self._entries.append({
            "element_id": element_id,
            "widget_kind": widget_kind,
            "label": str(label),
            "binding": binding,
            "default": default,
            "options": options,
            "range": value_range,
            "html": fragment,
        })

    def _default(self, element_id):
        return self._namespace.get(binding_name(element_id))

    # -- constructors --------------------------------------------------------

    def slider(self, element_id: int, label: str, minimum, maximum, step) -> None:
        if not minimum < maximum:
            raise ValueError(f"slider {label!r}: min {minimum} must be < max {maximum}")
        if not step > 0:
            raise ValueError(f"slider {label!r}: step must be > 0")
        value = self._default(element_id)
        body = (f'<input type="range" min="{_esc(minimum)}" max="{_esc(maximum)}" '
                f'step="{_esc(step)}" value="{_esc(value)}" />')
        self._register(element_id, SLIDER, label, body,
                       value_range={"min": minimum, "max": maximum, "step": step})

    def dropdown(self, element_id: int, label: str, options: list) -> None:
        options = [str(o) for o in options]
        if not options:
            raise ValueError(f"dropdown {label!r}: options must be non-empty")
        value = self._default(element_id)
        parts = []
        for option in options:
            selected = " selected" if option == value else ""
            parts.append(f'<option value="{_esc(option)}"{selected}>{_esc(option)}</option>')
        self._register(element_id, DROPDOWN, label,
                       f'<select>{"".join(parts)}</select>', options=options)

    def checkbox(self, element_id: int, label: str) -> None:
        checked = " checked" if self._default(element_id) else ""
        self._register(element_id, CHECKBOX, label,
                       f'<input type="checkbox"{checked} />')

    def color_picker(self, element_id: int, label: str) -> None:
        value = self._default(element_id) or "#000000"
        self._register(element_id, COLOR_PICKER, label,
                       f'<input type="color" value="{_esc(value)}" />')

    def textbox(self, element_id: int, label: str) -> None:
        value = self._default(element_id)
        value = "" if value is None else value
        self._register(element_id, TEXTBOX, label,
                       f'<input type="text" value="{_esc(value)}" />')

    def number_input(self, element_id: int, label: str, minimum, maximum, step) -> None:
        if not minimum < maximum:
            raise ValueError(f"number_input {label!r}: min must be < max")
        if not step > 0:
            raise ValueError(f"number_input {label!r}: step must be > 0")
        value = self._default(element_id)
        body = (f'<input type="number" min="{_esc(minimum)}" max="{_esc(maximum)}" '
                f'step="{_esc(step)}" value="{_esc(value)}" />')
        self._register(element_id, NUMBER_INPUT, label, body,
                       value_range={"min": minimum, "max": maximum, "step": step})

    def image_gallery(self, element_id: int, label: str, items: list | None = None) -> None:
        figures = "".join(
            f'<figure><img src="{_esc(item)}" alt="{_esc(item)}" /></figure>'
            for item in (items or [])
        )
        self._register(element_id, IMAGE_GALLERY, label,
                       f'<div class="eui-gallery">{figures}</div>')
