"""Stub-response builders shared by the pipeline, session, and acceptance tests."""

import json

SLIDER_PLAN = [{"id": 1, "name": "Bins", "description": "Histogram bin count",
                "widget_kind": "slider", "range": {"min": 1, "max": 20, "step": 1}}]
SLIDER_CODER = {"globals": "bins = 5\n",
                "widgets": '_eui_toolkit.slider(element_id=1, label="Bins", '
                           'minimum=1, maximum=20, step=1)\n'}


def plan_response(elements) -> str:
    return json.dumps(elements)


def coder_response(globals_code: str, widgets_code: str) -> str:
    return json.dumps({"globals": globals_code, "widgets": widgets_code})


def basic_stub(injector_code: str = "print('done')") -> dict:
    """A stub set that renders one slider panel and injects a constant snippet."""
    return {
        "advisor": "Draw a histogram of the values with a configurable bin count.",
        "ui_planner": plan_response(SLIDER_PLAN),
        "ui_coder": json.dumps(SLIDER_CODER),
        "code_injector": injector_code,
        "prompt_suggester": "Plot the distribution of the values.",
    }


def synthesize_coder_response(elements: list[dict]) -> str:
    """Valid coder output for an arbitrary plan, used by randomized tests."""
    defaults = {
        "slider": lambda e: e["range"]["min"],
        "number_input": lambda e: e["range"]["min"],
        "dropdown": lambda e: e["options"][0],
        "checkbox": lambda e: False,
        "color_picker": lambda e: "#336699",
        "textbox": lambda e: "text",
        "image_gallery": lambda e: None,
    }
    globals_lines = []
    widget_lines = []
    for element in elements:
        kind = element["widget_kind"]
        name = f"var_{element['id']}"
        globals_lines.append(f"{name} = {defaults[kind](element)!r}")
        args = f"element_id={element['id']}, label={element['name']!r}"
        if kind in ("slider", "number_input"):
            bounds = element["range"]
            args += (f", minimum={bounds['min']!r}, maximum={bounds['max']!r}, "
                     f"step={bounds['step']!r}")
        elif kind == "dropdown":
            args += f", options={element['options']!r}"
        widget_lines.append(f"_eui_toolkit.{kind}({args})")
    return coder_response("\n".join(globals_lines) + "\n",
                          "\n".join(widget_lines) + "\n")
