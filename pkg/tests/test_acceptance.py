"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
The replay scenarios drive the engine through the checked-in transcript
fixtures; notebook output files are validated against an independent
v4 schema, not against this package's own loader.
"""

import json
import random
import time
from contextlib import contextmanager
from pathlib import Path

import jsonschema
import pytest
from click.testing import CliRunner

from nbeui.cli import main
from nbeui.config import EngineConfig
from nbeui.errors import KernelTimeout
from nbeui.scenario import masked_trace, run_scenario
from nbeui.session import SessionManager
from nbeui.widgets import WidgetEvent, snapshot_state

from conftest import v4_cell, v4_notebook
from helpers import synthesize_coder_response

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"
REPLAY_SCENARIOS = ("image_sampling", "model_construction", "visualization")


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE {name}: FAIL")
        raise
    print(f"\nACCEPTANCE {name}: PASS")


def run_fixture_scenario(name: str, workdir: Path):
    result = run_scenario(FIXTURES / "scenarios" / f"{name}.json", workdir=workdir)
    assert result.exit_code == 0, f"{name}: {result.message}"
    return result


def trace_events(trace_path: Path) -> list[dict]:
    return [json.loads(line) for line in trace_path.read_text().splitlines()]


# --- criterion 1: scenario replay, image sampling -------------------------------

def test_scenario_replay_image_sampling(tmp_path):
    with criterion("scenario replay: image sampling"):
        started = time.monotonic()
        runner = CliRunner()
        outcome = runner.invoke(main, [
            "run-scenario", str(FIXTURES / "scenarios" / "image_sampling.json"),
            "--workdir", str(tmp_path), "--trace", str(tmp_path / "trace.jsonl")])
        elapsed = time.monotonic() - started
        assert outcome.exit_code == 0, outcome.output
        assert elapsed < 10.0, f"took {elapsed:.1f}s"

        events = trace_events(tmp_path / "trace.jsonl")
        renders = [e for e in events if e["kind"] == "panel_render"]
        widgets = renders[-1]["payload"]["manifest"]["widgets"]
        kinds = {w["widget_kind"] for w in widgets}
        assert "dropdown" in kinds and "slider" in kinds
        dropdown = next(w for w in widgets if w["widget_kind"] == "dropdown")
        assert dropdown["options"] == ["cat", "dog"]

        injected = [e for e in events if e["kind"] == "cell_injected"]
        assert len(injected) == 1
        payload = injected[0]["payload"]
        assert payload["anchor_cell_id"] == "p1"
        saved = json.loads((tmp_path / "image_sampling.ipynb").read_text())
        cell_ids = [c["id"] for c in saved["cells"]]
        assert cell_ids.index(payload["new_cell_id"]) == cell_ids.index("p1") + 1
        assert "sample_size = 20" in payload["code"]


# --- criterion 2: scenario replay, model construction and visualization ---------

def test_scenario_replay_model_construction(tmp_path):
    with criterion("scenario replay: model construction"):
        result = run_fixture_scenario("model_construction", tmp_path)
        events = trace_events(result.trace_path)
        widgets = [e for e in events if e["kind"] == "panel_render"][-1][
            "payload"]["manifest"]["widgets"]
        assert widgets[0]["widget_kind"] == "dropdown"
        assert widgets[0]["label"] == "Architecture"
        slider_labels = [w["label"] for w in widgets if w["widget_kind"] == "slider"]
        assert slider_labels == ["Number of Layers", "Units per Layer"]
        assert any(e["kind"] == "cell_injected" for e in events)


def test_scenario_replay_visualization(tmp_path):
    with criterion("scenario replay: visualization"):
        result = run_fixture_scenario("visualization", tmp_path)
        events = trace_events(result.trace_path)
        widgets = [e for e in events if e["kind"] == "panel_render"][-1][
            "payload"]["manifest"]["widgets"]
        assert widgets[0]["widget_kind"] == "dropdown"
        assert widgets[0]["label"] == "Metric"
        pickers = [w for w in widgets if w["widget_kind"] == "color_picker"]
        assert len(pickers) == 2
        injected = [e for e in events if e["kind"] == "cell_injected"][0]
        assert "#2ca02c" in injected["payload"]["code"]


# --- criterion 3: sync fidelity under randomized events -------------------------

VALUE_MAKERS = {
    "slider": lambda rng, w: rng.randint(int(w["range"]["min"]), int(w["range"]["max"])),
    "number_input": lambda rng, w: round(rng.uniform(w["range"]["min"],
                                                     w["range"]["max"]), 3),
    "dropdown": lambda rng, w: rng.choice(w["options"]),
    "checkbox": lambda rng, w: rng.choice([True, False]),
    "color_picker": lambda rng, w: f"#{rng.randrange(16 ** 6):06x}",
    "textbox": lambda rng, w: rng.choice(["alpha", "beta", "gamma", ""]),
    "image_gallery": lambda rng, w: [f"img_{rng.randint(0, 9)}.png"],
}


def random_plan(rng: random.Random) -> list[dict]:
    elements = []
    for element_id in range(1, rng.randint(2, 6)):
        kind = rng.choice(list(VALUE_MAKERS))
        element = {"id": element_id, "name": f"Widget {element_id}",
                   "description": "", "widget_kind": kind}
        if kind in ("slider", "number_input"):
            low = rng.randint(0, 50)
            element["range"] = {"min": low, "max": low + rng.randint(5, 100), "step": 1}
        elif kind == "dropdown":
            element["options"] = rng.sample(["red", "green", "blue", "cyan", "plum"], 3)
        elements.append(element)
    return elements


def test_sync_fidelity_randomized(write_notebook):
    with criterion("sync fidelity: 1000 randomized events"):
        rng = random.Random(20240617)
        current = {"plan": None}
        stub = {
            "advisor": "One concrete step.",
            "ui_planner": lambda messages: json.dumps(current["plan"]),
            "ui_coder": lambda messages: synthesize_coder_response(current["plan"]),
            "code_injector": "pass",
        }
        path = write_notebook([v4_cell("code", "seed = 1\n", "c1"),
                               v4_cell("code", "%prompt randomize widgets", "p1")])
        manager = SessionManager(EngineConfig(llm_mode="stub", stub_responses=stub))
        session = manager.open_session(path)
        try:
            applied_total = 0
            rounds = 0
            while applied_total < 1000:
                rounds += 1
                current["plan"] = random_plan(rng)
                handle = session.trigger_ephemeral_ui("p1")
                manifest = handle.manifest
                expected = {w.label: w.current_value for w in manifest.widgets}
                batch = min(40, 1000 - applied_total)
                for seq in range(1, batch + 1):
                    widget = rng.choice(manifest.widgets)
                    value = VALUE_MAKERS[widget.widget_kind](rng, widget.to_json())
                    ack = session.receive_widget_event(WidgetEvent(
                        handle.panel_id, widget.element_id, value, seq))
                    assert ack["status"] == "ok", ack
                    expected[widget.label] = value
                    applied_total += 1
                assert snapshot_state(manifest, session.kernel) == expected, \
                    f"divergence in round {rounds}"
            assert applied_total == 1000
        finally:
            manager.close_all()


# --- criterion 4: failure handling, one scenario --------------------------------

def test_failure_handling_scenario(tmp_path):
    with criterion("failure handling: empty plan, compile failure, recovery"):
        result = run_fixture_scenario("failure_handling", tmp_path)
        events = trace_events(result.trace_path)
        errors = [e["payload"]["kind"] for e in events if e["kind"] == "panel_error"]
        assert errors == ["EmptyPlan", "CompileFailure"]
        injected = [e for e in events if e["kind"] == "cell_injected"]
        assert len(injected) == 1
        error_seqs = [e["server_seq"] for e in events if e["kind"] == "panel_error"]
        assert max(error_seqs) < injected[0]["server_seq"]  # recovery came after


# --- criterion 5: determinism of replay traces -----------------------------------

def test_replay_traces_deterministic(tmp_path):
    with criterion("determinism: byte-identical masked traces"):
        for name in REPLAY_SCENARIOS + ("failure_handling",):
            first = run_fixture_scenario(name, tmp_path / f"{name}-1")
            second = run_fixture_scenario(name, tmp_path / f"{name}-2")
            assert masked_trace(first.trace_path) == masked_trace(second.trace_path), \
                f"{name} traces diverge"


# --- criterion 6: notebook integrity ---------------------------------------------

MULTILINE = {"oneOf": [{"type": "string"},
                       {"type": "array", "items": {"type": "string"}}]}
OUTPUT_SCHEMA = {
    "type": "object",
    "required": ["output_type"],
    "oneOf": [
        {"properties": {"output_type": {"const": "stream"},
                        "name": {"enum": ["stdout", "stderr"]},
                        "text": MULTILINE},
         "required": ["output_type", "name", "text"]},
        {"properties": {"output_type": {"const": "error"},
                        "ename": {"type": "string"},
                        "evalue": {"type": "string"},
                        "traceback": {"type": "array", "items": {"type": "string"}}},
         "required": ["output_type", "ename", "evalue", "traceback"]},
        {"properties": {"output_type": {"const": "execute_result"},
                        "data": {"type": "object"},
                        "metadata": {"type": "object"},
                        "execution_count": {"type": ["integer", "null"]}},
         "required": ["output_type", "data"]},
        {"properties": {"output_type": {"const": "display_data"}}},
    ],
}
NOTEBOOK_V4_SCHEMA = {
    "type": "object",
    "required": ["cells", "metadata", "nbformat", "nbformat_minor"],
    "properties": {
        "nbformat": {"const": 4},
        "nbformat_minor": {"type": "integer", "minimum": 0},
        "metadata": {"type": "object"},
        "cells": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["cell_type", "metadata", "source"],
                "properties": {
                    "id": {"type": "string", "pattern": "^[a-zA-Z0-9\\-_]{1,64}$"},
                    "metadata": {"type": "object"},
                    "source": MULTILINE,
                },
                "oneOf": [
                    {"properties": {"cell_type": {"const": "markdown"}},
                     "not": {"required": ["outputs"]}},
                    {"properties": {"cell_type": {"const": "code"},
                                    "outputs": {"type": "array",
                                                "items": OUTPUT_SCHEMA},
                                    "execution_count": {"type": ["integer", "null"]}},
                     "required": ["outputs", "execution_count"]},
                ],
            },
        },
    },
}


def test_notebook_integrity(tmp_path, write_notebook):
    with criterion("notebook integrity: v4 valid, injections in order"):
        # Every scenario's saved notebook validates against the v4 schema.
        for name in REPLAY_SCENARIOS + ("failure_handling",):
            result = run_fixture_scenario(name, tmp_path / name)
            saved = json.loads(result.notebook_path.read_text())
            jsonschema.validate(saved, NOTEBOOK_V4_SCHEMA)

        # Repeated submits land in append order directly below the prompt.
        script = {
            "notebook_path": "two_submits.ipynb",
            "llm_mode": "stub",
            "stub_responses": {
                "advisor": "step",
                "ui_planner": json.dumps([{"id": 1, "name": "Bins",
                                           "widget_kind": "slider",
                                           "range": {"min": 1, "max": 9, "step": 1}}]),
                "ui_coder": json.dumps({
                    "globals": "bins = 2\n",
                    "widgets": "_eui_toolkit.slider(element_id=1, label='Bins', "
                               "minimum=1, maximum=9, step=1)\n"}),
                "code_injector": ["print('variant one')", "print('variant two')"],
            },
            "steps": [
                {"trigger_ui": {"cell": "p1"}},
                {"submit": {}},
                {"submit": {}},
            ],
        }
        notebook = write_notebook([v4_cell("code", "data = [1]\n", "c1"),
                                   v4_cell("code", "%prompt plot the data", "p1")],
                                  name="two_submits.ipynb")
        script_path = notebook.parent / "two_submits.json"
        script_path.write_text(json.dumps(script))
        result = run_scenario(script_path, workdir=tmp_path / "two-submits")
        assert result.exit_code == 0, result.message
        saved = json.loads(result.notebook_path.read_text())
        jsonschema.validate(saved, NOTEBOOK_V4_SCHEMA)
        sources = [c["source"] for c in saved["cells"]]
        prompt_at = sources.index("%prompt plot the data")
        assert sources[prompt_at + 1] == "print('variant one')"
        assert sources[prompt_at + 2] == "print('variant two')"
        origins = [c.get("metadata", {}).get("nbeui", {}).get("origin")
                   for c in saved["cells"]]
        assert origins == [None, None, "injected", "injected"]


# --- criterion 7: isolation and timeout -------------------------------------------

def test_isolation_and_timeout(write_notebook):
    with criterion("isolation & timeout: runaway cell killed, neighbor untouched"):
        loop_path = write_notebook(
            [v4_cell("code", "while True:\n    pass\n", "c1")], name="loop.ipynb")
        calm_path = write_notebook(
            [v4_cell("code", "x = 1\n", "c1")], name="calm.ipynb")
        manager = SessionManager(EngineConfig(
            llm_mode="stub", stub_responses={}, kernel_timeout_s=1.0))
        try:
            runaway = manager.open_session(loop_path)
            neighbor = manager.open_session(calm_path)
            digest_before = neighbor.kernel.namespace_digest()
            started = time.monotonic()
            with pytest.raises(KernelTimeout):
                runaway.run_cell("c1")
            elapsed = time.monotonic() - started
            assert elapsed < 1.0 + 2.0, f"kill took {elapsed:.1f}s"
            assert runaway.kernel.state == "dead"
            assert neighbor.kernel.namespace_digest() == digest_before
            assert neighbor.run_cell("c1").ok
        finally:
            manager.close_all()
