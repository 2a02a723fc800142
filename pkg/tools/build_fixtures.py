#!/usr/bin/env python3
"""Regenerate the fixture notebooks and replay transcripts.

The authored model responses below are played through the real engine in
live mode with a scripted transport, recording transcripts keyed by the
same fingerprints the replay backend computes at run time. Re-run this
after changing any agent template or fixture notebook source:

    python tools/build_fixtures.py
"""

import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from nbeui.config import EngineConfig  # noqa: E402
from nbeui.gateway import TranscriptStore  # noqa: E402
from nbeui.scenario import ScenarioRunner, load_script  # noqa: E402
from nbeui.session import SessionManager  # noqa: E402

FIXTURES = REPO / "fixtures"

# --- notebook sources ----------------------------------------------------------

DATASET_CELL = """\
dataset = {
    "cat": [f"images/cat_{i:03d}.png" for i in range(40)],
    "dog": [f"images/dog_{i:03d}.png" for i in range(40)],
}
labels = sorted(dataset)
"""

MODEL_CELL = """\
input_dim = 32
model_layers = [("dense", 64), ("dense", 64), ("dense", 1)]
"""

HISTORY_CELL = """\
history = {
    "loss": [0.92, 0.71, 0.55, 0.43, 0.36],
    "val_loss": [0.95, 0.80, 0.63, 0.52, 0.47],
    "accuracy": [0.58, 0.71, 0.80, 0.86, 0.90],
    "val_accuracy": [0.55, 0.68, 0.77, 0.82, 0.85],
}
"""

VALUES_CELL = "values = [3, 1, 4, 1, 5, 9, 2, 6]\n"


def code_cell(cell_id: str, source: str) -> dict:
    return {"cell_type": "code", "id": cell_id, "metadata": {},
            "execution_count": None, "outputs": [], "source": source}


def markdown_cell(cell_id: str, source: str) -> dict:
    return {"cell_type": "markdown", "id": cell_id, "metadata": {}, "source": source}


def write_notebook(name: str, cells: list[dict]) -> None:
    data = {"cells": cells, "metadata": {}, "nbformat": 4, "nbformat_minor": 5}
    path = FIXTURES / "notebooks" / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=1, ensure_ascii=False) + "\n",
                    encoding="utf-8")
    print(f"wrote {path.relative_to(REPO)}")


NOTEBOOKS = {
    "image_sampling.ipynb": [
        markdown_cell("m1", "# Image classification tutorial\n\n"
                            "Load the dataset index, then look at a few samples."),
        code_cell("c1", DATASET_CELL),
        code_cell("p1", "%prompt Show me a sample of the dataset images."),
    ],
    "model_construction.ipynb": [
        markdown_cell("m1", "# Define the model\n\n"
                            "A small stack of dense layers for the classifier."),
        code_cell("c1", MODEL_CELL),
        code_cell("p1", "%prompt What are some other ways to construct the model"),
    ],
    "visualization.ipynb": [
        markdown_cell("m1", "# Training results"),
        code_cell("c1", HISTORY_CELL),
        code_cell("p1", "%prompt Visualize the training performance."),
    ],
    "failure_demo.ipynb": [
        code_cell("c1", VALUES_CELL),
        code_cell("p1", "%prompt Plot a histogram of the values."),
    ],
    "e2e_start.ipynb": [
        code_cell("c1", DATASET_CELL),
        code_cell("p1", ""),
    ],
}

# --- authored model responses, per scenario -------------------------------------

IMAGE_SAMPLING = {
    "advisor": [
        "Sample a handful of images for one label from `dataset` and display "
        "them in a small gallery, so you can see what that class looks like "
        "before training."],
    "ui_planner": [json.dumps([
        {"id": 1, "name": "Label",
         "description": "Which class to sample images from",
         "widget_kind": "dropdown", "options": ["cat", "dog"]},
        {"id": 2, "name": "Sample Size",
         "description": "How many images to display",
         "widget_kind": "slider", "range": {"min": 1, "max": 50, "step": 1}},
        {"id": 3, "name": "Sample Images",
         "description": "Preview of the sampled images",
         "widget_kind": "image_gallery"},
    ])],
    "ui_coder": [json.dumps({
        "globals": 'selected_label = "cat"\nsample_size = 10\nsample_preview = None\n',
        "widgets": (
            '_eui_toolkit.dropdown(element_id=1, label="Label", options=labels)\n'
            '_eui_toolkit.slider(element_id=2, label="Sample Size", '
            'minimum=1, maximum=50, step=1)\n'
            '_eui_toolkit.image_gallery(element_id=3, label="Sample Images", '
            'items=dataset[selected_label][:sample_size])\n'),
    })],
    "code_injector": ["""\
import random

label = "cat"
sample_size = 20
sample = random.sample(dataset[label], k=min(sample_size, len(dataset[label])))
for path in sample:
    print(path)"""],
}

MODEL_CONSTRUCTION = {
    "advisor": [
        "Rebuild `model_layers` with a different architecture: vary the layer "
        "count and units per layer, and optionally insert dropout between the "
        "hidden layers."],
    "ui_planner": [json.dumps([
        {"id": 1, "name": "Architecture", "description": "Overall model family",
         "widget_kind": "dropdown", "options": ["dense", "convolutional", "recurrent"]},
        {"id": 2, "name": "Number of Layers", "description": "Hidden layer count",
         "widget_kind": "slider", "range": {"min": 1, "max": 8, "step": 1}},
        {"id": 3, "name": "Units per Layer", "description": "Width of each hidden layer",
         "widget_kind": "slider", "range": {"min": 8, "max": 256, "step": 8}},
        {"id": 4, "name": "Use Dropout",
         "description": "Insert dropout after each hidden layer",
         "widget_kind": "checkbox"},
        {"id": 5, "name": "Dropout Rate", "description": "Fraction of units to drop",
         "widget_kind": "number_input", "range": {"min": 0.0, "max": 0.9, "step": 0.05}},
    ])],
    "ui_coder": [json.dumps({
        "globals": ('architecture = "dense"\nnum_layers = 2\nunits_per_layer = 64\n'
                    'use_dropout = False\ndropout_rate = 0.2\n'),
        "widgets": (
            '_eui_toolkit.dropdown(element_id=1, label="Architecture", '
            'options=["dense", "convolutional", "recurrent"])\n'
            '_eui_toolkit.slider(element_id=2, label="Number of Layers", '
            'minimum=1, maximum=8, step=1)\n'
            '_eui_toolkit.slider(element_id=3, label="Units per Layer", '
            'minimum=8, maximum=256, step=8)\n'
            '_eui_toolkit.checkbox(element_id=4, label="Use Dropout")\n'
            '_eui_toolkit.number_input(element_id=5, label="Dropout Rate", '
            'minimum=0.0, maximum=0.9, step=0.05)\n'),
    })],
    "code_injector": ["""\
architecture = "dense"
hidden_layers = 3
units_per_layer = 128
dropout_rate = 0.2

model_layers = []
for _ in range(hidden_layers):
    model_layers.append(("dense", units_per_layer))
    model_layers.append(("dropout", dropout_rate))
model_layers.append(("dense", 1))
print(model_layers)"""],
}

VISUALIZATION = {
    "advisor": [
        "Plot the curves in `history` against epochs as a line chart, one line "
        "for the training metric and one for its validation counterpart."],
    "ui_planner": [json.dumps([
        {"id": 1, "name": "Metric", "description": "Training metric to plot",
         "widget_kind": "dropdown", "options": ["loss", "accuracy"]},
        {"id": 2, "name": "Training Color",
         "description": "Line color for the training curve",
         "widget_kind": "color_picker"},
        {"id": 3, "name": "Validation Color",
         "description": "Line color for the validation curve",
         "widget_kind": "color_picker"},
    ])],
    "ui_coder": [json.dumps({
        "globals": 'metric = "loss"\ntrain_color = "#1f77b4"\nval_color = "#ff7f0e"\n',
        "widgets": (
            '_eui_toolkit.dropdown(element_id=1, label="Metric", '
            'options=["loss", "accuracy"])\n'
            '_eui_toolkit.color_picker(element_id=2, label="Training Color")\n'
            '_eui_toolkit.color_picker(element_id=3, label="Validation Color")\n'),
    })],
    "code_injector": ["""\
import matplotlib.pyplot as plt

metric = "loss"
epochs = range(1, len(history[metric]) + 1)
plt.plot(epochs, history[metric], color="#2ca02c", label=f"training {metric}")
plt.plot(epochs, history["val_" + metric], color="#ff7f0e", label=f"validation {metric}")
plt.xlabel("epoch")
plt.ylabel(metric)
plt.legend()
plt.title("Training performance")
plt.show()"""],
}

SCENARIOS = {
    "image_sampling": IMAGE_SAMPLING,
    "model_construction": MODEL_CONSTRUCTION,
    "visualization": VISUALIZATION,
}


def scripted_transport(responses: dict):
    queues = {agent: list(texts) for agent, texts in responses.items()}

    def transport(config, messages):
        queue = queues.get(config.agent_id)
        if not queue:
            raise AssertionError(f"no scripted response left for {config.agent_id}")
        return queue.pop(0)

    return transport


def record(name: str, responses: dict) -> None:
    script = load_script(FIXTURES / "scenarios" / f"{name}.json")
    store = TranscriptStore()
    manager = SessionManager(EngineConfig(llm_mode="live"))
    manager.record_store = store
    manager.live_transport = scripted_transport(responses)
    result = ScenarioRunner(script, llm_mode="live", manager=manager).run()
    if result.exit_code != 0:
        raise SystemExit(f"{name}: scenario failed during recording: {result.message}")
    out = FIXTURES / "transcripts" / f"{name}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    store.export_file(out)
    print(f"wrote {out.relative_to(REPO)} ({len(store)} entries)")


def main() -> None:
    for name, cells in NOTEBOOKS.items():
        write_notebook(name, cells)
    for name, responses in SCENARIOS.items():
        record(name, responses)


if __name__ == "__main__":
    main()
