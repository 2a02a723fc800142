import json

import pytest

from nbeui.kernel import KernelConfig, start_session


def v4_cell(cell_type: str, source, cell_id: str, outputs=None, metadata=None) -> dict:
    cell = {"cell_type": cell_type, "id": cell_id,
            "metadata": metadata or {}, "source": source}
    if cell_type == "code":
        cell["execution_count"] = None
        cell["outputs"] = outputs or []
    return cell


def v4_notebook(cells: list[dict]) -> dict:
    return {"cells": cells, "metadata": {}, "nbformat": 4, "nbformat_minor": 5}


@pytest.fixture
def write_notebook(tmp_path):
    """Write a v4 notebook file from cell dicts; returns its path."""
    def _write(cells, name="nb.ipynb"):
        path = tmp_path / name
        path.write_text(json.dumps(v4_notebook(cells)), encoding="utf-8")
        return path
    return _write


@pytest.fixture
def kernel_session():
    session = start_session(KernelConfig(timeout_s=10))
    yield session
    session.shutdown()
