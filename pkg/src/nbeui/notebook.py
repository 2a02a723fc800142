"""Notebook document model: cells, prompt-cell detection, code context, injection.

Documents round-trip through the Jupyter v4 interchange format. Prompt
cells are stored as ordinary code cells whose source begins with the
``%prompt`` marker, so files stay loadable by stock notebook tools.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import MalformedNotebook, NotAPromptCell, UnknownCell

PROMPT_MARKER = "%prompt"

# Cell kinds
CODE = "code"
MARKDOWN = "markdown"
PROMPT = "prompt"

# Cell origins
AUTHORED = "authored"
INJECTED = "injected"


@dataclass
class Cell:
    """One notebook cell. ``outputs`` holds raw interchange output records."""

    id: str
    kind: str
    source: str
    outputs: list[dict] = field(default_factory=list)
    origin: str = AUTHORED


@dataclass
class NotebookDoc:
    """Ordered cell list plus a version that bumps on every structural edit."""

    cells: list[Cell] = field(default_factory=list)
    version: int = 1
    metadata: dict = field(default_factory=dict)
    nbformat_minor: int = 5
    _id_counter: int = 0

    def cell_by_id(self, cell_id: str) -> Cell:
        for cell in self.cells:
            if cell.id == cell_id:
                return cell
        raise UnknownCell(f"no cell with id {cell_id!r}")

    def index_of(self, cell_id: str) -> int:
        for i, cell in enumerate(self.cells):
            if cell.id == cell_id:
                return i
        raise UnknownCell(f"no cell with id {cell_id!r}")

    def fresh_cell_id(self) -> str:
        # Counter-based so replayed runs produce identical documents.
        existing = {c.id for c in self.cells}
        while True:
            self._id_counter += 1
            candidate = f"cell-{self._id_counter}"
            if candidate not in existing:
                return candidate


@dataclass
class CodeContext:
    """Focal code plus preamble supplied to the agents for one prompt cell."""

    focal_code: str
    preamble: list[str]
    prompt_cell_id: str


def classify_cell(source: str) -> str:
    """Return ``prompt`` iff the marker is the first non-whitespace token.

    Only distinguishes prompt vs code; markdown comes from the
    interchange format, not from cell sources.
    """
    stripped = source.lstrip()
    if stripped == PROMPT_MARKER:
        return PROMPT
    if stripped.startswith(PROMPT_MARKER) and stripped[len(PROMPT_MARKER)].isspace():
        return PROMPT
    return CODE


def extract_request(prompt_cell: Cell) -> str:
    """Strip the marker and surrounding whitespace; interior text is kept verbatim."""
    if prompt_cell.kind != PROMPT:
        raise NotAPromptCell(f"cell {prompt_cell.id!r} is {prompt_cell.kind}, not prompt")
    return prompt_cell.source.lstrip()[len(PROMPT_MARKER):].strip()


def build_code_context(doc: NotebookDoc, prompt_cell_id: str) -> CodeContext:
    """Collect the focal cell and preamble above a prompt cell.

    Focal code is the nearest code cell strictly above the prompt cell
    (empty if none); the preamble is every earlier code cell in document
    order. Markdown and prompt cells never contribute.
    """
    idx = doc.index_of(prompt_cell_id)
    if doc.cells[idx].kind != PROMPT:
        raise NotAPromptCell(f"cell {prompt_cell_id!r} is not a prompt cell")
    code_above = [c.source for c in doc.cells[:idx] if c.kind == CODE]
    if code_above:
        return CodeContext(focal_code=code_above[-1], preamble=code_above[:-1],
                           prompt_cell_id=prompt_cell_id)
    return CodeContext(focal_code="", preamble=[], prompt_cell_id=prompt_cell_id)


def insert_cell_below(doc: NotebookDoc, anchor_id: str, source: str,
                      origin: str = INJECTED) -> Cell:
    """Insert a new code cell directly below the anchor; returns the new cell.

    Later cells shift down; the document version increments.
    """
    idx = doc.index_of(anchor_id)
    cell = Cell(id=doc.fresh_cell_id(), kind=classify_cell(source), source=source,
                origin=origin)
    if origin == INJECTED:
        cell.kind = CODE  # injected cells are always code
    doc.cells.insert(idx + 1, cell)
    doc.version += 1
    return cell


def injection_anchor(doc: NotebookDoc, prompt_cell_id: str) -> str:
    """Anchor for the next injection below a prompt cell.

    Repeated submits append: the anchor is the last cell in the
    contiguous run of injected cells directly below the prompt, so each
    new variant lands below the previous one and history is preserved.
    """
    idx = doc.index_of(prompt_cell_id)
    anchor = prompt_cell_id
    for cell in doc.cells[idx + 1:]:
        if cell.origin != INJECTED:
            break
        anchor = cell.id
    return anchor


def _join_source(raw, where: str) -> str:
    if isinstance(raw, str):
        return raw
    if isinstance(raw, list) and all(isinstance(s, str) for s in raw):
        return "".join(raw)
    raise MalformedNotebook(f"{where}: source must be a string or list of strings")


def load_notebook(text: str) -> NotebookDoc:
    """Parse Jupyter v4 JSON into a document.

    Cells without ids get fresh counter-based ones. Code cells whose
    source carries the prompt marker load as prompt cells; raw cells are
    treated as markdown (non-executable, excluded from context).
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedNotebook(f"not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise MalformedNotebook("top level: expected a JSON object")
    if data.get("nbformat") != 4:
        raise MalformedNotebook(f"nbformat: expected 4, got {data.get('nbformat')!r}")
    raw_cells = data.get("cells")
    if not isinstance(raw_cells, list):
        raise MalformedNotebook("cells: expected a list")

    doc = NotebookDoc(metadata=data.get("metadata") or {},
                      nbformat_minor=data.get("nbformat_minor", 5))
    for i, raw in enumerate(raw_cells):
        where = f"cells[{i}]"
        if not isinstance(raw, dict):
            raise MalformedNotebook(f"{where}: expected an object")
        cell_type = raw.get("cell_type")
        if cell_type not in ("code", "markdown", "raw"):
            raise MalformedNotebook(f"{where}: unknown cell_type {cell_type!r}")
        source = _join_source(raw.get("source", ""), where)
        cell_id = raw.get("id") or doc.fresh_cell_id()
        if any(c.id == cell_id for c in doc.cells):
            raise MalformedNotebook(f"{where}: duplicate cell id {cell_id!r}")
        if cell_type == "code":
            kind = classify_cell(source)
            outputs = raw.get("outputs") or []
            if not isinstance(outputs, list):
                raise MalformedNotebook(f"{where}: outputs must be a list")
        else:
            kind = MARKDOWN
            outputs = []
        meta = raw.get("metadata") or {}
        origin = INJECTED if meta.get("nbeui", {}).get("origin") == INJECTED else AUTHORED
        doc.cells.append(Cell(id=cell_id, kind=kind, source=source,
                              outputs=outputs, origin=origin))
    return doc


def save_notebook(doc: NotebookDoc) -> str:
    """Serialize to Jupyter v4 JSON; prompt cells become code cells."""
    cells = []
    for cell in doc.cells:
        metadata: dict = {}
        if cell.origin == INJECTED:
            metadata["nbeui"] = {"origin": INJECTED}
        if cell.kind == MARKDOWN:
            cells.append({
                "cell_type": "markdown",
                "id": cell.id,
                "metadata": metadata,
                "source": cell.source,
            })
        else:
            cells.append({
                "cell_type": "code",
                "id": cell.id,
                "metadata": metadata,
                "execution_count": None,
                "outputs": cell.outputs,
                "source": cell.source,
            })
    data = {
        "cells": cells,
        "metadata": doc.metadata,
        "nbformat": 4,
        "nbformat_minor": max(doc.nbformat_minor, 5),  # 4.5 is the first minor with cell ids
    }
    return json.dumps(data, indent=1, ensure_ascii=False) + "\n"
