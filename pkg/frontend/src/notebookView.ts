import type { CellInjectedPayload, CellView, NotebookView as NotebookData, OutputRecord } from "./types";

export interface NotebookHooks {
  runCell(cellId: string): void;
  suggest(cellId: string): void;
  magicWand(cellId: string): void;
  /** Persist an edited source; resolves with the server's reclassified cell. */
  setSource(cellId: string, source: string): Promise<CellView>;
}

function outputText(output: OutputRecord): string {
  if (typeof output.text === "string") {
    return output.text;
  }
  if (Array.isArray(output.text)) {
    return output.text.join("");
  }
  if (output.output_type === "error") {
    return `${output.ename}: ${output.evalue}`;
  }
  const plain = output.data?.["text/plain"];
  return typeof plain === "string" ? plain : "";
}

/**
 * Cell list renderer. The light-bulb and magic-wand buttons appear on
 * prompt cells only; injected cells arrive as visible, editable code
 * cells directly below their prompt.
 */
export class NotebookView {
  private cells: CellView[] = [];

  constructor(
    private readonly container: HTMLElement,
    private readonly hooks: NotebookHooks,
  ) {}

  render(doc: NotebookData): void {
    this.cells = doc.cells.map((cell) => ({ ...cell }));
    this.container.replaceChildren();
    for (const cell of this.cells) {
      this.container.appendChild(this.buildCell(cell));
    }
  }

  cellElement(cellId: string): HTMLElement | null {
    return this.container.querySelector(`[data-cell-id="${cellId}"]`);
  }

  applyInjected(payload: CellInjectedPayload): void {
    const cell: CellView = {
      id: payload.new_cell_id,
      kind: "code",
      source: payload.code,
      origin: "injected",
      outputs: [],
    };
    this.cells.splice(payload.index, 0, cell);
    const node = this.buildCell(cell);
    const next = this.container.children.item(payload.index);
    this.container.insertBefore(node, next);
  }

  applyExecOutput(payload: { cell_id: string; stdout: string; stderr: string;
                             error: { type: string; message: string } | null }): void {
    const cell = this.cells.find((c) => c.id === payload.cell_id);
    if (!cell) {
      return;
    }
    cell.outputs = [];
    if (payload.stdout) {
      cell.outputs.push({ output_type: "stream", name: "stdout", text: payload.stdout });
    }
    if (payload.stderr) {
      cell.outputs.push({ output_type: "stream", name: "stderr", text: payload.stderr });
    }
    if (payload.error) {
      cell.outputs.push({ output_type: "error", ename: payload.error.type,
                          evalue: payload.error.message, traceback: [] });
    }
    this.refreshOutputs(cell);
  }

  applySuggestion(payload: { cell_id: string; text: string }): void {
    const cell = this.cells.find((c) => c.id === payload.cell_id);
    if (!cell) {
      return;
    }
    cell.outputs.push({ output_type: "stream", name: "stdout", text: payload.text + "\n" });
    this.refreshOutputs(cell);
  }

  private refreshOutputs(cell: CellView): void {
    const node = this.cellElement(cell.id);
    const area = node?.querySelector(".cell-outputs");
    if (area) {
      area.textContent = cell.outputs.map(outputText).join("");
    }
  }

  private buildCell(cell: CellView): HTMLElement {
    const node = document.createElement("div");
    node.className = `cell cell-${cell.kind}${cell.origin === "injected" ? " cell-injected" : ""}`;
    node.dataset.cellId = cell.id;

    const toolbar = document.createElement("div");
    toolbar.className = "cell-toolbar";
    if (cell.kind === "code") {
      toolbar.appendChild(this.button("run", "▶ Run", () => this.hooks.runCell(cell.id)));
    }
    if (cell.kind === "prompt") {
      toolbar.appendChild(this.button("suggest", "💡", () => this.hooks.suggest(cell.id)));
      toolbar.appendChild(this.button("wand", "🪄", () => this.hooks.magicWand(cell.id)));
    }
    node.appendChild(toolbar);

    if (cell.kind === "markdown") {
      const body = document.createElement("div");
      body.className = "cell-markdown-source";
      body.textContent = cell.source;
      node.appendChild(body);
    } else {
      const editor = document.createElement("textarea");
      editor.className = "cell-source";
      editor.value = cell.source;
      editor.addEventListener("change", () => {
        void this.commitSource(cell.id, editor.value);
      });
      node.appendChild(editor);
    }

    const outputs = document.createElement("pre");
    outputs.className = "cell-outputs";
    outputs.textContent = cell.outputs.map(outputText).join("");
    node.appendChild(outputs);
    return node;
  }

  private async commitSource(cellId: string, source: string): Promise<void> {
    const updated = await this.hooks.setSource(cellId, source);
    const cell = this.cells.find((c) => c.id === cellId);
    const node = this.cellElement(cellId);
    if (!cell || !node) {
      return;
    }
    cell.source = updated.source;
    if (cell.kind !== updated.kind) {
      // Kind flipped (e.g. the prompt marker was typed): rebuild so the
      // toolbar gains or loses the prompt buttons.
      cell.kind = updated.kind;
      node.replaceWith(this.buildCell(cell));
    }
  }

  private button(role: string, text: string, onClick: () => void): HTMLButtonElement {
    const button = document.createElement("button");
    button.className = `cell-button cell-button-${role}`;
    button.dataset.role = role;
    button.textContent = text;
    button.addEventListener("click", onClick);
    return button;
  }
}
