import type { Ack, RenderPayload, WidgetInfo, WidgetValue } from "./types";

export interface PanelHooks {
  /** Called with debounced, user-initiated value changes. */
  sendEvent(panelId: string, elementId: number, value: WidgetValue, sequenceNo: number): void;
  onSubmit(panelId: string): void;
}

export const DEBOUNCE_MS = 75;

interface WidgetState {
  info: WidgetInfo;
  input: HTMLElement;
  lastAcked: WidgetValue;
  debounceTimer: ReturnType<typeof setTimeout> | null;
  pendingValue: WidgetValue | undefined;
}

/**
 * Schema-driven panel renderer: widgets are built from the manifest, not
 * from the server HTML string; only image-gallery fragments use it, and
 * those are sandboxed in an iframe. Only one panel is mounted at a time.
 * Outgoing events are debounced and sequence-numbered; displayed values
 * converge to the last server-acknowledged value.
 */
export class PanelView {
  private panelId: string | null = null;
  private widgets = new Map<number, WidgetState>();
  private sequenceNo = 0;
  private pendingAcks = new Set<number>();
  private ackedCount = 0;

  constructor(
    private readonly container: HTMLElement,
    private readonly hooks: PanelHooks,
    private readonly debounceMs: number = DEBOUNCE_MS,
  ) {}

  get activePanelId(): string | null {
    return this.panelId;
  }

  get pendingAckCount(): number {
    return this.pendingAcks.size;
  }

  /** Total acks handled for the current panel; monotone, so waiting on
   * "an ack arrived" never races the ack round trip. */
  get ackedEventCount(): number {
    return this.ackedCount;
  }

  /** Mount a fresh panel, unmounting and forgetting any previous one. */
  render(payload: RenderPayload): void {
    this.dispose();
    this.panelId = payload.manifest.panel_id;
    const root = document.createElement("div");
    root.className = "eui-panel";
    root.dataset.panelId = payload.manifest.panel_id;
    for (const info of payload.manifest.widgets) {
      root.appendChild(this.buildWidget(info, payload.html));
    }
    const submit = document.createElement("button");
    submit.className = "eui-submit";
    submit.textContent = "Submit";
    submit.addEventListener("click", () => {
      if (this.panelId) {
        this.hooks.onSubmit(this.panelId);
      }
    });
    root.appendChild(submit);
    this.container.appendChild(root);
  }

  dispose(): void {
    for (const state of this.widgets.values()) {
      if (state.debounceTimer !== null) {
        clearTimeout(state.debounceTimer);
      }
    }
    this.widgets.clear();
    this.pendingAcks.clear();
    this.ackedCount = 0;
    this.sequenceNo = 0;
    this.panelId = null;
    this.container.replaceChildren();
  }

  handleAck(ack: Ack): void {
    if (ack.panel_id !== this.panelId) {
      return; // ack for a panel we already replaced
    }
    this.pendingAcks.delete(ack.sequence_no);
    this.ackedCount += 1;
    const state = this.widgets.get(ack.element_id);
    if (!state) {
      return;
    }
    if (ack.status === "ok") {
      state.lastAcked = ack.value ?? null;
    } else if (state.pendingValue === undefined) {
      // Rejected and nothing newer in flight: snap back to server truth.
      this.setDisplayedValue(state, state.lastAcked);
    }
  }

  private emitLater(state: WidgetState, value: WidgetValue): void {
    state.pendingValue = value;
    if (state.debounceTimer !== null) {
      clearTimeout(state.debounceTimer);
    }
    state.debounceTimer = setTimeout(() => {
      state.debounceTimer = null;
      const pending = state.pendingValue;
      state.pendingValue = undefined;
      if (pending === undefined || this.panelId === null) {
        return;
      }
      this.sequenceNo += 1;
      this.pendingAcks.add(this.sequenceNo);
      this.hooks.sendEvent(this.panelId, state.info.element_id, pending, this.sequenceNo);
    }, this.debounceMs);
  }

  private setDisplayedValue(state: WidgetState, value: WidgetValue): void {
    const input = state.input;
    if (input instanceof HTMLInputElement) {
      if (input.type === "checkbox") {
        input.checked = Boolean(value);
      } else {
        input.value = String(value ?? "");
      }
    } else if (input instanceof HTMLSelectElement) {
      input.value = String(value ?? "");
    }
  }

  private buildWidget(info: WidgetInfo, panelHtml: string): HTMLElement {
    const wrapper = document.createElement("div");
    wrapper.className = "eui-widget";
    wrapper.dataset.euiId = String(info.element_id);
    const label = document.createElement("label");
    label.textContent = info.label;
    wrapper.appendChild(label);

    let input: HTMLElement;
    switch (info.widget_kind) {
      case "slider":
      case "number_input": {
        const el = document.createElement("input");
        el.type = info.widget_kind === "slider" ? "range" : "number";
        if (info.range) {
          el.min = String(info.range.min);
          el.max = String(info.range.max);
          el.step = String(info.range.step);
        }
        el.value = String(info.current_value ?? "");
        el.addEventListener("input", () => {
          this.emitLater(this.widgets.get(info.element_id)!, Number(el.value));
        });
        input = el;
        break;
      }
      case "dropdown": {
        const el = document.createElement("select");
        for (const option of info.options ?? []) {
          const item = document.createElement("option");
          item.value = option;
          item.textContent = option;
          el.appendChild(item);
        }
        el.value = String(info.current_value ?? "");
        el.addEventListener("change", () => {
          this.emitLater(this.widgets.get(info.element_id)!, el.value);
        });
        input = el;
        break;
      }
      case "checkbox": {
        const el = document.createElement("input");
        el.type = "checkbox";
        el.checked = Boolean(info.current_value);
        el.addEventListener("change", () => {
          this.emitLater(this.widgets.get(info.element_id)!, el.checked);
        });
        input = el;
        break;
      }
      case "color_picker": {
        const el = document.createElement("input");
        el.type = "color";
        el.value = String(info.current_value ?? "#000000");
        el.addEventListener("input", () => {
          this.emitLater(this.widgets.get(info.element_id)!, el.value);
        });
        input = el;
        break;
      }
      case "image_gallery": {
        // The one fragment taken from model-adjacent HTML; isolate it.
        const frame = document.createElement("iframe");
        frame.setAttribute("sandbox", "");
        frame.srcdoc = extractFragment(panelHtml, info.element_id);
        frame.className = "eui-gallery-frame";
        input = frame;
        break;
      }
      default: {
        const el = document.createElement("input");
        el.type = "text";
        el.value = String(info.current_value ?? "");
        el.addEventListener("input", () => {
          this.emitLater(this.widgets.get(info.element_id)!, el.value);
        });
        input = el;
      }
    }
    wrapper.appendChild(input);
    this.widgets.set(info.element_id, {
      info,
      input,
      lastAcked: info.current_value,
      debounceTimer: null,
      pendingValue: undefined,
    });
    return wrapper;
  }
}

export function extractFragment(panelHtml: string, elementId: number): string {
  const parser = new DOMParser();
  const doc = parser.parseFromString(panelHtml, "text/html");
  const node = doc.querySelector(`[data-eui-id="${elementId}"]`);
  return node ? node.outerHTML : "";
}
