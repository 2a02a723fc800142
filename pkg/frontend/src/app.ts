import { EngineApi, EngineApiError } from "./api";
import { EventChannel, type SocketFactory } from "./channel";
import { NotebookView } from "./notebookView";
import { PanelView } from "./panelView";
import type {
  CellInjectedPayload,
  PanelErrorPayload,
  RenderPayload,
  ServerEvent,
} from "./types";

/**
 * Glue layer: notebook pane on the left, ephemeral-UI panel on the right,
 * one event channel per session. Channel messages are processed in
 * server_seq order; a second panel render replaces the first wholesale.
 */
export class App {
  readonly notebook: NotebookView;
  readonly panel: PanelView;
  private channel: EventChannel | null = null;
  private sessionId: string | null = null;
  private readonly banner: HTMLElement;
  private readonly errorBox: HTMLElement;

  constructor(
    root: HTMLElement,
    private readonly api: EngineApi,
    private readonly socketFactory: SocketFactory,
  ) {
    const layout = document.createElement("div");
    layout.className = "layout";
    this.banner = document.createElement("div");
    this.banner.className = "banner";
    this.banner.hidden = true;
    this.banner.textContent = "Connection lost; reconnecting…";
    const notebookPane = document.createElement("div");
    notebookPane.className = "notebook-pane";
    const sidePanel = document.createElement("div");
    sidePanel.className = "side-panel";
    this.errorBox = document.createElement("div");
    this.errorBox.className = "panel-error";
    this.errorBox.hidden = true;
    sidePanel.appendChild(this.errorBox);
    const panelHost = document.createElement("div");
    panelHost.className = "panel-host";
    sidePanel.appendChild(panelHost);
    layout.append(this.banner, notebookPane, sidePanel);
    root.appendChild(layout);

    this.notebook = new NotebookView(notebookPane, {
      runCell: (cellId) => void this.guard(() => this.api.runCell(this.session(), cellId)),
      suggest: (cellId) => void this.guard(() => this.api.suggest(this.session(), cellId)),
      magicWand: (cellId) => void this.triggerWand(cellId),
      setSource: (cellId, source) => this.api.setCellSource(this.session(), cellId, source),
    });
    this.panel = new PanelView(panelHost, {
      sendEvent: (panelId, elementId, value, sequenceNo) => {
        this.channel?.sendWidgetEvent(panelId, elementId, value, sequenceNo);
      },
      onSubmit: (panelId) => void this.guard(() => this.api.submitPanel(this.session(), panelId)),
    });
  }

  private session(): string {
    if (!this.sessionId) {
      throw new Error("no open session");
    }
    return this.sessionId;
  }

  async open(notebookPath: string): Promise<string> {
    const { session_id } = await this.api.openSession(notebookPath);
    this.sessionId = session_id;
    this.notebook.render(await this.api.getNotebook(session_id));
    this.channel = new EventChannel(
      (sinceSeq) => this.api.eventsUrl(session_id, sinceSeq),
      {
        onEvent: (event) => this.handleEvent(event),
        onAck: (ack) => this.panel.handleAck(ack),
        onStatus: (connected) => {
          this.banner.hidden = connected;
        },
      },
      this.socketFactory,
    );
    this.channel.connect();
    return session_id;
  }

  close(): void {
    this.channel?.close();
    this.channel = null;
  }

  private async triggerWand(cellId: string): Promise<void> {
    // The render arrives over the channel; errors surface as panel_error
    // events, so a failed trigger here needs no extra handling.
    await this.guard(() => this.api.ephemeralUi(this.session(), cellId));
  }

  private async guard<T>(operation: () => Promise<T>): Promise<T | undefined> {
    try {
      return await operation();
    } catch (error) {
      if (error instanceof EngineApiError) {
        return undefined; // mirrored by a panel_error event
      }
      throw error;
    }
  }

  private handleEvent(event: ServerEvent): void {
    switch (event.kind) {
      case "panel_render": {
        this.errorBox.hidden = true;
        this.panel.render(event.payload as unknown as RenderPayload);
        break;
      }
      case "panel_error": {
        this.showPanelError(event.payload as unknown as PanelErrorPayload);
        break;
      }
      case "cell_injected": {
        this.notebook.applyInjected(event.payload as unknown as CellInjectedPayload);
        break;
      }
      case "suggestion_output": {
        this.notebook.applySuggestion(
          event.payload as unknown as { cell_id: string; text: string });
        break;
      }
      case "exec_output": {
        this.notebook.applyExecOutput(
          event.payload as unknown as Parameters<NotebookView["applyExecOutput"]>[0]);
        break;
      }
      case "notebook_changed":
        break;
    }
  }

  private showPanelError(payload: PanelErrorPayload): void {
    this.errorBox.replaceChildren();
    this.errorBox.hidden = false;
    const message = document.createElement("span");
    message.className = "panel-error-message";
    message.textContent = `${payload.kind}: ${payload.message}`;
    const regenerate = document.createElement("button");
    regenerate.className = "panel-error-regenerate";
    regenerate.textContent = "Regenerate";
    regenerate.addEventListener("click", () => void this.triggerWand(payload.cell_id));
    this.errorBox.append(message, regenerate);
  }
}

export { EngineApi, EngineApiError } from "./api";
export { EventChannel } from "./channel";
export { NotebookView } from "./notebookView";
export { PanelView, DEBOUNCE_MS } from "./panelView";
export * from "./types";
