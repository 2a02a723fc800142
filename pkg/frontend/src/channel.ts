import type { Ack, ChannelMessage, ServerEvent, WidgetValue } from "./types";

/** Minimal WebSocket surface so node's `ws` can stand in during tests. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ChannelHandlers {
  onEvent(event: ServerEvent): void;
  onAck(ack: Ack): void;
  /** Connection state changes; false shows the reconnect banner. */
  onStatus(connected: boolean): void;
}

const RECONNECT_DELAY_MS = 250;

/**
 * Bidirectional session channel. Events are delivered to the handler in
 * server_seq order exactly once; on reconnect the channel resyncs from
 * the last seen sequence number.
 */
export class EventChannel {
  private socket: SocketLike | null = null;
  private lastSeq = 0;
  private closed = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly urlFor: (sinceSeq: number) => string,
    private readonly handlers: ChannelHandlers,
    private readonly socketFactory: SocketFactory,
  ) {}

  connect(): void {
    this.closed = false;
    const socket = this.socketFactory(this.urlFor(this.lastSeq));
    this.socket = socket;
    socket.onopen = () => this.handlers.onStatus(true);
    socket.onmessage = (ev) => this.handleMessage(String(ev.data));
    socket.onerror = () => undefined; // close always follows
    socket.onclose = () => {
      this.handlers.onStatus(false);
      this.socket = null;
      if (!this.closed) {
        this.reconnectTimer = setTimeout(() => this.connect(), RECONNECT_DELAY_MS);
      }
    };
  }

  private handleMessage(raw: string): void {
    let message: ChannelMessage;
    try {
      message = JSON.parse(raw) as ChannelMessage;
    } catch {
      return;
    }
    if (message.type === "event") {
      if (message.event.server_seq <= this.lastSeq) {
        return; // replayed after resync; already processed
      }
      this.lastSeq = message.event.server_seq;
      this.handlers.onEvent(message.event);
    } else if (message.type === "ack") {
      this.handlers.onAck(message.ack);
    }
  }

  sendWidgetEvent(
    panelId: string,
    elementId: number,
    value: WidgetValue,
    sequenceNo: number,
  ): boolean {
    if (!this.socket) {
      return false;
    }
    this.socket.send(
      JSON.stringify({
        type: "widget_event",
        panel_id: panelId,
        element_id: elementId,
        value,
        sequence_no: sequenceNo,
      }),
    );
    return true;
  }

  close(): void {
    this.closed = true;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.socket?.close();
    this.socket = null;
  }
}
