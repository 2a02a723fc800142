/** Wire types for the engine protocol (docs/protocol.md, v1). */

export type CellKind = "code" | "markdown" | "prompt";

export interface CellView {
  id: string;
  kind: CellKind;
  source: string;
  origin: "authored" | "injected";
  outputs: OutputRecord[];
}

export interface OutputRecord {
  output_type: string;
  name?: string;
  text?: string | string[];
  ename?: string;
  evalue?: string;
  traceback?: string[];
  data?: Record<string, unknown>;
}

export interface NotebookView {
  session_id: string;
  notebook_path: string;
  version: number;
  cells: CellView[];
}

export type WidgetKind =
  | "slider"
  | "dropdown"
  | "checkbox"
  | "color_picker"
  | "textbox"
  | "number_input"
  | "image_gallery";

export type WidgetValue = null | boolean | number | string | WidgetValue[];

export interface WidgetRange {
  min: number;
  max: number;
  step: number;
}

export interface WidgetInfo {
  element_id: number;
  widget_kind: WidgetKind;
  label: string;
  binding: string;
  current_value: WidgetValue;
  options?: string[];
  range?: WidgetRange;
}

export interface WidgetManifest {
  panel_id: string;
  widgets: WidgetInfo[];
  submit_present: boolean;
}

export interface RenderPayload {
  cell_id?: string;
  html: string;
  manifest: WidgetManifest;
}

export type ServerEventKind =
  | "panel_render"
  | "panel_error"
  | "cell_injected"
  | "suggestion_output"
  | "exec_output"
  | "notebook_changed";

export interface ServerEvent {
  kind: ServerEventKind;
  payload: Record<string, unknown>;
  session_id: string;
  server_seq: number;
}

export interface PanelErrorPayload {
  kind: string;
  message: string;
  cell_id: string;
}

export interface CellInjectedPayload {
  anchor_cell_id: string;
  new_cell_id: string;
  code: string;
  index: number;
}

export interface Ack {
  status: "ok" | "rejected";
  panel_id: string;
  element_id: number;
  sequence_no: number;
  value?: WidgetValue;
  kind?: string;
  message?: string;
}

export type ChannelMessage =
  | { type: "event"; event: ServerEvent }
  | { type: "ack"; ack: Ack }
  | { type: "error"; message: string };

export interface WidgetEventMessage {
  type: "widget_event";
  panel_id: string;
  element_id: number;
  value: WidgetValue;
  sequence_no: number;
}

export interface ExecResult {
  ok: boolean;
  stdout: string;
  stderr: string;
  error: { type: string; message: string; traceback?: string } | null;
  value_repr: string | null;
  duration_ms: number;
}
