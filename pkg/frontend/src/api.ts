import type { CellView, ExecResult, NotebookView, RenderPayload } from "./types";

export class EngineApiError extends Error {
  constructor(
    readonly kind: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

/** Thin typed client over the engine's HTTP endpoints. */
export class EngineApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const data = await response.json();
    if (!response.ok) {
      const error = (data as { error?: { kind: string; message: string } }).error;
      throw new EngineApiError(
        error?.kind ?? "HttpError",
        error?.message ?? `HTTP ${response.status}`,
        response.status,
      );
    }
    return data as T;
  }

  openSession(notebookPath: string): Promise<{ session_id: string }> {
    return this.request("POST", "/sessions", { notebook_path: notebookPath });
  }

  getNotebook(sessionId: string): Promise<NotebookView> {
    return this.request("GET", `/sessions/${sessionId}/notebook`);
  }

  runCell(sessionId: string, cellId: string): Promise<ExecResult> {
    return this.request("POST", `/sessions/${sessionId}/cells/${cellId}/run`);
  }

  setCellSource(sessionId: string, cellId: string, source: string): Promise<CellView> {
    return this.request("POST", `/sessions/${sessionId}/cells/${cellId}/source`, { source });
  }

  suggest(sessionId: string, cellId: string): Promise<{ cell_id: string; text: string }> {
    return this.request("POST", `/sessions/${sessionId}/cells/${cellId}/suggest`);
  }

  ephemeralUi(sessionId: string, cellId: string): Promise<RenderPayload & { panel_id: string }> {
    return this.request("POST", `/sessions/${sessionId}/cells/${cellId}/ephemeral-ui`);
  }

  submitPanel(
    sessionId: string,
    panelId: string,
  ): Promise<{ new_cell_id: string; code: string; index: number }> {
    return this.request("POST", `/sessions/${sessionId}/panels/${panelId}/submit`);
  }

  eventsUrl(sessionId: string, sinceSeq: number): string {
    const ws = this.baseUrl.replace(/^http/, "ws");
    return `${ws}/sessions/${sessionId}/events?since_seq=${sinceSeq}`;
  }
}
