import type {
  ApiErrorBody,
  CreateSessionResponse,
  ExtractionPayload,
  SessionPayload,
  TurnResponse,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Raised for any non-2xx response; carries the server's ApiError body. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly retriable: boolean;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.status = status;
    this.code = body.code;
    this.retriable = body.retriable;
  }
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl = "", fetchImpl: FetchLike = (...args) => fetch(...args)) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let parsed: ApiErrorBody;
      try {
        parsed = (await response.json()) as ApiErrorBody;
      } catch {
        parsed = { code: "internal", message: `HTTP ${response.status}`, retriable: false };
      }
      throw new ApiError(response.status, parsed);
    }
    return (await response.json()) as T;
  }

  createSession(frames?: string[]): Promise<CreateSessionResponse> {
    return this.request("POST", "/sessions", frames ? { frames } : {});
  }

  sendMessage(sessionId: string, text: string): Promise<TurnResponse> {
    return this.request("POST", `/sessions/${sessionId}/messages`, { text });
  }

  getSession(sessionId: string): Promise<SessionPayload> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  getCues(sessionId: string): Promise<ExtractionPayload> {
    return this.request("GET", `/sessions/${sessionId}/cues`);
  }

  health(): Promise<{ status: string; provider_kind: string }> {
    return this.request("GET", "/health");
  }
}
