// Typed client for the /v1 API. The UI talks to the server through this
// module only; every method wraps exactly one endpoint.

import type {
  ApiErrorBody,
  CommentaryJson,
  EditTarget,
  EvaluationReport,
  RankedCandidate,
  Session,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public detail: unknown = null
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let body: ApiErrorBody | null = null;
  try {
    body = (await response.json()) as ApiErrorBody;
  } catch {
    // non-JSON error body
  }
  return new ApiError(
    response.status,
    body?.code ?? "internal",
    body?.message ?? `HTTP ${response.status}`,
    body?.detail ?? null
  );
}

export class ApiClient {
  constructor(private baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  private async requestText(path: string): Promise<string> {
    const response = await fetch(`${this.baseUrl}${path}`);
    if (!response.ok) {
      throw await parseError(response);
    }
    return response.text();
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request("GET", "/v1/health");
  }

  startSession(input: { keywords?: string; event_detail?: string }): Promise<Session> {
    return this.request("POST", "/v1/sessions", input);
  }

  getSession(id: string): Promise<Session> {
    return this.request("GET", `/v1/sessions/${id}`);
  }

  generatePeg(id: string): Promise<Session> {
    return this.request("POST", `/v1/sessions/${id}/peg`);
  }

  generateMainArguments(
    id: string,
    directions?: string[]
  ): Promise<{ candidates: RankedCandidate[]; session: Session }> {
    return this.request("POST", `/v1/sessions/${id}/main-arguments`, {
      directions: directions ?? null,
    });
  }

  selectMainArgument(id: string, choice: { rank?: number; text?: string }): Promise<Session> {
    return this.request("POST", `/v1/sessions/${id}/main-argument/select`, choice);
  }

  generateSupportingArguments(id: string, structure: string): Promise<Session> {
    return this.request("POST", `/v1/sessions/${id}/supporting-arguments`, { structure });
  }

  generateEvidence(id: string, index: number): Promise<Session> {
    return this.request("POST", `/v1/sessions/${id}/evidence/${index}`);
  }

  combine(id: string): Promise<{ commentary: CommentaryJson; session: Session }> {
    return this.request("POST", `/v1/sessions/${id}/combine`);
  }

  editStage(id: string, stage: EditTarget, output: string | string[]): Promise<Session> {
    return this.request("PATCH", `/v1/sessions/${id}/stages/${stage}`, { output });
  }

  exportMarkdown(id: string): Promise<string> {
    return this.requestText(`/v1/sessions/${id}/export?format=md`);
  }

  exportJson(id: string): Promise<CommentaryJson> {
    return this.request("GET", `/v1/sessions/${id}/export?format=json`);
  }

  evaluate(text: string): Promise<EvaluationReport> {
    return this.request("POST", "/v1/evaluate", { text });
  }

  importHumanScores(input: {
    item_id: string;
    scores?: Record<string, number>;
    timeliness?: number;
  }): Promise<{ stored: string }> {
    return this.request("POST", "/v1/human-scores", input);
  }
}
