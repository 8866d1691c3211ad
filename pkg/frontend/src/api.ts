/** Typed client for the engine's HTTP API. All decisions (confidence,
 * evidence, evolution outcomes) arrive in these payloads; the console only
 * renders them. */

export interface TripleDto {
  head: string;
  relation: string;
  tail: string;
}

export interface AskResponse {
  session_id: string;
  question_id: string;
  answer: string | number;
  confidence: "positive" | "negative";
  support_info: string;
  triples: TripleDto[];
  depth_used: number;
  evidence: "inherent_only" | "triples_used";
  trigger: string | null;
}

export interface EvolutionSummary {
  question_id: string;
  candidates: number;
  added: number;
  added_triples: TripleDto[];
  skipped_exact: number;
  skipped_similar: number;
}

export interface FeedbackResponse {
  evolution: EvolutionSummary;
}

export interface KgStats {
  triple_count: number;
  entity_count: number;
  relation_count: number;
  size_series: number[];
}

export type Verdict = "good" | "bad";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  if (response.ok) {
    return (await response.json()) as T;
  }
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (body && body.detail !== undefined) {
      detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  async ask(question: string, options?: string[], sessionId?: string): Promise<AskResponse> {
    const body: Record<string, unknown> = { question };
    if (options && options.length > 0) body.options = options;
    if (sessionId) body.session_id = sessionId;
    const response = await fetch(`${this.baseUrl}/api/ask`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return parseOrThrow<AskResponse>(response);
  }

  async feedback(sessionId: string, questionId: string, verdict: Verdict): Promise<FeedbackResponse> {
    const response = await fetch(`${this.baseUrl}/api/feedback`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ session_id: sessionId, question_id: questionId, verdict }),
    });
    return parseOrThrow<FeedbackResponse>(response);
  }

  async stats(): Promise<KgStats> {
    return parseOrThrow<KgStats>(await fetch(`${this.baseUrl}/api/kg/stats`));
  }

  async health(): Promise<{ status: string }> {
    return parseOrThrow<{ status: string }>(await fetch(`${this.baseUrl}/api/health`));
  }
}

/** The slice of ApiClient the views depend on; tests wrap it with spies. */
export interface ApiLike {
  ask(question: string, options?: string[], sessionId?: string): Promise<AskResponse>;
  feedback(sessionId: string, questionId: string, verdict: Verdict): Promise<FeedbackResponse>;
  stats(): Promise<KgStats>;
}
