/**
 * Typed client for the studio session API.
 *
 * Every interface here mirrors a wire shape emitted by the server, key for
 * key, so a snapshot fetched over HTTP can be rendered without reshaping.
 * Mutations resolve to the updated session snapshot; no follow-up read is
 * needed to learn the new phase.
 */

export interface ContinuousQuant {
  kind: 'continuous';
  lower: number;
  upper: number;
  dims: number;
}

export interface DiscreteQuant {
  kind: 'discrete';
  values: number[];
}

export type Quantification = ContinuousQuant | DiscreteQuant;

export interface AttributeDoc {
  name: string;
  description: string;
  quantification: Quantification;
}

export interface DesignDoc {
  schema_version: number;
  component_kind: 'observation' | 'action';
  attributes: AttributeDoc[];
}

export interface DesignRecordDoc {
  observation: DesignDoc;
  action: DesignDoc;
  provenance: string;
  at: string;
}

export interface CodeVersionDoc {
  language_tag: string;
  source: string;
  block_index: number;
  origin: string;
  at: string;
}

export interface FindingDoc {
  check: string;
  passed: boolean;
  detail: string;
}

export interface ReportDoc {
  verdict: 'pass' | 'fail';
  failure_class: string | null;
  stage: string;
  findings: FindingDoc[];
  error_type: string | null;
  error_message: string | null;
  stderr_tail: string;
  duration_seconds: number;
}

export interface EventDoc {
  cursor: number;
  kind: string;
  detail: string;
  at: string;
}

export interface SessionSnapshot {
  schema_version: number;
  session_id: string;
  description: string;
  phase: string;
  phase_label: string;
  failure_count: number;
  design_history: DesignRecordDoc[];
  code_versions: CodeVersionDoc[];
  reports: ReportDoc[];
  transcript: { role: string; content: string }[] | null;
  trial_counter: number;
  design_query_count: number;
  codify_query_count: number;
  pending_feedback: string | null;
  revision_feedback: string | null;
  events: EventDoc[];
  created_at: string;
  updated_at: string;
}

export interface SessionSummary {
  session_id: string;
  phase: string;
  description_tokens: number;
  created_at: string;
  updated_at: string;
}

export interface CodeVersionPage {
  version: number;
  language_tag: string;
  source: string;
  origin: string;
  created_at: string;
}

export interface MetricsDoc {
  description_tokens: number;
  trials_to_execution: number | null;
  space_kind: string | null;
  outcome: string;
}

export interface EventsPage {
  events: EventDoc[];
  cursor: number;
  phase: string;
  phase_label: string;
}

export interface EditedDesign {
  observation: DesignDoc;
  action: DesignDoc;
}

/** Error body shared by every non-2xx response: status, stable code, text. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.name = 'ApiError';
    this.status = status;
    this.code = code;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

const API_PREFIX = '/api/v1';

export class StudioApi {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl = '', fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, '');
    this.fetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { 'content-type': 'application/json' };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.baseUrl + API_PREFIX + path, init);
    let payload: unknown = null;
    try {
      payload = await response.json();
    } catch {
      payload = null;
    }
    if (!response.ok) {
      const err = (payload ?? {}) as { code?: string; message?: string };
      throw new ApiError(
        response.status,
        err.code ?? 'http-error',
        err.message ?? `request failed with status ${response.status}`,
      );
    }
    return payload as T;
  }

  async listSessions(): Promise<SessionSummary[]> {
    const page = await this.request<{ sessions: SessionSummary[] }>('GET', '/sessions');
    return page.sessions;
  }

  createSession(description: string): Promise<SessionSnapshot> {
    return this.request('POST', '/sessions', { description });
  }

  getSession(sessionId: string): Promise<SessionSnapshot> {
    return this.request('GET', `/sessions/${sessionId}`);
  }

  proposeDesign(sessionId: string): Promise<SessionSnapshot> {
    return this.request('POST', `/sessions/${sessionId}/design`);
  }

  sendFeedback(sessionId: string, feedback: string): Promise<SessionSnapshot> {
    return this.request('POST', `/sessions/${sessionId}/feedback`, { feedback });
  }

  approveDesign(sessionId: string, edited?: EditedDesign): Promise<SessionSnapshot> {
    const body = edited === undefined ? undefined : { edited };
    return this.request('POST', `/sessions/${sessionId}/approve`, body);
  }

  codify(sessionId: string): Promise<SessionSnapshot> {
    return this.request('POST', `/sessions/${sessionId}/codify`);
  }

  validate(sessionId: string): Promise<SessionSnapshot> {
    return this.request('POST', `/sessions/${sessionId}/validate`);
  }

  abandon(sessionId: string): Promise<SessionSnapshot> {
    return this.request('POST', `/sessions/${sessionId}/abandon`);
  }

  getCodeVersion(sessionId: string, version: number): Promise<CodeVersionPage> {
    return this.request('GET', `/sessions/${sessionId}/code/${version}`);
  }

  getMetrics(sessionId: string): Promise<MetricsDoc> {
    return this.request('GET', `/sessions/${sessionId}/metrics`);
  }

  getEvents(sessionId: string, cursor: number): Promise<EventsPage> {
    return this.request('GET', `/sessions/${sessionId}/events?cursor=${cursor}`);
  }
}
