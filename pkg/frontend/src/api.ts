/**
 * Typed client for the kgmill HTTP service. Every number the UI displays
 * comes out of one of these response shapes; the UI never invents values.
 */

export interface Job {
  id: number;
  kind: string;
  status: string;
  progress: { done: number; total: number };
  result_ref: string | null;
  error: string | null;
}

export interface RunInfo {
  id: number;
  code_set_id: number;
  spec_ids: string[];
  status: string;
  prompt_tokens: number;
  completion_tokens: number;
  accumulated_cost: string;
}

export interface TripleRow {
  subject: string;
  predicate: string;
  object: string;
  object_kind: string;
  finalization: string;
  replaced_parent: string | null;
}

export interface RankedMatch {
  rank: number;
  code_id: string;
  distance: number;
  main_string: string;
}

export interface MatchRecord {
  object_string: string;
  code_set_id: number;
  z: number;
  n: number;
  best: string | null;
  ranked: RankedMatch[];
}

export interface CodeSetInfo {
  id: number;
  terminology_id: number;
  name: string;
  members: string[];
  source_filter: unknown;
  expansion_style: string | null;
  warning: boolean;
  version: string;
}

export interface Annotation {
  id: number;
  body: string;
  created_at: string;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown, idempotencyKey?: string): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (idempotencyKey) headers["Idempotency-Key"] = idempotencyKey;
    return this.request<T>(path, {
      method: "POST",
      headers,
      body: JSON.stringify(body),
    });
  }

  importTerminology(
    name: string,
    rowsText: string,
    delimiter = "\t",
    idempotencyKey?: string,
  ): Promise<{ job: number }> {
    return this.post(
      "/terminologies/import",
      { name, rows_text: rowsText, delimiter },
      idempotencyKey,
    );
  }

  listTerminologies(): Promise<{ id: number; name: string }[]> {
    return this.request("/terminologies");
  }

  createCodeSet(
    terminology: string,
    name: string,
    filter: unknown,
    expansionStyle: string | null,
    idempotencyKey?: string,
  ): Promise<{ job: number }> {
    return this.post(
      "/code-sets",
      { terminology, name, filter, expansion_style: expansionStyle },
      idempotencyKey,
    );
  }

  getCodeSet(id: number): Promise<CodeSetInfo> {
    return this.request(`/code-sets/${id}`);
  }

  launchRun(config: unknown, idempotencyKey?: string): Promise<{ job: number }> {
    return this.post("/runs", { config }, idempotencyKey);
  }

  getRun(runId: number): Promise<RunInfo> {
    return this.request(`/runs/${runId}`);
  }

  getRunTriples(runId: number): Promise<TripleRow[]> {
    return this.request(`/runs/${runId}/triples`);
  }

  launchMatchBatch(runId: number, n = 4, z = 2.0): Promise<{ job: number }> {
    return this.post("/matches/batch", { run_id: runId, n, z });
  }

  getMatches(objectString: string): Promise<MatchRecord[]> {
    return this.request(`/matches?object=${encodeURIComponent(objectString)}`);
  }

  materialize(name: string, query: string): Promise<{ job: number }> {
    return this.post("/custom-tables", { name, query });
  }

  getCustomTable(name: string): Promise<{
    name: string;
    version: number;
    defining_query: string;
    columns: string[];
    rows: unknown[][];
  }> {
    return this.request(`/custom-tables/${encodeURIComponent(name)}`);
  }

  getJob(jobId: number): Promise<Job> {
    return this.request(`/jobs/${jobId}`);
  }

  addAnnotation(subjectKind: string, subjectKey: string, body: string): Promise<{ id: number }> {
    return this.post("/annotations", {
      subject_kind: subjectKind,
      subject_key: subjectKey,
      body,
    });
  }

  listAnnotations(subjectKind: string, subjectKey: string): Promise<Annotation[]> {
    return this.request(
      `/annotations?subject_kind=${encodeURIComponent(subjectKind)}` +
        `&subject_key=${encodeURIComponent(subjectKey)}`,
    );
  }
}
