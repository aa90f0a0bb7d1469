/** Typed client for the annotation service HTTP+JSON endpoints. */

export interface FacetOption {
  code: string;
  label: string;
}

export interface FacetQuestion {
  id: string;
  field: string;
  text: string;
  options: FacetOption[];
}

export interface FacetTaskPayload {
  task_id: string;
  kind: "facet";
  target: string;
  generated: string;
  questions: FacetQuestion[];
}

export interface PairwiseTaskPayload {
  task_id: string;
  kind: "pairwise";
  target: string;
  summary_a: string;
  summary_b: string;
  question: { text: string; options: string[] };
}

export type TaskPayload = FacetTaskPayload | PairwiseTaskPayload;

export interface Ack {
  annotation_id: string;
  seq: number;
  duplicate: boolean;
}

export interface AnnotatorProgress {
  total: number;
  done: number;
  facet_done: number;
  pairwise_done: number;
}

export interface ProgressReport {
  annotators: Record<string, AnnotatorProgress>;
  total: number;
  done: number;
}

export interface SubmissionBody {
  annotation_id: string;
  annotator_id: string;
  task_id: string;
  [answer: string]: string;
}

/** Service-reported failure with the machine-readable error code. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let code = "http_error";
  let message = `${resp.status} ${resp.statusText}`;
  try {
    const body = await resp.json();
    if (body?.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(resp.status, code, message);
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async nextTask(annotatorId: string): Promise<TaskPayload | null> {
    const resp = await fetch(
      this.url(`/tasks/next?annotator=${encodeURIComponent(annotatorId)}`),
    );
    if (!resp.ok) throw await parseError(resp);
    const body = await resp.json();
    return (body.task ?? null) as TaskPayload | null;
  }

  async submit(body: SubmissionBody): Promise<Ack> {
    const resp = await fetch(this.url("/annotations"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as Ack;
  }

  async progress(): Promise<ProgressReport> {
    const resp = await fetch(this.url("/progress"));
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as ProgressReport;
  }
}
