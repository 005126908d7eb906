// Typed client for the modernkit HTTP API. All state lives on the server;
// this module only transports it.

export interface StepState {
  step: string;
  status: 'Pending' | 'Generated' | 'Approved' | 'Rejected';
  artifact_id: string | null;
  attempt_count: number;
}

export interface RunRecord {
  run_id: string;
  phase: 'RequirementsExtraction' | 'ApplicationGeneration';
  module_tag: string;
  steps: StepState[];
  created_at: string;
  updated_at: string;
}

export interface ArtifactRecord {
  artifact_id: string;
  module_tag: string;
  kind: string;
  version: number;
  body: string;
  explanation: string;
  provenance: string;
  context_refs: [string, number][];
  created_at: string;
}

export interface SimilarityReport {
  score: number;
  threshold: number;
  passed: boolean;
  metric: string;
  left_token_count: number;
  right_token_count: number;
  missing_tokens: string[];
}

export interface VerificationRecord {
  artifact_id: string;
  version: number;
  mode: string;
  regenerated_text: string;
  report: SimilarityReport;
  backend_id: string;
  created_at: string;
}

export class ApiError extends Error {
  constructor(
    public code: string,
    message: string,
    public status: number,
    public detail: unknown = null,
  ) {
    super(message);
  }
}

let base = '';

export function setApiBase(url: string): void {
  base = url.replace(/\/$/, '');
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(`${base}${path}`, {
    headers: { 'Content-Type': 'application/json' },
    ...init,
  });
  if (!res.ok) {
    let code = `HTTP${res.status}`;
    let message = res.statusText;
    let detail: unknown = null;
    try {
      const body = await res.json();
      code = body.code ?? code;
      message = body.message ?? message;
      detail = body.detail ?? null;
    } catch {
      // non-JSON error body; keep the status line
    }
    throw new ApiError(code, message, res.status, detail);
  }
  return res.json() as Promise<T>;
}

export const api = {
  listRuns: () => request<{ runs: RunRecord[] }>('/runs'),

  getRun: (runId: string) => request<RunRecord>(`/runs/${runId}`),

  createRun: (phase: string, source?: string, tag?: string) =>
    request<RunRecord>('/runs', {
      method: 'POST',
      body: JSON.stringify({ phase, source: source ?? null, tag: tag ?? null }),
    }),

  generateStep: (runId: string, step: string, backendId?: string) =>
    request<ArtifactRecord>(`/runs/${runId}/steps/${step}/generate`, {
      method: 'POST',
      body: JSON.stringify({ backend_id: backendId ?? null }),
    }),

  reviewStep: (
    runId: string,
    step: string,
    verdict: 'Approve' | 'Reject',
    editedContent?: string,
    reviewer = 'operator',
  ) =>
    request<StepState>(`/runs/${runId}/steps/${step}/review`, {
      method: 'POST',
      body: JSON.stringify({
        verdict,
        edited_content: editedContent ?? null,
        reviewer,
      }),
    }),

  repairStep: (runId: string, step: string, backendId?: string) =>
    request<ArtifactRecord>(`/runs/${runId}/steps/${step}/repair`, {
      method: 'POST',
      body: JSON.stringify({ backend_id: backendId ?? null }),
    }),

  getArtifact: (artifactId: string, version: number) =>
    request<ArtifactRecord>(`/artifacts/${artifactId}/${version}`),

  listArtifacts: () =>
    request<{ artifacts: { artifact_id: string; latest_version: number }[] }>('/artifacts'),

  verificationsFor: (artifactId: string, version: number) =>
    request<{ verifications: VerificationRecord[] }>(
      `/artifacts/${artifactId}/${version}/verifications`,
    ),
};
