/** Typed client for the burn assessment JSON API. */

import type {
  JobSnapshot,
  MetricsResponse,
  ServiceConfigPayload,
  TimelineResponse,
  UploadedView,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`API ${status}: ${detail}`);
  }
}

async function parseError(response: Response): Promise<never> {
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(this.baseUrl + path);
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  private async postJson<T>(path: string, payload: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  getConfig(): Promise<ServiceConfigPayload> {
    return this.getJson("/config");
  }

  createPatient(payload: Record<string, unknown>): Promise<{ patient_id: string }> {
    return this.postJson("/patients", payload);
  }

  createSession(
    patientId: string,
    intake: Record<string, unknown>,
  ): Promise<{ session_id: string }> {
    return this.postJson(`/patients/${patientId}/sessions`, { intake });
  }

  async uploadImages(sessionId: string, files: File[]): Promise<UploadedView[]> {
    const form = new FormData();
    for (const file of files) form.append("files", file, file.name);
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/images`, {
      method: "POST",
      body: form,
    });
    if (!response.ok) await parseError(response);
    const body = (await response.json()) as { views: UploadedView[] };
    return body.views;
  }

  async uploadMasks(sessionId: string, files: File[]): Promise<void> {
    const form = new FormData();
    for (const file of files) form.append("files", file, file.name);
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/masks`, {
      method: "POST",
      body: form,
    });
    if (!response.ok) await parseError(response);
  }

  async uploadMesh(sessionId: string, file: File): Promise<void> {
    const form = new FormData();
    form.append("file", file, file.name);
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/mesh`, {
      method: "POST",
      body: form,
    });
    if (!response.ok) await parseError(response);
  }

  setScale(sessionId: string, payload: Record<string, unknown>): Promise<unknown> {
    return this.postJson(`/sessions/${sessionId}/scale`, payload);
  }

  analyze(sessionId: string): Promise<{ job_id: string }> {
    return this.postJson(`/sessions/${sessionId}/analyze`, {});
  }

  /** Raw job fetch shaped for the polling loop (404 is a value here). */
  async fetchJob(jobId: string): Promise<{ status: number; body: JobSnapshot | null }> {
    const response = await fetch(`${this.baseUrl}/jobs/${jobId}`);
    if (response.status === 404) return { status: 404, body: null };
    if (!response.ok) return { status: response.status, body: null };
    return { status: response.status, body: (await response.json()) as JobSnapshot };
  }

  getMetrics(sessionId: string): Promise<MetricsResponse> {
    return this.getJson(`/sessions/${sessionId}/metrics`);
  }

  getTimeline(patientId: string): Promise<TimelineResponse> {
    return this.getJson(`/patients/${patientId}/timeline`);
  }

  reportUrl(sessionId: string, format: "structured" | "html" = "html"): string {
    return `${this.baseUrl}/sessions/${sessionId}/report?format=${format}`;
  }
}
