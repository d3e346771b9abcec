import type { RunRecordDto, RunSummaryDto, SceneResponseDto } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: string };
    return body.detail ?? response.statusText;
  } catch {
    return response.statusText;
  }
}

/** Thin typed client over the orchestrator API; mutates state only via
 * submit/approve/reject, exactly the documented surface. */
export class ApiClient {
  constructor(
    readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      throw new ApiError(response.status, await parseDetail(response));
    }
    return (await response.json()) as T;
  }

  submitRun(imageBase64: string, instruction: string): Promise<{ run_id: string }> {
    return this.request("/runs", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ image: imageBase64, instruction }),
    });
  }

  getRun(runId: string): Promise<RunRecordDto> {
    return this.request(`/runs/${runId}`);
  }

  listRuns(): Promise<{ runs: RunSummaryDto[] }> {
    return this.request("/runs");
  }

  approve(runId: string): Promise<{ run_id: string; decision: string }> {
    return this.request(`/runs/${runId}/approve`, { method: "POST" });
  }

  reject(runId: string): Promise<{ run_id: string; decision: string }> {
    return this.request(`/runs/${runId}/reject`, { method: "POST" });
  }

  getScene(): Promise<SceneResponseDto> {
    return this.request("/scene");
  }
}
