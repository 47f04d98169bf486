/**
 * Typed client for the pattern API. The server is the single source of truth
 * for schedules; this client never computes stages locally.
 */

export interface PatternSummary {
  id: number;
  group: string;
  templates: string[];
  support: number;
  probability: number;
}

export interface PatternView extends PatternSummary {
  sql_ids: string[];
  model_ord: number;
  theta: number;
  deps: [number, number][];
  stages: number[][];
  node_rt: number[] | null;
  version: string;
}

export interface ScheduleView {
  pattern_id: number;
  stages: number[][];
  stage_templates: string[][];
  stage_times: number[] | null;
  version: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<never> {
  let message = `HTTP ${response.status}`;
  try {
    const body = (await response.json()) as { error?: string };
    if (body.error) message = body.error;
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(response.status, message);
}

export class PatternApi {
  constructor(readonly baseUrl: string) {}

  private async get<T>(path: string): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`);
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string; patterns: number }> {
    return this.get("/health");
  }

  listPatterns(): Promise<PatternSummary[]> {
    return this.get("/patterns");
  }

  getPattern(id: number): Promise<PatternView> {
    return this.get(`/patterns/${id}`);
  }

  getSchedule(id: number): Promise<ScheduleView> {
    return this.get(`/patterns/${id}/schedule`);
  }

  async addDependency(
    id: number,
    from: number,
    to: number,
    version: string,
  ): Promise<PatternView> {
    const response = await fetch(`${this.baseUrl}/patterns/${id}/deps`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ from, to, version }),
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as PatternView;
  }

  async removeDependency(
    id: number,
    from: number,
    to: number,
    version: string,
  ): Promise<PatternView> {
    const query = `?version=${encodeURIComponent(version)}`;
    const response = await fetch(`${this.baseUrl}/patterns/${id}/deps/${from}/${to}${query}`, {
      method: "DELETE",
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as PatternView;
  }
}
