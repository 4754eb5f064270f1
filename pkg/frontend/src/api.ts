// Thin client for the console API. Only documented endpoints; every
// mutation goes through a POST here, never anywhere else.

import type {
  ApiFailure,
  ApiResult,
  LayoutDoc,
  PlanPayload,
  Snapshot,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

async function asFailure(resp: Response): Promise<ApiFailure> {
  let error = "http_error";
  let detail = `status ${resp.status}`;
  try {
    const body = (await resp.json()) as { error?: string; detail?: string };
    if (body.error) error = body.error;
    if (body.detail) detail = body.detail;
  } catch {
    // non-JSON error body; keep the generic detail
  }
  return { ok: false, status: resp.status, error, detail };
}

export class ConsoleApi {
  constructor(
    readonly base: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.base + path);
    if (!resp.ok) throw new Error(`GET ${path} failed: ${resp.status}`);
    return (await resp.json()) as T;
  }

  private async post<T>(
    path: string,
    body: unknown,
  ): Promise<ApiResult<{ value: T }>> {
    const resp = await this.fetchImpl(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) return asFailure(resp);
    return { ok: true, value: (await resp.json()) as T };
  }

  state(): Promise<Snapshot> {
    return this.get<Snapshot>("/state");
  }

  layout(): Promise<LayoutDoc> {
    return this.get<LayoutDoc>("/layout");
  }

  async goto(
    target: number | string,
  ): Promise<ApiResult<{ plan: PlanPayload }>> {
    const result = await this.post<{ plan: PlanPayload }>("/goto", { target });
    if (!result.ok) return result;
    return { ok: true, plan: result.value.plan };
  }

  async vibrate(
    kind: string,
    ampMm: number,
    periodS: number,
    durationS: number,
  ): Promise<ApiResult<{ done: true }>> {
    const result = await this.post<{ ok: boolean }>("/vibrate", {
      kind,
      amp_mm: ampMm,
      period_s: periodS,
      duration_s: durationS,
    });
    if (!result.ok) return result;
    return { ok: true, done: true };
  }

  async connector(
    id: number,
    state: "attached" | "detached",
  ): Promise<ApiResult<{ detached: number[] }>> {
    const result = await this.post<{ detached: number[] }>("/connector", {
      id,
      state,
    });
    if (!result.ok) return result;
    return { ok: true, detached: result.value.detached };
  }

  async scenario(
    name: string,
    params: Record<string, unknown> = {},
  ): Promise<ApiResult<{ log: Record<string, unknown>[] }>> {
    const result = await this.post<{ log: Record<string, unknown>[] }>(
      "/scenario",
      { name, params },
    );
    if (!result.ok) return result;
    return { ok: true, log: result.value.log };
  }

  async position(vertex: number | string): Promise<ApiResult<{ done: true }>> {
    const result = await this.post<Snapshot>("/position", { vertex });
    if (!result.ok) return result;
    return { ok: true, done: true };
  }
}
