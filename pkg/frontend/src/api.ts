import type { AppliedRecord, GestureVerdict, Snapshot, TurnMetricsView } from "./types.js";

/** One idempotency key per operator input: retries never duplicate events. */
export function newIdempotencyKey(): string {
  return `op-${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 10)}`;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    throw new ApiError(resp.status, `${resp.status} ${await resp.text()}`);
  }
  return (await resp.json()) as T;
}

export class SessionApi {
  constructor(private baseUrl: string) {}

  async createSession(): Promise<string> {
    const body = await asJson<{ id: string }>(
      await fetch(`${this.baseUrl}/sessions`, { method: "POST" }),
    );
    return body.id;
  }

  async getState(sid: string): Promise<Snapshot> {
    return asJson(await fetch(`${this.baseUrl}/sessions/${sid}/state`));
  }

  async postEvent(
    sid: string,
    kind: string,
    t: number,
    data: Record<string, unknown>,
    idempotencyKey?: string,
  ): Promise<AppliedRecord> {
    return asJson(
      await fetch(`${this.baseUrl}/sessions/${sid}/events`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({
          kind,
          t,
          data,
          idempotency_key: idempotencyKey ?? newIdempotencyKey(),
        }),
      }),
    );
  }

  /** Nod/shake: the server synthesizes a frame burst through its real
   *  optical-flow kernels unless direct mode is requested. */
  async postGesture(
    sid: string,
    kind: "nod" | "shake",
    t: number,
    direct = false,
    idempotencyKey?: string,
  ): Promise<{ verdict: GestureVerdict; record: AppliedRecord }> {
    return asJson(
      await fetch(`${this.baseUrl}/sessions/${sid}/gesture`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({
          kind,
          t,
          direct,
          idempotency_key: idempotencyKey ?? newIdempotencyKey(),
        }),
      }),
    );
  }

  async getMetrics(sid: string): Promise<TurnMetricsView[]> {
    const body = await asJson<{ turns: TurnMetricsView[] }>(
      await fetch(`${this.baseUrl}/sessions/${sid}/metrics`),
    );
    return body.turns;
  }
}
