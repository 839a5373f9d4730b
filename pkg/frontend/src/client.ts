import {
  ConnectionError,
  HttpStatusError,
  ProtocolError,
  ScoreBatchError,
} from "./errors.js";
import {
  isItemError,
  type ClientConfig,
  type ConfigOverrides,
  type ItemError,
  type MemoryStats,
  type RolloutItem,
  type ScoreRequest,
  type ScoreResponseItem,
  type ScoreResponseOrError,
} from "./types.js";

const DEFAULT_TIMEOUT_MS = 60_000;

/** Request ids are positional: r000, r001, ... within one batch. */
export function batchRequestId(index: number): string {
  return `r${String(index).padStart(3, "0")}`;
}

/**
 * Canonical serialization of one batch; key order is fixed so golden files
 * can pin the exact bytes the client puts on the wire.
 */
export function serializeBatch(
  batch: RolloutItem[],
  overrides?: ConfigOverrides,
): string {
  const requests: ScoreRequest[] = batch.map((item, index) => {
    const request: ScoreRequest = {
      id: batchRequestId(index),
      question_id: item.question_id,
      db_id: item.db_id,
      rollout: item.rollout,
      gold_sql: item.gold_sql,
    };
    if (overrides !== undefined) {
      request.config_overrides = overrides;
    }
    return request;
  });
  return JSON.stringify({ requests });
}

/**
 * Synchronous-batch client for the scoring service: one in-flight call per
 * instance; trainers batch a GRPO group per call themselves.
 */
export class RewardClient {
  private readonly endpoint: string;
  private readonly timeoutMs: number;
  private readonly retries: number;

  constructor(config: ClientConfig) {
    if (config.retries !== undefined && config.retries < 0) {
      throw new RangeError("retries must be >= 0");
    }
    this.endpoint = config.endpoint.replace(/\/+$/, "");
    this.timeoutMs = config.timeoutMs ?? DEFAULT_TIMEOUT_MS;
    this.retries = config.retries ?? 2;
  }

  /** Probe /healthz; resolves once the service answers. */
  async connect(): Promise<{ status: string; bank_size: number }> {
    const body = await this.request("GET", "/healthz");
    return JSON.parse(body);
  }

  /**
   * Score one rollout group. Responses come back in request order; if any
   * item carries an error object, a ScoreBatchError with every per-item
   * failure is thrown instead.
   */
  async scoreRollouts(
    batch: RolloutItem[],
    overrides?: ConfigOverrides,
  ): Promise<ScoreResponseItem[]> {
    if (batch.length === 0) {
      return [];
    }
    const body = await this.request("POST", "/score", serializeBatch(batch, overrides));
    let parsed: { responses?: ScoreResponseOrError[] };
    try {
      parsed = JSON.parse(body);
    } catch {
      throw new ProtocolError(`response is not JSON: ${body.slice(0, 120)}`);
    }
    const responses = parsed.responses;
    if (!Array.isArray(responses) || responses.length !== batch.length) {
      throw new ProtocolError(
        `expected ${batch.length} responses, got ${responses?.length ?? "none"}`,
      );
    }
    responses.forEach((item, index) => {
      if (!isItemError(item) && item.id !== batchRequestId(index)) {
        throw new ProtocolError(
          `response ${index} echoes id ${item.id}, expected ${batchRequestId(index)}`,
        );
      }
    });
    const failures = responses.filter(isItemError) as ItemError[];
    if (failures.length > 0) {
      throw new ScoreBatchError(failures, responses);
    }
    return responses as ScoreResponseItem[];
  }

  async memoryStats(): Promise<MemoryStats> {
    const body = await this.request("GET", "/memory/stats");
    const stats = JSON.parse(body);
    if (typeof stats.bank_size !== "number" || typeof stats.dims !== "number") {
      throw new ProtocolError(`malformed stats payload: ${body.slice(0, 120)}`);
    }
    return stats;
  }

  private async request(
    method: "GET" | "POST",
    path: string,
    payload?: string,
  ): Promise<string> {
    const attempts = this.retries + 1;
    let lastError: Error | null = null;
    for (let attempt = 1; attempt <= attempts; attempt++) {
      try {
        const response = await fetch(this.endpoint + path, {
          method,
          headers: { "content-type": "application/json" },
          body: payload,
          signal: AbortSignal.timeout(this.timeoutMs),
        });
        const text = await response.text();
        if (response.status >= 500) {
          lastError = new HttpStatusError(response.status, text);
        } else if (!response.ok) {
          throw new HttpStatusError(response.status, text);
        } else {
          return text;
        }
      } catch (err) {
        if (err instanceof HttpStatusError && err.status < 500) {
          throw err;
        }
        lastError = err instanceof Error ? err : new Error(String(err));
      }
      if (attempt < attempts) {
        await new Promise((resolve) => setTimeout(resolve, 100 * attempt));
      }
    }
    throw new ConnectionError(
      `${method} ${path} failed after ${attempts} attempts: ${lastError?.message}`,
      attempts,
    );
  }
}
