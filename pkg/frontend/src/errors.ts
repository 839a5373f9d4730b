import type { ItemError, ScoreResponseOrError } from "./types.js";

/** The service was unreachable after all retry attempts. */
export class ConnectionError extends Error {
  constructor(message: string, public readonly attempts: number) {
    super(message);
    this.name = "ConnectionError";
  }
}

/** The service answered with a non-2xx status that retries did not clear. */
export class HttpStatusError extends Error {
  constructor(public readonly status: number, body: string) {
    super(`HTTP ${status}: ${body.slice(0, 200)}`);
    this.name = "HttpStatusError";
  }
}

/** The response body did not match the expected protocol shape. */
export class ProtocolError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ProtocolError";
  }
}

/** One or more batch items failed; carries every per-item failure. */
export class ScoreBatchError extends Error {
  constructor(
    public readonly failures: ItemError[],
    public readonly responses: ScoreResponseOrError[],
  ) {
    super(
      `${failures.length} of ${responses.length} batch items failed: ` +
        failures.map((f) => `${f.id ?? "?"}=${f.error.type}`).join(", "),
    );
    this.name = "ScoreBatchError";
  }
}
