import { spawn, type ChildProcess } from "node:child_process";
import { createInterface, type Interface } from "node:readline";

import { ConnectionError, ProtocolError, ScoreBatchError } from "./errors.js";
import {
  isItemError,
  type ConfigOverrides,
  type ItemError,
  type RolloutItem,
  type ScoreResponseItem,
  type ScoreResponseOrError,
} from "./types.js";
import { batchRequestId } from "./client.js";

export interface StdioClientConfig {
  /** Subprocess command, e.g. ["python3", "-m", "sqlreward.cli", "serve"]. */
  command: string[];
  cwd?: string;
  /** Whole-batch budget in milliseconds. */
  timeoutMs?: number;
}

const DEFAULT_TIMEOUT_MS = 60_000;

/**
 * Newline-delimited JSON transport over a spawned scoring service: one
 * request object per line in, one response per line out, in order.
 */
export class StdioRewardClient {
  private readonly proc: ChildProcess;
  private readonly lines: Interface;
  private readonly queue: string[] = [];
  private waiter: ((line: string) => void) | null = null;
  private readonly timeoutMs: number;
  private exited = false;

  constructor(config: StdioClientConfig) {
    if (config.command.length === 0) {
      throw new RangeError("command must name an executable");
    }
    this.timeoutMs = config.timeoutMs ?? DEFAULT_TIMEOUT_MS;
    this.proc = spawn(config.command[0], config.command.slice(1), {
      cwd: config.cwd,
      stdio: ["pipe", "pipe", "inherit"],
    });
    this.proc.on("exit", () => {
      this.exited = true;
    });
    this.lines = createInterface({ input: this.proc.stdout! });
    this.lines.on("line", (line) => {
      if (this.waiter) {
        const resolve = this.waiter;
        this.waiter = null;
        resolve(line);
      } else {
        this.queue.push(line);
      }
    });
  }

  private nextLine(deadline: number): Promise<string> {
    const queued = this.queue.shift();
    if (queued !== undefined) {
      return Promise.resolve(queued);
    }
    return new Promise((resolve, reject) => {
      const remaining = deadline - Date.now();
      if (remaining <= 0) {
        reject(new ConnectionError("stdio response timed out", 1));
        return;
      }
      const timer = setTimeout(() => {
        this.waiter = null;
        reject(new ConnectionError("stdio response timed out", 1));
      }, remaining);
      this.waiter = (line) => {
        clearTimeout(timer);
        resolve(line);
      };
    });
  }

  /** Same contract as the HTTP client: ordered responses or ScoreBatchError. */
  async scoreRollouts(
    batch: RolloutItem[],
    overrides?: ConfigOverrides,
  ): Promise<ScoreResponseItem[]> {
    if (batch.length === 0) {
      return [];
    }
    if (this.exited || !this.proc.stdin?.writable) {
      throw new ConnectionError("scoring subprocess is not running", 1);
    }
    const deadline = Date.now() + this.timeoutMs;
    for (let index = 0; index < batch.length; index++) {
      const item = batch[index];
      const request: Record<string, unknown> = {
        id: batchRequestId(index),
        question_id: item.question_id,
        db_id: item.db_id,
        rollout: item.rollout,
        gold_sql: item.gold_sql,
      };
      if (overrides !== undefined) {
        request.config_overrides = overrides;
      }
      this.proc.stdin.write(JSON.stringify(request) + "\n");
    }
    const responses: ScoreResponseOrError[] = [];
    for (let index = 0; index < batch.length; index++) {
      const line = await this.nextLine(deadline);
      let parsed: ScoreResponseOrError;
      try {
        parsed = JSON.parse(line);
      } catch {
        throw new ProtocolError(`response line is not JSON: ${line.slice(0, 120)}`);
      }
      if (!isItemError(parsed) && parsed.id !== batchRequestId(index)) {
        throw new ProtocolError(
          `response ${index} echoes id ${parsed.id}, expected ${batchRequestId(index)}`,
        );
      }
      responses.push(parsed);
    }
    const failures = responses.filter(isItemError) as ItemError[];
    if (failures.length > 0) {
      throw new ScoreBatchError(failures, responses);
    }
    return responses as ScoreResponseItem[];
  }

  /** Close stdin (the service flushes its snapshot on EOF) and wait for exit. */
  async close(): Promise<void> {
    if (this.exited) {
      return;
    }
    this.proc.stdin?.end();
    await new Promise<void>((resolve) => {
      const timer = setTimeout(() => {
        this.proc.kill("SIGTERM");
        resolve();
      }, 5000);
      this.proc.on("exit", () => {
        clearTimeout(timer);
        resolve();
      });
    });
  }
}
