/** Wire types for the sqlreward scoring service, field names verbatim. */

export interface RolloutItem {
  question_id: string;
  db_id: string;
  rollout: string;
  gold_sql: string;
}

export interface ConfigOverrides {
  preset?: string;
  k?: number;
  scope?: string;
  memory_insert?: boolean;
  timeout?: number;
}

export interface ScoreRequest {
  id: string;
  question_id: string;
  db_id: string;
  rollout: string;
  gold_sql: string;
  config_overrides?: ConfigOverrides;
}

export interface RewardBreakdown {
  format: number;
  exec: number;
  atomic: number;
  memory: number;
  total: number;
}

export interface ScoreResponseItem {
  id: string;
  breakdown: RewardBreakdown;
  outcome: string;
  memory_action: string;
  elapsed_ms: number;
}

export interface ItemError {
  id: string | null;
  error: { type: string; message: string };
  elapsed_ms?: number;
}

export type ScoreResponseOrError = ScoreResponseItem | ItemError;

export function isItemError(value: ScoreResponseOrError): value is ItemError {
  return (value as ItemError).error !== undefined;
}

export interface MemoryStats {
  bank_size: number;
  dims: number;
  scope_default: string;
}

export interface ClientConfig {
  /** Base URL of a running scoring service, e.g. http://127.0.0.1:8731 */
  endpoint: string;
  /** Per-request budget in milliseconds. */
  timeoutMs?: number;
  /** Extra attempts after the first failure (network or 5xx). */
  retries?: number;
}
