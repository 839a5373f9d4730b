export { RewardClient, batchRequestId, serializeBatch } from "./client.js";
export { StdioRewardClient, type StdioClientConfig } from "./stdio.js";
export {
  ConnectionError,
  HttpStatusError,
  ProtocolError,
  ScoreBatchError,
} from "./errors.js";
export type {
  ClientConfig,
  ConfigOverrides,
  ItemError,
  MemoryStats,
  RewardBreakdown,
  RolloutItem,
  ScoreRequest,
  ScoreResponseItem,
  ScoreResponseOrError,
} from "./types.js";
export { isItemError } from "./types.js";
