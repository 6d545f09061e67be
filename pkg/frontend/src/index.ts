export { BridgeSession, BridgeClosedError } from "./bridge.js";
export { TrapEnv, EpisodeFinishedError, ProtocolError } from "./env.js";
export * from "./types.js";
