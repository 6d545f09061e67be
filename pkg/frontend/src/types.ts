/**
 * Wire types of the engine's policy-bridge protocol (one JSON object per
 * line in each direction) and the wrapper's configuration surface.
 */

/** Per-robot observation exactly as the engine serializes it. */
export interface Observation {
  agent: number[];
  obstacle: number[][];
}

export interface RewardBreakdown {
  competition: number;
  private: number;
  total: number;
}

export type Team = "captor" | "target";

export interface RobotObs {
  id: number;
  team: Team;
  obs: Observation;
}

/** Engine -> client step message. */
export interface ObsMessage {
  v: 1;
  kind: "obs";
  step: number;
  robots: RobotObs[];
  rewards: Record<string, RewardBreakdown> | null;
  done: boolean;
}

/** Engine -> client closing message. */
export interface OutcomeMessage {
  v: 1;
  kind: "outcome";
  success: boolean;
  steps_used: number;
}

export interface ProtocolErrorMessage {
  v: 1;
  error: string;
  detail?: string;
}

export type EngineMessage = ObsMessage | OutcomeMessage | ProtocolErrorMessage;

/** Client -> engine reply. */
export interface ActionMessage {
  v: 1;
  step: number;
  actions: { id: number; a: number }[];
}

export const ACTION_NAMES = [
  "forward",
  "turnleft",
  "turnright",
  "stop",
  "backward",
] as const;

export const NUM_ACTIONS = ACTION_NAMES.length;

export type Control = "captors" | "target" | "all";

export interface EnvConfig {
  /** Map name resolvable by the engine, or a path to a .t2e.map file. */
  map: string;
  captors: number;
  seed: number;
  speedRatio?: number;
  maxSteps?: number;
  mode?: "cooperative" | "competitive";
  /** Which robots the wrapper controls; the rest run internal policies. */
  control?: Control;
  captorPolicy?: string;
  targetPolicy?: string;
  /** Command used to start the engine, e.g. ["python3"]. */
  pythonCmd?: string[];
  /** Optional PYTHONPATH entry for running from a source checkout. */
  pythonPath?: string;
  /** When set, the engine writes its episode log here. */
  logPath?: string;
  /** Embed observations in the engine-side log (parity testing). */
  emitObs?: boolean;
}

export interface StepResult {
  observations: Record<string, Observation>;
  rewards: Record<string, number>;
  dones: Record<string, boolean> & { __all__: boolean };
  infos: {
    step: number;
    rewardBreakdowns: Record<string, RewardBreakdown> | null;
    success?: boolean;
    stepsUsed?: number;
  };
}
