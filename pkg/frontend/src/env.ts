/**
 * Multi-agent environment over the engine's policy bridge.
 *
 * One engine subprocess serves one episode: reset() starts a fresh process
 * and returns the spawn observations, step() exchanges one protocol round.
 * Agent ids are stable within an episode: "captor_0".."captor_{K-1}" and
 * "target", restricted to the robots under wrapper control.  Rewards are
 * the engine's per-robot totals, bit-for-bit.
 *
 * No simulation logic lives here; everything observable comes off the wire.
 */

import { BridgeSession } from "./bridge.js";
import {
  ACTION_NAMES,
  EngineMessage,
  EnvConfig,
  NUM_ACTIONS,
  Observation,
  ObsMessage,
  OutcomeMessage,
  StepResult,
} from "./types.js";

export class EpisodeFinishedError extends Error {}
export class ProtocolError extends Error {}

export interface SpaceInfo {
  agentVectorLength: number;
  obstacleMask: [number, number];
}

export class TrapEnv {
  readonly config: EnvConfig;
  private session: BridgeSession | null = null;
  private idToAgent = new Map<number, string>();
  private agentToId = new Map<string, number>();
  private lastStep = -1;
  private done = false;
  private spaces = new Map<string, SpaceInfo>();

  constructor(config: EnvConfig) {
    this.config = config;
  }

  /** Agent ids exposed this episode (set by reset()). */
  get agentIds(): string[] {
    return [...this.agentToId.keys()];
  }

  actionSpace(): { n: number; names: readonly string[] } {
    return { n: NUM_ACTIONS, names: ACTION_NAMES };
  }

  observationSpace(agent: string): SpaceInfo {
    const info = this.spaces.get(agent);
    if (!info) throw new Error(`unknown agent ${agent} (reset first)`);
    return info;
  }

  async reset(seed?: number): Promise<Record<string, Observation>> {
    this.close();
    this.done = false;
    this.session = BridgeSession.start(this.config, seed ?? this.config.seed);
    const msg = await this.session.readMessage();
    const obs = this.expectObs(msg, 0);
    this.idToAgent.clear();
    this.agentToId.clear();
    this.spaces.clear();
    for (const robot of obs.robots) {
      const name =
        robot.team === "target" ? "target" : `captor_${robot.id}`;
      this.idToAgent.set(robot.id, name);
      this.agentToId.set(name, robot.id);
      this.spaces.set(name, {
        agentVectorLength: robot.obs.agent.length,
        obstacleMask: [robot.obs.obstacle.length, robot.obs.obstacle[0].length],
      });
    }
    this.lastStep = 0;
    return this.keyByAgent(obs);
  }

  async step(actions: Record<string, number>): Promise<StepResult> {
    if (!this.session) throw new EpisodeFinishedError("call reset() first");
    if (this.done) throw new EpisodeFinishedError("episode already finished");
    const numeric: Record<number, number> = {};
    for (const [agent, code] of Object.entries(actions)) {
      const id = this.agentToId.get(agent);
      if (id === undefined) throw new ProtocolError(`unknown agent ${agent}`);
      if (!Number.isInteger(code) || code < 0 || code >= NUM_ACTIONS) {
        throw new ProtocolError(`invalid action code ${code} for ${agent}`);
      }
      numeric[id] = code;
    }
    for (const agent of this.agentToId.keys()) {
      if (!(agent in actions)) {
        throw new ProtocolError(`missing action for ${agent}`);
      }
    }
    this.session.sendActions(this.lastStep, numeric);
    const msg = await this.session.readMessage();
    const obs = this.expectObs(msg, this.lastStep + 1);
    this.lastStep = obs.step;
    const rewards: Record<string, number> = {};
    for (const [agent, id] of this.agentToId.entries()) {
      const breakdown = obs.rewards?.[String(id)];
      rewards[agent] = breakdown ? breakdown.total : 0;
    }
    const dones = { __all__: obs.done } as StepResult["dones"];
    for (const agent of this.agentToId.keys()) {
      dones[agent] = obs.done;
    }
    const result: StepResult = {
      observations: this.keyByAgent(obs),
      rewards,
      dones,
      infos: { step: obs.step, rewardBreakdowns: obs.rewards },
    };
    if (obs.done) {
      this.done = true;
      const outcome = await this.session.readMessage();
      if ((outcome as OutcomeMessage).kind === "outcome") {
        result.infos.success = (outcome as OutcomeMessage).success;
        result.infos.stepsUsed = (outcome as OutcomeMessage).steps_used;
      }
    }
    return result;
  }

  private expectObs(msg: EngineMessage, step: number): ObsMessage {
    if ("error" in msg) {
      throw new ProtocolError(`engine reported: ${msg.error}`);
    }
    if (msg.kind !== "obs" || msg.step !== step) {
      throw new ProtocolError(
        `expected obs for step ${step}, got ${JSON.stringify(msg).slice(0, 120)}`,
      );
    }
    return msg;
  }

  private keyByAgent(obs: ObsMessage): Record<string, Observation> {
    const out: Record<string, Observation> = {};
    for (const robot of obs.robots) {
      const name = this.idToAgent.get(robot.id);
      if (name) out[name] = robot.obs;
    }
    return out;
  }

  close(): void {
    if (this.session) {
      this.session.close();
      this.session = null;
    }
  }
}
