/**
 * Random-policy rollout example: drives one seeded episode with uniform
 * random actions for every agent and prints per-step rewards.
 *
 *   node --loader ts-node/esm src/randomRollout.ts [mapName] [seed]
 */

import { TrapEnv } from "./env.js";
import { NUM_ACTIONS } from "./types.js";

// Minimal deterministic generator so rollouts are reproducible.
function lcg(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
}

async function main(): Promise<void> {
  const map = process.argv[2] ?? "arena_6x6";
  const seed = Number(process.argv[3] ?? 7);
  const env = new TrapEnv({
    map,
    captors: 3,
    seed,
    maxSteps: 100,
    control: "all",
    pythonPath: process.env.T2E_PYTHONPATH,
  });
  const rand = lcg(seed);
  await env.reset();
  console.log(`agents: ${env.agentIds.join(", ")}`);
  let total = 0;
  for (;;) {
    const actions: Record<string, number> = {};
    for (const agent of env.agentIds) {
      actions[agent] = Math.floor(rand() * NUM_ACTIONS);
    }
    const result = await env.step(actions);
    const stepTotal = Object.values(result.rewards).reduce((a, b) => a + b, 0);
    total += stepTotal;
    console.log(
      `step ${result.infos.step}: reward ${stepTotal.toFixed(3)} ` +
        `done ${result.dones.__all__}`,
    );
    if (result.dones.__all__) {
      console.log(
        `episode over: success=${result.infos.success} ` +
          `steps=${result.infos.stepsUsed} totalReward=${total.toFixed(3)}`,
      );
      break;
    }
  }
  env.close();
}

main().catch((err) => {
  console.error(err);
  process.exit(1);
});
