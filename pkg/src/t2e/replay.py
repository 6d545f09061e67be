"""Log verification: re-simulate and re-derive, then diff bit-for-bit.

Two independent checks run over a trajectory log:

* re-simulation: rebuild the map from the embedded text, replay the logged
  actions from the spawn snapshot, and compare every state, reward and
  capture flag against the log;
* re-derivation: recompute rewards purely from the logged states and flags
  (no simulation) and compare against the logged rewards.

Both must match exactly; any difference is reported field by field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import rewards as rewards_mod
from .engine import TrajectoryLog, WorldState, map_hash, step
from .rewards import RewardMode


@dataclass
class ReplayResult:
    steps: int
    diffs: list[str] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.diffs

    def to_json(self) -> dict:
        return {"steps": self.steps, "clean": self.clean, "diffs": self.diffs}


def rederive_rewards(log: TrajectoryLog) -> list[list[dict]]:
    """Recompute every step's reward breakdowns from logged states alone."""
    cfg = log.config
    out = []
    prev_states = log.spawn_states
    for rec in log.steps:
        comp = rewards_mod.competition_reward(prev_states, rec.states,
                                              cfg.reward, rec.captured)
        if cfg.reward.mode is RewardMode.COMPETITIVE:
            comp.append(rewards_mod.target_competition(comp, cfg.reward))
        else:
            comp.append(0.0)
        step_rewards = []
        for c, fv in zip(comp, rec.fv):
            priv = rewards_mod.private_reward(fv, cfg.reward)
            step_rewards.append({"competition": c, "private": priv,
                                 "total": c + priv})
        out.append(step_rewards)
        prev_states = rec.states
    return out


def verify_log(log: TrajectoryLog) -> ReplayResult:
    result = ReplayResult(steps=log.steps_used)
    grid = log.grid()
    if map_hash(grid) != log.map_hash:
        result.diffs.append("map hash mismatch against embedded map text")
        return result

    # 1. Reward re-derivation from logged states.
    derived = rederive_rewards(log)
    for rec, per_robot in zip(log.steps, derived):
        for i, (logged, fresh) in enumerate(zip(rec.rewards, per_robot)):
            if (logged.competition != fresh["competition"]
                    or logged.private != fresh["private"]):
                result.diffs.append(
                    f"step {rec.step} robot {i}: logged reward "
                    f"{logged.to_json()} != derived {fresh}")

    # 2. Full re-simulation from the spawn snapshot.
    world = WorldState(grid=grid, specs=log.config.specs(),
                       states=log.spawn_states, config=log.config)
    for rec in log.steps:
        world, breakdowns, done, info = step(world, list(rec.actions))
        for i, (sim, logged) in enumerate(zip(world.states, rec.states)):
            if sim != logged:
                result.diffs.append(
                    f"step {rec.step} robot {i}: simulated state {sim} "
                    f"!= logged {logged}")
        for i, (sim_r, logged_r) in enumerate(zip(breakdowns, rec.rewards)):
            if (sim_r.competition != logged_r.competition
                    or sim_r.private != logged_r.private):
                result.diffs.append(
                    f"step {rec.step} robot {i}: simulated reward differs")
        if info["captured"] != rec.captured:
            result.diffs.append(f"step {rec.step}: capture flag differs")
        if list(info["fv"]) != list(rec.fv):
            result.diffs.append(f"step {rec.step}: repulsion flags differ")
    if world.captured != log.success:
        result.diffs.append("outcome success flag differs from final capture")
    return result
