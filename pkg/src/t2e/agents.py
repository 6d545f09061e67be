"""Built-in policies: virtual-force heuristics, scripted and random sources.

The heuristic evader is pushed away from nearby captors (inverse-square) and
from walls; the smoke-test pursuer is pulled toward the target, spread apart
from teammates, and pushed off walls.  Both turn their desired force into a
discrete action by cosine similarity against the motion direction each action
induces, with a fixed tie-break order, so they are deterministic when the
action temperature is zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import Action, RobotState, RobotSpec
from .gridmap import OccupancyGrid, raycast

# Candidate motion directions relative to the heading.  Reverse thrust keeps
# the heading axis, so steering preference goes to the turn actions; Backward
# stays in the ranking but never beats Forward on the tie-break.
_TIE_ORDER = (Action.FORWARD, Action.TURN_LEFT, Action.TURN_RIGHT,
              Action.BACKWARD, Action.STOP)


@dataclass(frozen=True)
class HeuristicConfig:
    w_opponent: float = 4.0
    w_teammate: float = 0.5
    w_obstacle: float = 1.0
    perception_radius: float = 6.0
    noise_sigma: float = 0.0       # action-score temperature
    force_threshold: float = 1e-6  # below this, emit Stop
    teammate_radius: float = 1.0
    contact_dist: float = 0.4      # pursuer holds contact inside this range
    wall_radius: float = 1.5       # policy-level wall sensing range
    wall_cap: float = 0.5          # per-ray wall force magnitude cap

    def __post_init__(self):
        if self.perception_radius <= 0:
            raise ValueError("perception_radius must be positive")


def wall_force(grid: OccupancyGrid, state: RobotState, spec: RobotSpec,
               radius: float, cap: float) -> tuple[float, float]:
    """Policy-level wall avoidance: the repulsion formula evaluated with a
    wider sensing radius and a per-ray magnitude cap, so the policies steer
    off walls early without the near-contact force spike."""
    px = py = 0.0
    m = spec.repulse_m
    d_floor = grid.resolution * 1e-6
    for i in range(1, m + 1):
        theta = state.heading + 2.0 * math.pi * i / m
        d = raycast(grid, state.position, theta, radius)
        if d < radius:
            w = min(cap, -math.log(max(d, d_floor) / radius) + 1.0)
            px -= w * math.cos(theta)
            py -= w * math.sin(theta)
    return (px, py)


def rank_actions(force: tuple[float, float], heading: float,
                 config: HeuristicConfig,
                 rng: np.random.Generator | None = None) -> list[Action]:
    """Rank actions by cosine similarity of their induced motion direction
    with the force, ties resolved by the fixed order."""
    fx, fy = force
    mag = math.hypot(fx, fy)
    if mag < config.force_threshold:
        return [Action.STOP]
    candidates = {
        Action.FORWARD: heading,
        Action.TURN_LEFT: heading + math.pi / 6.0,
        Action.TURN_RIGHT: heading - math.pi / 6.0,
        Action.BACKWARD: heading,
    }
    scored = []
    for order, action in enumerate(_TIE_ORDER):
        theta = candidates.get(action)
        if theta is None:
            continue
        score = (fx * math.cos(theta) + fy * math.sin(theta)) / mag
        if config.noise_sigma > 0.0 and rng is not None:
            score += rng.normal(0.0, config.noise_sigma)
        scored.append((-score, order, action))
    scored.sort()
    return [action for _, _, action in scored]


def project_action(force: tuple[float, float], heading: float,
                   config: HeuristicConfig,
                   rng: np.random.Generator | None = None) -> Action:
    """Pick the action whose induced direction best matches the force."""
    return rank_actions(force, heading, config, rng)[0]


class Policy:
    """A per-team action source; subclasses implement act()."""

    name = "policy"

    def act(self, world, indices: list[int],
            rng: np.random.Generator) -> dict[int, Action]:
        raise NotImplementedError


class HeuristicEvader(Policy):
    name = "heuristic-evader"

    def __init__(self, config: HeuristicConfig | None = None):
        self.config = config or HeuristicConfig()

    def act(self, world, indices, rng):
        cfg = self.config
        out = {}
        for idx in indices:
            me = world.states[idx]
            px, py = me.position
            fx = fy = 0.0
            for k in world.captor_indices:
                ox, oy = world.states[k].position
                dx, dy = px - ox, py - oy
                d2 = dx * dx + dy * dy
                if 0.0 < d2 <= cfg.perception_radius ** 2:
                    fx += cfg.w_opponent * dx / d2
                    fy += cfg.w_opponent * dy / d2
            wx, wy = wall_force(world.grid, me, world.specs[idx],
                                cfg.wall_radius, cfg.wall_cap)
            fx += cfg.w_obstacle * wx
            fy += cfg.w_obstacle * wy
            out[idx] = project_action((fx, fy), me.heading, cfg,
                                      rng if cfg.noise_sigma > 0 else None)
        return out


class HeuristicPursuer(Policy):
    name = "heuristic-pursuer"

    def __init__(self, config: HeuristicConfig | None = None):
        self.config = config or HeuristicConfig()

    def act(self, world, indices, rng):
        cfg = self.config
        target = world.states[world.target_index]
        tx, ty = target.position
        out = {}
        for idx in indices:
            me = world.states[idx]
            px, py = me.position
            dx, dy = tx - px, ty - py
            dist = math.hypot(dx, dy)
            if dist < cfg.contact_dist:
                out[idx] = Action.STOP  # hold contact
                continue
            fx = cfg.w_opponent * dx / dist
            fy = cfg.w_opponent * dy / dist
            stacked_below = 0
            for k in world.captor_indices:
                if k == idx:
                    continue
                ox, oy = world.states[k].position
                sx, sy = px - ox, py - oy
                d = math.hypot(sx, sy)
                if d == 0.0:
                    if k < idx:
                        stacked_below += 1
                elif d < cfg.teammate_radius:
                    w = cfg.w_teammate * (1.0 / d - 1.0 / cfg.teammate_radius)
                    fx += w * sx / d
                    fy += w * sy / d
            wx, wy = wall_force(world.grid, me, world.specs[idx],
                                cfg.wall_radius, cfg.wall_cap)
            fx += cfg.w_obstacle * wx
            fy += cfg.w_obstacle * wy
            ranked = rank_actions((fx, fy), me.heading, cfg,
                                  rng if cfg.noise_sigma > 0 else None)
            # exactly stacked captors break the tie by robot index: each takes
            # the next-ranked action so the pile disperses
            out[idx] = ranked[min(stacked_below, len(ranked) - 1)]
        return out


class StationaryPolicy(Policy):
    name = "stationary"

    def act(self, world, indices, rng):
        return {i: Action.STOP for i in indices}


class RandomPolicy(Policy):
    """Uniform random actions drawn from the episode generator."""

    name = "random"

    def act(self, world, indices, rng):
        codes = rng.integers(0, len(Action), size=len(indices))
        return {i: Action(int(c)) for i, c in zip(indices, codes)}


class ScriptedPolicy(Policy):
    """Replays fixed per-robot action sequences; holds the last action when a
    sequence runs out."""

    def __init__(self, sequences: dict[int, list[Action]], name: str = "scripted"):
        if not sequences or any(not seq for seq in sequences.values()):
            raise ValueError("every scripted robot needs a non-empty sequence")
        self.sequences = sequences
        self.name = name

    def act(self, world, indices, rng):
        t = world.step
        out = {}
        for i in indices:
            seq = self.sequences[i]
            out[i] = seq[min(t, len(seq) - 1)]
        return out

    @classmethod
    def from_file(cls, path: str | Path, team: str,
                  n_captors: int) -> "ScriptedPolicy":
        """Load ``{"captors": [[codes...], ...], "target": [codes...]}``."""
        data = json.loads(Path(path).read_text())
        if team == "captor":
            rows = data["captors"]
            if len(rows) < n_captors:
                raise ValueError(f"script has {len(rows)} captor rows, "
                                 f"need {n_captors}")
            seqs = {i: [Action(c) for c in rows[i]] for i in range(n_captors)}
        else:
            seqs = {n_captors: [Action(c) for c in data["target"]]}
        return cls(seqs, name=f"scripted:{Path(path).name}")


def resolve_policy(ref, n_captors: int | None = None, team: str | None = None) -> Policy:
    """Turn a policy reference (object or identifier string) into a Policy."""
    if isinstance(ref, Policy):
        return ref
    if not isinstance(ref, str):
        raise TypeError(f"cannot resolve policy from {ref!r}")
    if ref == "heuristic-evader":
        return HeuristicEvader()
    if ref == "heuristic-pursuer":
        return HeuristicPursuer()
    if ref == "stationary":
        return StationaryPolicy()
    if ref == "random":
        return RandomPolicy()
    if ref.startswith("scripted:"):
        if team is None or n_captors is None:
            raise ValueError("scripted policies need team and captor count")
        return ScriptedPolicy.from_file(ref.split(":", 1)[1], team, n_captors)
    raise ValueError(f"unknown policy identifier {ref!r}")
