"""Episode orchestration: spawning, stepping, logging, replay, metrics.

All randomness flows through one seeded PCG64 generator per episode.  The
state-advance order is fixed and documented so logs replay bit-exactly:

1. map selection (one draw, only when the config lists several maps),
2. spawn attempts (each attempt draws 1 + K cell indices in one vector call),
3. headings (one vector draw, captors first, target last),
4. per-step policy draws, captor policy before target policy.

Robots are indexed captors ``0..K-1``, target ``K``.  All robots advance
simultaneously from the same pre-step snapshot.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import dynamics, rewards
from .dynamics import Action, RobotSpec, RobotState, captor_spec, target_spec
from .gridmap import OccupancyGrid, clearance_field, find_map, parse_map
from .rewards import CaptureMethod, RewardBreakdown, RewardConfig, RewardMode

LOG_VERSION = 1
SPEED_RATIO_PRESETS = (1.0, 1.2, 1.4)


class SpawnExhaustedError(RuntimeError):
    """No valid spawn configuration found within the attempt budget."""


class EpisodeFinishedError(RuntimeError):
    """step() called on a finished episode."""


class ActionCountMismatchError(ValueError):
    """Number of actions does not match the number of robots."""


class EmptyInputError(ValueError):
    """Metrics requested over an empty log collection."""


@dataclass(frozen=True)
class SpawnConfig:
    max_captor_spread: float = 4.0
    max_captor_target_dist: float = 10.0
    min_captor_target_dist: float = 2.0
    min_wall_clearance: float = dynamics.ROBOT_RADIUS + 0.05
    max_attempts: int = 10_000

    def __post_init__(self):
        if min(self.max_captor_spread, self.max_captor_target_dist,
               self.min_captor_target_dist, self.min_wall_clearance) <= 0:
            raise ValueError("spawn distances must be positive")
        if self.min_captor_target_dist >= self.max_captor_target_dist:
            raise ValueError("min captor-target distance must be below the max")

    def to_json(self) -> dict:
        return {"max_captor_spread": self.max_captor_spread,
                "max_captor_target_dist": self.max_captor_target_dist,
                "min_captor_target_dist": self.min_captor_target_dist,
                "min_wall_clearance": self.min_wall_clearance,
                "max_attempts": self.max_attempts}

    @classmethod
    def from_json(cls, data: dict) -> "SpawnConfig":
        return cls(**data)


@dataclass(frozen=True)
class EpisodeConfig:
    map: object                      # name, path, list of names, or a grid
    n_captors: int = 3
    speed_ratio: float = 1.0         # target speed / captor speed
    max_steps: int = 500
    seed: int = 0
    dt: float = dynamics.DEFAULT_DT
    capture_method: CaptureMethod = CaptureMethod.COLLISION_PROXY
    turn_thrust: bool = True
    reward: RewardConfig = field(default_factory=RewardConfig)
    spawn: SpawnConfig = field(default_factory=SpawnConfig)

    def __post_init__(self):
        if self.n_captors < 1:
            raise ValueError("need at least one captor")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.speed_ratio <= 0:
            raise ValueError("speed_ratio must be positive")

    def specs(self) -> tuple[RobotSpec, ...]:
        captor = captor_spec(turn_thrust=self.turn_thrust)
        target = target_spec(max_speed=dynamics.CAPTOR_MAX_SPEED * self.speed_ratio,
                             turn_thrust=self.turn_thrust)
        return tuple([captor] * self.n_captors + [target])

    def map_refs(self) -> list:
        return list(self.map) if isinstance(self.map, (list, tuple)) else [self.map]

    def to_json(self) -> dict:
        refs = [m.name if isinstance(m, OccupancyGrid) else str(m)
                for m in self.map_refs()]
        return {
            "map": refs if len(refs) > 1 else refs[0],
            "n_captors": self.n_captors,
            "speed_ratio": self.speed_ratio,
            "max_steps": self.max_steps,
            "seed": self.seed,
            "dt": self.dt,
            "capture_method": self.capture_method.value,
            "turn_thrust": self.turn_thrust,
            "mode": self.reward.mode.value,
            "reward": {"k1": self.reward.k1, "k2": self.reward.k2,
                       "k3": self.reward.k3, "d_cs": self.reward.d_cs,
                       "f_thre": self.reward.f_thre,
                       "step_penalty": self.reward.step_penalty,
                       "repulse_penalty": self.reward.repulse_penalty},
            "spawn": self.spawn.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "EpisodeConfig":
        reward_data = dict(data.get("reward", {}))
        reward = RewardConfig(mode=RewardMode(data.get("mode", "cooperative")),
                              **reward_data)
        spawn = SpawnConfig.from_json(data["spawn"]) if "spawn" in data else SpawnConfig()
        return cls(
            map=data["map"],
            n_captors=data.get("n_captors", 3),
            speed_ratio=data.get("speed_ratio", 1.0),
            max_steps=data.get("max_steps", 500),
            seed=data.get("seed", 0),
            dt=data.get("dt", dynamics.DEFAULT_DT),
            capture_method=CaptureMethod(data.get("capture_method",
                                                  "collision-proxy")),
            turn_thrust=data.get("turn_thrust", True),
            reward=reward,
            spawn=spawn,
        )


@dataclass(frozen=True)
class WorldState:
    """Immutable world snapshot; stepping returns a new one."""

    grid: OccupancyGrid
    specs: tuple[RobotSpec, ...]
    states: tuple[RobotState, ...]
    config: EpisodeConfig
    step: int = 0
    done: bool = False
    captured: bool = False

    @property
    def n_captors(self) -> int:
        return len(self.states) - 1

    @property
    def captor_indices(self) -> list[int]:
        return list(range(self.n_captors))

    @property
    def target_index(self) -> int:
        return self.n_captors


def _spawn_fields(grid: OccupancyGrid, min_clearance: float):
    """Eligible cell centers and free-space component labels, cached."""
    key = ("spawn", round(min_clearance, 9))
    if key not in grid._cache:
        clear = clearance_field(grid)
        eligible = np.argwhere(~grid.cells & (clear >= min_clearance))  # (iy, ix)
        labels, _ = ndimage.label(
            ~grid.cells, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]))
        centers = np.empty((len(eligible), 2))
        centers[:, 0] = (eligible[:, 1] + 0.5) * grid.resolution
        centers[:, 1] = (eligible[:, 0] + 0.5) * grid.resolution
        comp = labels[eligible[:, 0], eligible[:, 1]]
        grid._cache[key] = (centers, comp)
    return grid._cache[key]


def spawn(grid: OccupancyGrid, config: EpisodeConfig,
          rng: np.random.Generator | None = None) -> WorldState:
    """Rejection-sample a start configuration under the distance constraints.

    Positions are uniform over free cells with enough wall clearance; a draw
    is accepted when captors sit within the spread limit of each other, each
    captor is within the distance window of the target, and every captor's
    cell can reach the target's cell through free space.
    """
    if rng is None:
        rng = np.random.default_rng(np.random.PCG64(config.seed))
    k = config.n_captors
    sp = config.spawn
    centers, comp = _spawn_fields(grid, sp.min_wall_clearance)
    n = len(centers)
    if n < k + 1:
        raise SpawnExhaustedError(
            f"map {grid.name!r} has only {n} spawnable cells for {k + 1} robots")

    for _ in range(sp.max_attempts):
        draw = rng.integers(0, n, size=k + 1)  # target first, then captors
        t_i = draw[0]
        c_i = draw[1:]
        tx, ty = centers[t_i]
        ok = True
        for i in c_i:
            d = math.hypot(centers[i][0] - tx, centers[i][1] - ty)
            if not (sp.min_captor_target_dist <= d <= sp.max_captor_target_dist):
                ok = False
                break
            if comp[i] != comp[t_i]:
                ok = False
                break
        if ok and k > 1:
            for a in range(k):
                for b in range(a + 1, k):
                    pa, pb = centers[c_i[a]], centers[c_i[b]]
                    if math.hypot(pa[0] - pb[0], pa[1] - pb[1]) > sp.max_captor_spread:
                        ok = False
                        break
                if not ok:
                    break
        if not ok:
            continue
        headings = rng.uniform(-math.pi, math.pi, size=k + 1)
        states = [RobotState(position=(float(centers[i][0]), float(centers[i][1])),
                             velocity=(0.0, 0.0), heading=float(headings[j]))
                  for j, i in enumerate(c_i)]
        states.append(RobotState(position=(float(tx), float(ty)),
                                 velocity=(0.0, 0.0),
                                 heading=float(headings[k])))
        return WorldState(grid=grid, specs=config.specs(), states=tuple(states),
                          config=config)
    raise SpawnExhaustedError(
        f"no valid spawn on map {grid.name!r} after {sp.max_attempts} attempts")


def step(world: WorldState, actions: list[Action]
         ) -> tuple[WorldState, list[RewardBreakdown], bool, dict]:
    """Advance every robot simultaneously and score the transition."""
    if world.done:
        raise EpisodeFinishedError("episode already finished")
    if len(actions) != len(world.states):
        raise ActionCountMismatchError(
            f"expected {len(world.states)} actions, got {len(actions)}")
    cfg = world.config
    outs = [dynamics.step_robot_full(world.grid, st, act, spec, cfg.dt)
            for st, act, spec in zip(world.states, actions, world.specs)]
    new_states = tuple(o.state for o in outs)
    moved = replace(world, states=new_states, step=world.step + 1)

    captured = rewards.capture_check(moved, cfg.reward, cfg.capture_method, cfg.dt)
    comp = rewards.competition_reward(world.states, new_states, cfg.reward, captured)
    if cfg.reward.mode is RewardMode.COMPETITIVE:
        comp.append(rewards.target_competition(comp, cfg.reward))
    else:
        comp.append(0.0)
    breakdowns = [RewardBreakdown(competition=c,
                                  private=rewards.private_reward(o.fv_mag > 0.0,
                                                                 cfg.reward))
                  for c, o in zip(comp, outs)]
    done = captured or moved.step >= cfg.max_steps
    new_world = replace(moved, done=done, captured=captured)
    info = {
        "step": new_world.step,
        "captured": captured,
        "fv": [o.fv_mag > 0.0 for o in outs],
        "collided": [o.collided for o in outs],
    }
    return new_world, breakdowns, done, info


@dataclass(frozen=True)
class StepRecord:
    step: int
    states: tuple[RobotState, ...]
    actions: tuple[Action, ...]
    fv: tuple[bool, ...]
    collided: tuple[bool, ...]
    rewards: tuple[RewardBreakdown, ...]
    captured: bool

    def positions(self) -> list[tuple[float, float]]:
        return [s.position for s in self.states]

    def to_json(self, teams: list[str]) -> dict:
        robots = []
        for i, (s, a, f, c, r) in enumerate(zip(self.states, self.actions,
                                                self.fv, self.collided,
                                                self.rewards)):
            robots.append({
                "id": i, "team": teams[i],
                "x": s.position[0], "y": s.position[1],
                "vx": s.velocity[0], "vy": s.velocity[1],
                "heading": s.heading,
                "action": a.value, "fv": int(f), "collided": int(c),
                "reward": r.to_json(),
            })
        return {"v": LOG_VERSION, "kind": "step", "t": self.step,
                "robots": robots, "captured": self.captured}


def _state_json(state: RobotState) -> dict:
    return {"x": state.position[0], "y": state.position[1],
            "vx": state.velocity[0], "vy": state.velocity[1],
            "heading": state.heading}


def _state_from_json(d: dict) -> RobotState:
    return RobotState(position=(d["x"], d["y"]), velocity=(d["vx"], d["vy"]),
                      heading=d["heading"])


@dataclass
class TrajectoryLog:
    """One episode: spawn snapshot, step records, outcome.

    Serializes to JSON lines: a header object, one object per step, a final
    outcome object.  Field order is fixed, so identical runs produce
    byte-identical files.
    """

    config: EpisodeConfig
    map_name: str
    map_hash: str
    map_text: str
    spawn_states: tuple[RobotState, ...]
    steps: list[StepRecord] = field(default_factory=list)
    success: bool = False
    policy_names: dict = field(default_factory=dict)
    observations: list | None = None  # optional per-step obs (header + steps)

    @property
    def steps_used(self) -> int:
        return len(self.steps)

    @property
    def teams(self) -> list[str]:
        return ["captor"] * (len(self.spawn_states) - 1) + ["target"]

    def header_json(self) -> dict:
        header = {
            "v": LOG_VERSION, "kind": "header",
            "map": {"name": self.map_name, "hash": self.map_hash},
            "config": self.config.to_json(),
            "policies": self.policy_names,
            "spawn": [_state_json(s) for s in self.spawn_states],
            "map_text": self.map_text,
        }
        if self.observations is not None:
            header["obs"] = self.observations[0]
        return header

    def outcome_json(self) -> dict:
        return {"v": LOG_VERSION, "kind": "outcome", "success": self.success,
                "steps_used": self.steps_used}

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header_json(), separators=(",", ":"))]
        teams = self.teams
        for i, rec in enumerate(self.steps):
            obj = rec.to_json(teams)
            if self.observations is not None:
                obj["obs"] = self.observations[i + 1]
            lines.append(json.dumps(obj, separators=(",", ":")))
        lines.append(json.dumps(self.outcome_json(), separators=(",", ":")))
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> None:
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(self.to_jsonl(), encoding="ascii")
        tmp.replace(path)

    @classmethod
    def from_jsonl(cls, text: str) -> "TrajectoryLog":
        lines = [json.loads(line) for line in text.splitlines() if line]
        header = lines[0]
        if header.get("kind") != "header":
            raise ValueError("first line is not a log header")
        outcome = lines[-1]
        if outcome.get("kind") != "outcome":
            raise ValueError("last line is not an outcome record")
        config = EpisodeConfig.from_json(header["config"])
        steps = []
        observations = [header["obs"]] if "obs" in header else None
        for obj in lines[1:-1]:
            robots = obj["robots"]
            steps.append(StepRecord(
                step=obj["t"],
                states=tuple(_state_from_json(r) for r in robots),
                actions=tuple(Action(r["action"]) for r in robots),
                fv=tuple(bool(r["fv"]) for r in robots),
                collided=tuple(bool(r["collided"]) for r in robots),
                rewards=tuple(RewardBreakdown(competition=r["reward"]["competition"],
                                              private=r["reward"]["private"])
                              for r in robots),
                captured=obj["captured"],
            ))
            if "obs" in obj:
                if observations is None:
                    observations = [None]
                observations.append(obj["obs"])
        return cls(config=config,
                   map_name=header["map"]["name"],
                   map_hash=header["map"]["hash"],
                   map_text=header["map_text"],
                   spawn_states=tuple(_state_from_json(s) for s in header["spawn"]),
                   steps=steps,
                   success=outcome["success"],
                   policy_names=header.get("policies", {}),
                   observations=observations)

    @classmethod
    def read(cls, path: str | Path) -> "TrajectoryLog":
        return cls.from_jsonl(Path(path).read_text(encoding="ascii"))

    def grid(self) -> OccupancyGrid:
        return parse_map(self.map_text, name=self.map_name)


def map_hash(grid: OccupancyGrid) -> str:
    return hashlib.sha256(grid.to_text().encode("ascii")).hexdigest()


def select_grid(config: EpisodeConfig, rng: np.random.Generator) -> OccupancyGrid:
    """Per-episode map choice: uniform over the configured list."""
    refs = config.map_refs()
    ref = refs[int(rng.integers(0, len(refs)))] if len(refs) > 1 else refs[0]
    if isinstance(ref, OccupancyGrid):
        return ref
    return find_map(ref)


def run_episode(config: EpisodeConfig, policies: dict,
                record_observations: bool = False) -> TrajectoryLog:
    """Run one seeded episode to termination and return its log.

    ``policies`` maps team name ("captor", "target") to a policy object or
    identifier string understood by :func:`t2e.agents.resolve_policy`.
    """
    from .agents import resolve_policy

    rng = np.random.default_rng(np.random.PCG64(config.seed))
    grid = select_grid(config, rng)
    world = spawn(grid, config, rng)

    resolved = {team: resolve_policy(p, n_captors=config.n_captors, team=team)
                for team, p in policies.items()}
    captor_policy = resolved["captor"]
    target_policy = resolved["target"]

    log = TrajectoryLog(
        config=config, map_name=grid.name, map_hash=map_hash(grid),
        map_text=grid.to_text(), spawn_states=world.states,
        policy_names={t: p.name for t, p in resolved.items()})
    if record_observations:
        log.observations = [observation_set(world)]

    while not world.done:
        acts = dict(captor_policy.act(world, world.captor_indices, rng))
        acts.update(target_policy.act(world, [world.target_index], rng))
        actions = tuple(acts[i] for i in range(len(world.states)))
        world, breakdowns, done, info = step(world, list(actions))
        log.steps.append(StepRecord(
            step=world.step, states=world.states, actions=actions,
            fv=tuple(info["fv"]), collided=tuple(info["collided"]),
            rewards=tuple(breakdowns), captured=info["captured"]))
        if record_observations:
            log.observations.append(observation_set(world))
    log.success = world.captured
    return log


def observation_set(world: WorldState) -> dict:
    from .perception import observation_json, observe

    out = {}
    for i in range(len(world.states)):
        agent, obstacle = observe(world, i)
        out[str(i)] = observation_json(agent, obstacle)
    return out


def path_lengths(log: TrajectoryLog) -> list[float]:
    """Per-captor traveled distance, spawn included."""
    k = len(log.spawn_states) - 1
    totals = [0.0] * k
    prev = [s.position for s in log.spawn_states[:k]]
    for rec in log.steps:
        for i in range(k):
            x, y = rec.states[i].position
            totals[i] += math.hypot(x - prev[i][0], y - prev[i][1])
            prev[i] = (x, y)
    return totals


@dataclass(frozen=True)
class MetricsReport:
    episodes: int
    successes: int
    sr: float                      # percent
    time_steps: float | None       # mean steps to capture over successes
    path_len: float                # mean over episodes of mean captor distance

    def to_json(self) -> dict:
        return {"episodes": self.episodes, "successes": self.successes,
                "sr_percent": self.sr, "time_steps": self.time_steps,
                "path_len_m": self.path_len}

    def table(self) -> str:
        time_s = f"{self.time_steps:.2f}" if self.time_steps is not None else "-"
        header = f"{'Time (step)':>12} {'SR (%)':>8} {'Path Len (m)':>13}"
        row = f"{time_s:>12} {self.sr:>8.1f} {self.path_len:>13.3f}"
        return header + "\n" + row


def compute_metrics(logs: list[TrajectoryLog]) -> MetricsReport:
    """Aggregate the standard metric set over a batch of episode logs.

    Timeout episodes count in the success-rate denominator and in the path
    length average, but are excluded from the capture-time mean.
    """
    if not logs:
        raise EmptyInputError("no logs to aggregate")
    successes = [log for log in logs if log.success]
    time_steps = (sum(log.steps_used for log in successes) / len(successes)
                  if successes else None)
    per_episode = []
    for log in logs:
        lens = path_lengths(log)
        per_episode.append(sum(lens) / len(lens))
    return MetricsReport(
        episodes=len(logs),
        successes=len(successes),
        sr=100.0 * len(successes) / len(logs),
        time_steps=time_steps,
        path_len=sum(per_episode) / len(per_episode),
    )
