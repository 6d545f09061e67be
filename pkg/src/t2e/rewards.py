"""Step rewards and the two capture conditions.

A captor's competition reward sums three always-on terms: a coefficient times
the change in its distance to the target, a contact bonus when strictly
inside the contact threshold, and a capture bonus on the step the target is
captured.  The private reward is a flat per-step penalty plus an extra
penalty whenever the robot's obstacle repulsion was active; both teams
compute it the same way.  In the competitive mode the target's competition
reward is the exact negation of the captors' sum, making every step zero-sum
by construction.

Capture is decided either by thresholding the safe-zone area (exact but
expensive) or by the cheap motion proxy: the target counts as captured when
every available action either slams it into an obstacle on the spot or lands
it in contact range of a captor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from . import dynamics, eikonal
from .dynamics import RobotState


class RewardMode(Enum):
    COOPERATIVE = "cooperative"
    COMPETITIVE = "competitive"


class CaptureMethod(Enum):
    ASZ_THRESHOLD = "asz-threshold"
    COLLISION_PROXY = "collision-proxy"


class ModeError(RuntimeError):
    """Operation requires the competitive reward mode."""


@dataclass(frozen=True)
class RewardConfig:
    k1: float = -1.0           # per-meter distance-change coefficient
    k2: float = 5.0            # contact bonus
    k3: float = 10.0           # capture bonus
    d_cs: float = 0.4          # robot contact threshold (two radii)
    f_thre: float = 0.5        # safe-zone capture area, m^2
    step_penalty: float = -0.4
    repulse_penalty: float = -1.0
    mode: RewardMode = RewardMode.COOPERATIVE

    def __post_init__(self):
        if self.d_cs <= 0 or self.f_thre <= 0:
            raise ValueError("d_cs and f_thre must be positive")


@dataclass(frozen=True)
class RewardBreakdown:
    competition: float
    private: float

    @property
    def total(self) -> float:
        return self.competition + self.private

    def to_json(self) -> dict:
        return {"competition": self.competition, "private": self.private,
                "total": self.total}


def _distance(a: RobotState, b: RobotState) -> float:
    return math.hypot(a.position[0] - b.position[0],
                      a.position[1] - b.position[1])


def competition_reward(prev_states, states, config: RewardConfig,
                       captured: bool) -> list[float]:
    """Per-captor competition reward between two consecutive snapshots.

    States are ordered captors first, target last; ``captured`` is the
    capture flag of the new snapshot.
    """
    target_prev = prev_states[-1]
    target_now = states[-1]
    out = []
    for prev, now in zip(prev_states[:-1], states[:-1]):
        d_now = _distance(now, target_now)
        d_prev = _distance(prev, target_prev)
        r = config.k1 * (d_now - d_prev)
        if d_now < config.d_cs:
            r += config.k2
        if captured:
            r += config.k3
        out.append(r)
    return out


def private_reward(fv_active: bool, config: RewardConfig) -> float:
    """Flat step penalty, plus the repulsion penalty when |f_v| > 0."""
    r = config.step_penalty
    if fv_active:
        r += config.repulse_penalty
    return r


def target_competition(captor_competition: list[float],
                       config: RewardConfig) -> float:
    """Zero-sum target competition reward (competitive mode only).

    Computed as the exact negation of the left-to-right float sum, so the
    per-step zero-sum identity holds to the last bit.
    """
    if config.mode is not RewardMode.COMPETITIVE:
        raise ModeError("target competition reward requires competitive mode")
    return -sum(captor_competition)


def capture_check(world, config: RewardConfig,
                  method: CaptureMethod = CaptureMethod.COLLISION_PROXY,
                  dt: float = dynamics.DEFAULT_DT) -> bool:
    """Decide capture on a world snapshot.

    The safe-zone method thresholds the computed area.  The proxy simulates
    one step of each of the target's five actions from the snapshot; the
    target is captured when every action either triggers a collision stop
    with sub-cell displacement or ends within contact range of a captor.
    """
    states = world.states
    target = states[-1]
    captors = states[:-1]
    if method is CaptureMethod.ASZ_THRESHOLD:
        report = eikonal.compute_asz(
            world.grid, [c.position for c in captors],
            world.specs[0].max_speed, target.position,
            world.specs[-1].max_speed, f_thre=config.f_thre)
        return report.captured

    spec = world.specs[-1]
    res = world.grid.resolution
    # Fast reject: too far from captors and walls for any single step to end
    # blocked.  Displacement this step cannot exceed (|v| + a*dt)*dt.
    max_disp = (target.speed + spec.max_accel * dt) * dt
    near_captor = any(_distance(target, c) <= config.d_cs + max_disp + res
                      for c in captors)
    if not near_captor:
        from .gridmap import clearance
        if clearance(world.grid, target.position) > max_disp + res:
            return False

    for action in dynamics.ACTION_ORDER:
        out = dynamics.step_robot_full(world.grid, target, action, spec, dt)
        disp = _distance(out.state, target)
        blocked = out.collided and disp < res
        if not blocked:
            blocked = any(_distance(out.state, c) < config.d_cs for c in captors)
        if not blocked:
            return False
    return True
