"""Per-robot motion: discrete actions, obstacle repulsion, integration.

Each step a robot turns its action into an action force, adds the virtual
repulsion force sampled from M directions around it, clamps the combined
acceleration, integrates semi-implicitly (velocity first, then position) and
resolves obstacle collisions by stopping at the last collision-free point of
the swept segment.

Force units are accelerations (m/s^2); "force" follows the actuator wording.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .gridmap import OccupancyGrid, raycast

DEFAULT_DT = 0.1
TURN_ANGLE = math.pi / 6.0

# Physical defaults; captors and the target differ in acceleration and speed.
ROBOT_RADIUS = 0.2
CAPTOR_MAX_ACCEL = 3.0
TARGET_MAX_ACCEL = 4.0
CAPTOR_MAX_SPEED = 1.0


class Team(Enum):
    CAPTOR = "captor"
    TARGET = "target"


class Action(Enum):
    """Discrete action set; values are the wire codes of the protocol."""

    FORWARD = 0
    TURN_LEFT = 1
    TURN_RIGHT = 2
    STOP = 3
    BACKWARD = 4


ACTION_ORDER = (Action.FORWARD, Action.TURN_LEFT, Action.TURN_RIGHT,
                Action.STOP, Action.BACKWARD)


def normalize_angle(theta: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped < 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True)
class RobotSpec:
    team: Team
    radius: float = ROBOT_RADIUS
    max_speed: float = CAPTOR_MAX_SPEED
    max_accel: float = CAPTOR_MAX_ACCEL
    max_turn: float = TURN_ANGLE
    action_force_mag: float | None = None  # defaults to max_accel
    repulse_m: int = 12
    repulse_k: float = 3.0
    turn_thrust: bool = True  # turn actions also thrust along the new heading

    def __post_init__(self):
        if self.radius <= 0 or self.max_speed <= 0 or self.max_accel <= 0:
            raise ValueError("radius, max_speed and max_accel must be positive")
        if not 0 < self.max_turn <= math.pi:
            raise ValueError("max_turn must be in (0, pi]")
        if self.action_force_mag is None:
            object.__setattr__(self, "action_force_mag", self.max_accel)

    @property
    def danger_radius(self) -> float:
        return self.repulse_k * self.radius


def captor_spec(max_speed: float = CAPTOR_MAX_SPEED, **kw) -> RobotSpec:
    return RobotSpec(team=Team.CAPTOR, max_speed=max_speed,
                     max_accel=CAPTOR_MAX_ACCEL, **kw)


def target_spec(max_speed: float = CAPTOR_MAX_SPEED, **kw) -> RobotSpec:
    return RobotSpec(team=Team.TARGET, max_speed=max_speed,
                     max_accel=TARGET_MAX_ACCEL, **kw)


@dataclass(frozen=True)
class RobotState:
    position: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    heading: float = 0.0

    @property
    def speed(self) -> float:
        return math.hypot(self.velocity[0], self.velocity[1])


@dataclass(frozen=True)
class StepOutcome:
    """Result of one integration step, with the bookkeeping the engine logs."""

    state: RobotState
    fv_mag: float      # magnitude of the repulsion force this step
    collided: bool     # obstacle stop triggered on the swept segment


def action_heading(state: RobotState, action: Action, spec: RobotSpec) -> float:
    """Heading after the action's turn component (turns apply immediately)."""
    if action is Action.TURN_LEFT:
        return normalize_angle(state.heading + spec.max_turn)
    if action is Action.TURN_RIGHT:
        return normalize_angle(state.heading - spec.max_turn)
    return state.heading


def action_force(state: RobotState, action: Action, spec: RobotSpec,
                 dt: float = DEFAULT_DT) -> tuple[float, float]:
    """Translate a discrete action into its force vector.

    Forward/Backward thrust along the (new) heading; Stop brakes as hard as
    the acceleration cap allows; turn actions thrust along the post-turn
    heading unless the spec disables turn thrust.
    """
    mag = spec.action_force_mag
    if action is Action.STOP:
        vx, vy = state.velocity
        speed = math.hypot(vx, vy)
        if speed == 0.0:
            return (0.0, 0.0)
        brake = min(speed / dt, spec.max_accel)
        return (-brake * vx / speed, -brake * vy / speed)
    if action in (Action.TURN_LEFT, Action.TURN_RIGHT) and not spec.turn_thrust:
        return (0.0, 0.0)
    theta = action_heading(state, action, spec)
    if action is Action.BACKWARD:
        return (-mag * math.cos(theta), -mag * math.sin(theta))
    return (mag * math.cos(theta), mag * math.sin(theta))


def repulsion_force(grid: OccupancyGrid, state: RobotState,
                    spec: RobotSpec) -> tuple[float, float]:
    """Virtual repulsion from obstacles sampled along M directions.

    Each direction closer than the danger radius k*r contributes a term of
    magnitude -log(d / (k*r)) + 1 pointing away from the obstacle.
    """
    danger = spec.danger_radius
    max_range = 2.0 * danger
    fx = fy = 0.0
    m = spec.repulse_m
    d_floor = grid.resolution * 1e-6  # a ray can measure 0 on a cell boundary
    for i in range(1, m + 1):
        theta = state.heading + 2.0 * math.pi * i / m
        d = raycast(grid, state.position, theta, max_range)
        if d < danger:
            w = -math.log(max(d, d_floor) / danger) + 1.0
            fx -= w * math.cos(theta)
            fy -= w * math.sin(theta)
    return (fx, fy)


def step_robot_full(grid: OccupancyGrid, state: RobotState, action: Action,
                    spec: RobotSpec, dt: float = DEFAULT_DT) -> StepOutcome:
    """Advance one robot by one timestep; pure function of its inputs."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    ax, ay = action_force(state, action, spec, dt)
    rx, ry = repulsion_force(grid, state, spec)
    fv_mag = math.hypot(rx, ry)
    ax += rx
    ay += ry
    a_mag = math.hypot(ax, ay)
    if a_mag > spec.max_accel:
        scale = spec.max_accel / a_mag
        ax *= scale
        ay *= scale

    vx = state.velocity[0] + ax * dt
    vy = state.velocity[1] + ay * dt
    v_mag = math.hypot(vx, vy)
    if v_mag > spec.max_speed:
        scale = spec.max_speed / v_mag
        vx *= scale
        vy *= scale

    px, py = state.position
    nx = px + vx * dt
    ny = py + vy * dt
    heading = action_heading(state, action, spec)

    # Swept-segment collision: sample at half-cell spacing; stop with zero
    # velocity at the last collision-free sample.
    dist = math.hypot(nx - px, ny - py)
    collided = False
    if dist > 0.0:
        n_samples = max(1, math.ceil(dist / (grid.resolution * 0.5)))
        ok_x, ok_y = px, py
        for k in range(1, n_samples + 1):
            t = k / n_samples
            qx = px + (nx - px) * t
            qy = py + (ny - py) * t
            ix = int(qx / grid.resolution)
            iy = int(qy / grid.resolution)
            if grid.cells[iy, ix]:
                collided = True
                break
            ok_x, ok_y = qx, qy
        if collided:
            nx, ny, vx, vy = ok_x, ok_y, 0.0, 0.0

    new_state = RobotState(position=(nx, ny), velocity=(vx, vy), heading=heading)
    return StepOutcome(state=new_state, fv_mag=fv_mag, collided=collided)


def step_robot(grid: OccupancyGrid, state: RobotState, action: Action,
               spec: RobotSpec, dt: float = DEFAULT_DT) -> RobotState:
    """Advance one robot; see :func:`step_robot_full` for the bookkeeping."""
    return step_robot_full(grid, state, action, spec, dt).state
