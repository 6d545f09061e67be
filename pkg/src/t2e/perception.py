"""Per-robot observations: relative agent state plus a local obstacle mask.

Information is asymmetric by design: captors share their full internal state
(speed, position, heading) with teammates over comms but can only observe the
target's position and orientation, never its speed.  The target sees every
captor's full state.  All relative quantities are observer-minus-observed;
headings are wrapped to [-pi, pi).

The obstacle mask is a d x d binary window centered on the robot whose row
axis tracks the robot heading: row 0 is the farthest cell ahead, column 0 the
farthest left.  Cells outside the map read as occupied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import RobotState, Team, normalize_angle
from .gridmap import OccupancyGrid

MASK_SIZE = 25
MASK_RESOLUTION = 0.2


class InvalidIndexError(IndexError):
    """Robot index outside the world's robot list."""


@dataclass(frozen=True)
class ObservationConfig:
    mask_size: int = MASK_SIZE
    mask_resolution: float = MASK_RESOLUTION
    # Emit the observer's own speed in teammate blocks instead of the
    # teammate's (the literal symbol reading; off by default).
    teammate_speed_self: bool = False
    # Emit velocity components instead of scalar speeds.
    vector_speed: bool = False


@dataclass(frozen=True)
class AgentObservation:
    """Structured agent-related observation for one robot."""

    self_block: list[float]                 # [speed, x_norm, y_norm, heading]
    teammate_blocks: list[list[float]]      # [speed, dx, dy, dheading] each
    opponent_blocks: list[list[float]]      # captor view: [dx, dy, dheading];
                                            # target view: [speed, dx, dy, dheading]

    def vector(self) -> list[float]:
        out = list(self.self_block)
        for block in self.teammate_blocks:
            out.extend(block)
        for block in self.opponent_blocks:
            out.extend(block)
        return out


@dataclass(frozen=True)
class ObstacleObservation:
    mask: np.ndarray          # (d, d) bool, row axis along the heading
    window_resolution: float
    size: int

    def to_lists(self) -> list[list[int]]:
        return [[int(v) for v in row] for row in self.mask]


def _speed_entries(state: RobotState, cfg: ObservationConfig) -> list[float]:
    if cfg.vector_speed:
        return [state.velocity[0], state.velocity[1]]
    return [state.speed]


def obstacle_mask(grid: OccupancyGrid, state: RobotState,
                  cfg: ObservationConfig = ObservationConfig()) -> ObstacleObservation:
    """Sample the map around the robot in its own frame (nearest cell)."""
    d = cfg.mask_size
    wres = cfg.mask_resolution
    center = (d - 1) / 2.0
    cos_h = math.cos(state.heading)
    sin_h = math.sin(state.heading)
    px, py = state.position
    ex, ey = grid.extent
    res = grid.resolution
    offsets = (center - np.arange(d)) * wres
    fwd, left = np.meshgrid(offsets, offsets, indexing="ij")
    # world = pos + fwd * heading_dir + left * left_dir
    wx = px + fwd * cos_h - left * sin_h
    wy = py + fwd * sin_h + left * cos_h
    inside = (wx >= 0.0) & (wx < ex) & (wy >= 0.0) & (wy < ey)
    mask = np.ones((d, d), dtype=bool)
    mask[inside] = grid.cells[(wy[inside] / res).astype(int),
                              (wx[inside] / res).astype(int)]
    return ObstacleObservation(mask=mask, window_resolution=wres, size=d)


def observe(world, robot_index: int,
            cfg: ObservationConfig = ObservationConfig()
            ) -> tuple[AgentObservation, ObstacleObservation]:
    """Build the observation pair for one robot of a world snapshot.

    ``world`` provides ``grid``, ``specs`` and ``states`` (captors first,
    target last, stable indices).
    """
    states = world.states
    specs = world.specs
    if not 0 <= robot_index < len(states):
        raise InvalidIndexError(f"robot index {robot_index} out of range")
    me = states[robot_index]
    my_team = specs[robot_index].team
    ex, ey = world.grid.extent

    self_block = _speed_entries(me, cfg) + [
        me.position[0] / ex, me.position[1] / ey, me.heading]

    teammates = []
    opponents = []
    for k, (other, spec) in enumerate(zip(states, specs)):
        if k == robot_index:
            continue
        rel = [me.position[0] - other.position[0],
               me.position[1] - other.position[1],
               normalize_angle(me.heading - other.heading)]
        if spec.team is my_team:
            speed_src = me if cfg.teammate_speed_self else other
            teammates.append(_speed_entries(speed_src, cfg) + rel)
        elif my_team is Team.CAPTOR:
            opponents.append(rel)  # target speed is unobservable
        else:
            opponents.append(_speed_entries(other, cfg) + rel)

    agent = AgentObservation(self_block=self_block,
                             teammate_blocks=teammates,
                             opponent_blocks=opponents)
    return agent, obstacle_mask(world.grid, me, cfg)


def observation_json(agent: AgentObservation,
                     obstacle: ObstacleObservation) -> dict:
    """The bridge-protocol ``obs`` object."""
    return {"agent": agent.vector(), "obstacle": obstacle.to_lists()}
