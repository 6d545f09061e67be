"""Fast-marching arrival times and the target's absolutely safe zone.

The arrival time of a robot at a map point is the obstacle-aware shortest
path length divided by the robot's speed.  ``solve_arrival`` computes a full
per-cell field with a first-order fast-marching sweep; ``compute_asz`` builds
the safe-zone mask by comparing the target's field against the pointwise
minimum of the captors' fields (strict inequality: ties are unsafe).

Solver notes
------------
Updates run on the 8-neighbor stencil: each cell is relaxed through the eight
right triangles formed by an axis neighbor and an adjacent diagonal neighbor
(single-segment wavefront interpolation, solved in closed form), plus the
plain axis/diagonal graph edges.  This keeps every arrival time at or below
the 8-connected Dijkstra time on the same grid while converging to the
continuous shortest-path metric.  Cells near the source get exact
line-of-sight initialization, which removes the point-source startup error.
Diagonal transitions through zero-width gaps (both shared axis cells
occupied) are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from heapq import heappop, heappush

import numpy as np

from .gridmap import OccupancyGrid, OutOfBoundsError

SQRT2 = math.sqrt(2.0)
INV_SQRT2 = 1.0 / SQRT2
TIE_EPS = 1e-9  # arrival-time ties count as unsafe
_INIT_RADIUS_CELLS = 8  # exact-initialization disc around the source


class SourceInObstacleError(ValueError):
    """Arrival-field source lies inside an occupied cell."""


class SourceOutOfBoundsError(OutOfBoundsError):
    """Arrival-field source lies outside the grid."""


@dataclass(frozen=True)
class ArrivalField:
    """Per-cell minimum arrival times in seconds; +inf where unreachable."""

    grid_name: str
    times: np.ndarray  # (height, width) float64
    source: tuple[float, float]
    speed: float
    resolution: float

    def time_at_cell(self, ix: int, iy: int) -> float:
        return float(self.times[iy, ix])

    def time_at(self, point: tuple[float, float]) -> float:
        ix = int(point[0] / self.resolution)
        iy = int(point[1] / self.resolution)
        height, width = self.times.shape
        if not (0 <= ix < width and 0 <= iy < height):
            raise OutOfBoundsError(f"point {point} outside the field")
        return float(self.times[iy, ix])


@dataclass(frozen=True)
class ASZReport:
    """Safe-zone mask (True = safe for the target), its area, and whether the
    area fell under the capture threshold."""

    mask: np.ndarray  # (height, width) bool
    area: float       # m^2
    captured: bool

    def render(self, grid: OccupancyGrid) -> str:
        """Text rendering: S = safe, . = unsafe free space, # = obstacle."""
        rows = []
        for iy in range(grid.height):
            row = []
            for ix in range(grid.width):
                if grid.cells[iy, ix]:
                    row.append("#")
                elif self.mask[iy, ix]:
                    row.append("S")
                else:
                    row.append(".")
            rows.append("".join(row))
        return "\n".join(rows) + "\n"


def _line_of_sight(occ_flat, width: int, res: float,
                   x0: float, y0: float, x1: float, y1: float) -> bool:
    """Every sample of the segment (step res/4) lies in a free cell."""
    dist = math.hypot(x1 - x0, y1 - y0)
    n = max(1, int(dist / (res * 0.25)))
    for k in range(1, n + 1):
        t = k / n
        ix = int((x0 + (x1 - x0) * t) / res)
        iy = int((y0 + (y1 - y0) * t) / res)
        if occ_flat[iy * width + ix]:
            return False
    return True


def solve_arrival(grid: OccupancyGrid, source: tuple[float, float],
                  speed: float) -> ArrivalField:
    """Fast-marching solution of the arrival-time field from a point source.

    Occupied and unreachable cells get +inf.  Times are measured at cell
    centers; the source cell itself gets the exact center offset time.
    """
    if not speed > 0:
        raise ValueError(f"speed must be positive, got {speed}")
    try:
        six, siy = grid.cell_of(source)
    except OutOfBoundsError:
        raise SourceOutOfBoundsError(f"source {source} outside grid") from None
    if grid.cells[siy, six]:
        raise SourceInObstacleError(f"source {source} inside an obstacle cell")

    width, height = grid.width, grid.height
    res = grid.resolution
    n = width * height
    occ = grid.cells.ravel().astype(np.uint8).tobytes()
    f = res / speed          # axis edge crossing time
    fd = f * SQRT2           # diagonal edge crossing time

    times = [math.inf] * n
    state = bytearray(n)     # 0 far, 1 narrow band, 2 accepted
    heap: list[tuple[float, int]] = []
    sx, sy = float(source[0]), float(source[1])

    # Exact init: free cells near the source with a clear line of sight get
    # the true Euclidean time, sidestepping the point-source rarefaction.
    r = _INIT_RADIUS_CELLS
    for iy in range(max(1, siy - r), min(height - 1, siy + r + 1)):
        base = iy * width
        cy = (iy + 0.5) * res
        for ix in range(max(1, six - r), min(width - 1, six + r + 1)):
            idx = base + ix
            if occ[idx]:
                continue
            cx = (ix + 0.5) * res
            d = math.hypot(cx - sx, cy - sy)
            if d > r * res:
                continue
            if idx != siy * width + six and not _line_of_sight(
                    occ, width, res, sx, sy, cx, cy):
                continue
            t0 = d / speed
            times[idx] = t0
            state[idx] = 1
            heappush(heap, (t0, idx))

    w = width  # local alias for the hot loop
    axis_moves = ((1, (w, -w)), (-1, (w, -w)), (w, (1, -1)), (-w, (1, -1)))
    sqrt = math.sqrt
    while heap:
        t, c = heappop(heap)
        if state[c] == 2:
            continue
        state[c] = 2
        times[c] = t

        # Relax the eight neighbors through every edge/triangle that the
        # newly accepted cell participates in.  For the axis neighbor
        # nb = c + o, the adjacent diagonals of nb are c + p (p perpendicular
        # to o); for the diagonal neighbor nb = c + ox + oy, the shared axis
        # cells are c + ox and c + oy.
        for o, perp in axis_moves:
            nb = c + o
            if occ[nb] or state[nb] == 2:
                continue
            cand = t + f
            for p in perp:
                b_idx = c + p
                if state[b_idx] == 2:
                    wgt = (t - times[b_idx]) / f
                    if wgt > 0.0:
                        if wgt >= INV_SQRT2:
                            c2 = times[b_idx] + fd
                        else:
                            c2 = t + f * sqrt(1.0 - wgt * wgt)
                        if c2 < cand:
                            cand = c2
            if cand < times[nb] - 1e-15:
                times[nb] = cand
                state[nb] = 1
                heappush(heap, (cand, nb))

        for ox in (1, -1):
            for oy in (w, -w):
                nb = c + ox + oy
                if occ[nb] or state[nb] == 2:
                    continue
                s1 = c + ox
                s2 = c + oy
                if occ[s1] and occ[s2]:
                    continue  # zero-width pinch: no diagonal transition
                cand = t + fd
                for s_idx in (s1, s2):
                    if state[s_idx] == 2:
                        a = times[s_idx]
                        wgt = (a - t) / f
                        if wgt <= 0.0:
                            c2 = a + f
                        elif wgt < INV_SQRT2:
                            c2 = a + f * sqrt(1.0 - wgt * wgt)
                        else:
                            continue  # pure diagonal, already the base cand
                        if c2 < cand:
                            cand = c2
                if cand < times[nb] - 1e-15:
                    times[nb] = cand
                    state[nb] = 1
                    heappush(heap, (cand, nb))

    arr = np.array(times, dtype=np.float64).reshape(height, width)
    arr[grid.cells] = math.inf
    arr.setflags(write=False)
    return ArrivalField(grid_name=grid.name, times=arr, source=(sx, sy),
                        speed=float(speed), resolution=res)


def compute_asz(grid: OccupancyGrid,
                captor_positions: list[tuple[float, float]],
                captor_speed: float,
                target_position: tuple[float, float],
                target_speed: float,
                f_thre: float = 0.5,
                solver=solve_arrival) -> ASZReport:
    """Safe-zone mask: free cells the target reaches strictly sooner than
    every captor.  ``solver`` is injectable so tests can swap in an
    independent shortest-path oracle."""
    if not captor_positions:
        raise ValueError("at least one captor position required")
    target_times = solver(grid, target_position, target_speed).times
    captor_min = solver(grid, captor_positions[0], captor_speed).times.copy()
    for pos in captor_positions[1:]:
        np.minimum(captor_min, solver(grid, pos, captor_speed).times, out=captor_min)
    with np.errstate(invalid="ignore"):
        diff = captor_min - target_times
        mask = (~grid.cells) & ~np.isnan(diff) & (diff > TIE_EPS)
    area = float(mask.sum()) * grid.resolution ** 2
    return ASZReport(mask=mask, area=area, captured=area < f_thre)


def soa_series(log, grid: OccupancyGrid, specs, every: int = 1,
               f_thre: float = 0.5, solver=solve_arrival) -> list[tuple[int, float]]:
    """Safe-zone area evaluated at every ``every``-th recorded step.

    ``log`` is a trajectory log whose step records carry per-robot positions;
    ``specs`` are the robot specs in log order (captors first, target last).
    """
    if every < 1:
        raise ValueError("every must be >= 1")
    captor_speed = specs[0].max_speed
    target_speed = specs[-1].max_speed
    out = []
    for rec in log.steps[::every]:
        positions = rec.positions()
        report = compute_asz(grid, positions[:-1], captor_speed,
                             positions[-1], target_speed,
                             f_thre=f_thre, solver=solver)
        out.append((rec.step, report.area))
    return out
