"""Procedural indoor-like maps and hand-authored fixture arenas.

The engine ships a reproducible map set in place of proprietary scan data:
seeded rooms-and-corridors layouts spanning the three size levels, plus a few
fixed fixture arenas used heavily by the test suite (open arenas, a corner
room, a dead-end corridor).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .gridmap import OccupancyGrid, level_for_area

DEFAULT_RESOLUTION = 0.1

# Generated sample set: (name, grid side in cells, traversable-area band in m^2).
# Bands keep the set's mean area in the low-to-mid 40s across all three levels.
SAMPLE_PLAN = [
    ("small_01", 64, (22.0, 34.0)),
    ("small_02", 66, (22.0, 34.0)),
    ("small_03", 68, (24.0, 36.0)),
    ("small_04", 70, (24.0, 38.0)),
    ("small_05", 72, (26.0, 38.0)),
    ("medium_01", 88, (41.0, 52.0)),
    ("medium_02", 90, (41.0, 54.0)),
    ("medium_03", 92, (42.0, 56.0)),
    ("medium_04", 94, (42.0, 58.0)),
    ("large_01", 108, (61.0, 74.0)),
    ("large_02", 112, (61.0, 76.0)),
    ("large_03", 116, (62.0, 78.0)),
]

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def _keep_largest_component(free: np.ndarray) -> np.ndarray:
    """Zero out every free region except the largest 4-connected one."""
    labels, count = ndimage.label(free, structure=_CROSS)
    if count <= 1:
        return free
    sizes = ndimage.sum_labels(free, labels, index=range(1, count + 1))
    keep = 1 + int(np.argmax(sizes))
    return labels == keep


def generate_indoor(side: int, seed: int, resolution: float = DEFAULT_RESOLUTION,
                    name: str = "indoor") -> OccupancyGrid:
    """One seeded rooms-and-corridors layout on a side x side grid."""
    rng = np.random.default_rng(seed)
    occ = np.ones((side, side), dtype=bool)

    # Rooms on a jittered 2x2 or 3x3 lattice, then L-corridors between
    # consecutive room centers.  Sizes in cells; rooms stay off the border.
    lattice = 2 if side < 80 else 3
    slot = (side - 2) // lattice
    rooms = []
    for gy in range(lattice):
        for gx in range(lattice):
            if lattice == 3 and rng.random() < 0.2:
                continue  # occasionally skip a slot for variety
            x0 = 1 + gx * slot
            y0 = 1 + gy * slot
            lo = max(10, (slot * 3) // 5)
            w = int(rng.integers(lo, slot - 2))
            h = int(rng.integers(lo, slot - 2))
            x = x0 + int(rng.integers(1, max(2, slot - w - 1)))
            y = y0 + int(rng.integers(1, max(2, slot - h - 1)))
            x2 = min(x + w, side - 1)
            y2 = min(y + h, side - 1)
            occ[y:y2, x:x2] = False
            rooms.append(((x + x2) // 2, (y + y2) // 2))
    if len(rooms) < 2:
        rooms.append((side // 2, side // 2))

    order = rng.permutation(len(rooms))
    half = int(rng.integers(3, 5))  # corridor half-width: 0.3-0.4 m each side
    for a, b in zip(order[:-1], order[1:]):
        (ax, ay), (bx, by) = rooms[a], rooms[b]
        x_lo, x_hi = sorted((ax, bx))
        y_lo, y_hi = sorted((ay, by))
        occ[max(1, ay - half):min(side - 1, ay + half),
            max(1, x_lo - half):min(side - 1, x_hi + half)] = False
        occ[max(1, y_lo - half):min(side - 1, y_hi + half),
            max(1, bx - half):min(side - 1, bx + half)] = False

    # Sprinkle pillars inside the free area to break up open space.
    for _ in range(int(rng.integers(2, 6))):
        px = int(rng.integers(4, side - 8))
        py = int(rng.integers(4, side - 8))
        pw = int(rng.integers(2, 5))
        occ[py:py + pw, px:px + pw] = True

    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    free = _keep_largest_component(~occ)
    return OccupancyGrid(~free, resolution, name=name)


def generate_sample(name: str, side: int, band: tuple[float, float],
                    base_seed: int = 7000) -> OccupancyGrid:
    """Deterministically search seeds until the traversable area lands in the
    requested band.  The seed sequence is fixed, so output is reproducible."""
    lo, hi = band
    offset = sum(SAMPLE_PLAN.index(entry) for entry in SAMPLE_PLAN if entry[0] == name)
    for k in range(200):
        seed = base_seed + 1009 * offset + 257 * k + side
        grid = generate_indoor(side, seed, name=name)
        area = grid.free_count * grid.resolution ** 2
        if lo <= area <= hi:
            return grid
    raise RuntimeError(f"no seed produced a {name} map in band {band}")


def empty_arena(width: int, height: int, resolution: float = DEFAULT_RESOLUTION,
                name: str = "arena") -> OccupancyGrid:
    occ = np.zeros((height, width), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    return OccupancyGrid(occ, resolution, name=name)


def corner_room(resolution: float = DEFAULT_RESOLUTION) -> OccupancyGrid:
    """A 6 m square room with an interior L-shaped wall."""
    grid = empty_arena(62, 62, resolution, name="corner_room")
    occ = grid.cells.copy()
    occ[30:33, 14:44] = True   # horizontal bar
    occ[14:33, 41:44] = True   # vertical bar
    return OccupancyGrid(occ, resolution, name="corner_room")


def deadend_corridor(resolution: float = DEFAULT_RESOLUTION) -> OccupancyGrid:
    """An open room with a dead-end corridor leaving its east wall.

    Room spans x in [0.1, 4.1] m; the corridor is 0.7 m wide, runs from the
    room to a closed end at x = 6.5 m, centered at y = 2.5 m.
    """
    width, height = 70, 50
    occ = np.ones((height, width), dtype=bool)
    occ[1:49, 1:41] = False           # room
    occ[21:28, 41:65] = False         # corridor, 7 cells wide
    return OccupancyGrid(occ, resolution, name="deadend_corridor")


FIXTURES = {
    "arena_6x6": lambda: empty_arena(62, 62, name="arena_6x6"),
    "arena_5x8": lambda: empty_arena(52, 80, name="arena_5x8"),
    "arena_10x10": lambda: empty_arena(102, 102, name="arena_10x10"),
    "corner_room": corner_room,
    "deadend_corridor": deadend_corridor,
}


@dataclass
class GeneratedSet:
    samples: list[OccupancyGrid]
    fixtures: list[OccupancyGrid]


def build_standard_set() -> GeneratedSet:
    """The full shipped map set, regenerated from scratch."""
    samples = [generate_sample(name, side, band) for name, side, band in SAMPLE_PLAN]
    fixtures = [FIXTURES[name]() for name in sorted(FIXTURES)]
    return GeneratedSet(samples=samples, fixtures=fixtures)


def describe(grid: OccupancyGrid) -> dict:
    area = grid.free_count * grid.resolution ** 2
    return {
        "name": grid.name,
        "width": grid.width,
        "height": grid.height,
        "resolution": grid.resolution,
        "traversable_m2": round(area, 4),
        "level": level_for_area(area).value,
    }
