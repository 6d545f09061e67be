"""Occupancy-grid maps: file I/O, geometric queries, and map-level taxonomy.

A map is a closed rectangular arena of square cells, each either free or
occupied.  World coordinates are meters: cell ``(ix, iy)`` has its center at
``((ix + 0.5) * resolution, (iy + 0.5) * resolution)``.  The text format is
``.t2e.map``: a three-line header followed by one character row per grid row
(``#`` occupied, ``.`` free), LF-terminated, no trailing whitespace.
"""

from __future__ import annotations

import math
import os
from enum import Enum
from pathlib import Path

import numpy as np

MAP_MAGIC = "T2E-MAP v1"
MAP_SUFFIX = ".t2e.map"


class ParseError(ValueError):
    """Map file does not conform to the text format."""


class ValidationError(ValueError):
    """Map file parses but violates a structural invariant."""


class OutOfBoundsError(ValueError):
    """Queried point lies outside the grid."""


class MapLevel(Enum):
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"


def level_for_area(area_m2: float) -> MapLevel:
    # Boundary areas (exactly 40 or 60 m^2) classify as Medium.
    if area_m2 < 40.0:
        return MapLevel.SMALL
    if area_m2 <= 60.0:
        return MapLevel.MEDIUM
    return MapLevel.LARGE


class OccupancyGrid:
    """Immutable binary obstacle raster with a physical resolution.

    ``cells`` is a (height, width) bool array, True = occupied.  All border
    cells are occupied, so the free interior never touches the array edge.
    """

    __slots__ = ("width", "height", "resolution", "cells", "name",
                 "_occupied_centers", "_free_count", "_cache")

    def __init__(self, cells: np.ndarray, resolution: float, name: str = "grid"):
        cells = np.asarray(cells, dtype=bool)
        if cells.ndim != 2:
            raise ValidationError("cells must be a 2D array")
        height, width = cells.shape
        if width < 8 or height < 8:
            raise ValidationError(f"grid must be at least 8x8, got {width}x{height}")
        if not resolution > 0:
            raise ValidationError(f"resolution must be positive, got {resolution}")
        border = np.concatenate([cells[0, :], cells[-1, :], cells[:, 0], cells[:, -1]])
        if not border.all():
            raise ValidationError("arena border must be fully occupied")
        free = int((~cells).sum())
        if free == 0:
            raise ValidationError("grid has no free cells")
        self.width = width
        self.height = height
        self.resolution = float(resolution)
        self.cells = cells
        self.cells.setflags(write=False)
        self.name = name
        self._free_count = free
        self._occupied_centers = None
        self._cache = {}  # derived immutable artifacts (clearance field, ...)

    def __eq__(self, other) -> bool:
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (self.width == other.width and self.height == other.height
                and self.resolution == other.resolution
                and bool(np.array_equal(self.cells, other.cells)))

    def __repr__(self) -> str:
        return f"OccupancyGrid({self.name!r}, {self.width}x{self.height} @ {self.resolution} m)"

    @property
    def free_count(self) -> int:
        return self._free_count

    @property
    def extent(self) -> tuple[float, float]:
        """Physical size (x, y) in meters."""
        return self.width * self.resolution, self.height * self.resolution

    def cell_of(self, point: tuple[float, float]) -> tuple[int, int]:
        """Map a world point to its (ix, iy) cell, raising if out of bounds."""
        ex, ey = self.extent
        x, y = point
        if not (0.0 <= x < ex and 0.0 <= y < ey):
            raise OutOfBoundsError(f"point {point} outside {ex} x {ey} m arena")
        return min(int(x / self.resolution), self.width - 1), \
               min(int(y / self.resolution), self.height - 1)

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (ix + 0.5) * self.resolution, (iy + 0.5) * self.resolution

    def is_occupied(self, ix: int, iy: int) -> bool:
        return bool(self.cells[iy, ix])

    def is_free_point(self, point: tuple[float, float]) -> bool:
        ix, iy = self.cell_of(point)
        return not self.cells[iy, ix]

    def occupied_centers(self) -> np.ndarray:
        """(N, 2) array of occupied-cell centers in meters, cached."""
        if self._occupied_centers is None:
            iy, ix = np.nonzero(self.cells)
            centers = np.empty((len(ix), 2))
            centers[:, 0] = (ix + 0.5) * self.resolution
            centers[:, 1] = (iy + 0.5) * self.resolution
            self._occupied_centers = centers
            self._occupied_centers.setflags(write=False)
        return self._occupied_centers

    def to_text(self) -> str:
        rows = ["".join("#" if c else "." for c in row) for row in self.cells]
        header = [MAP_MAGIC, f"resolution {self.resolution!r}",
                  f"size {self.width} {self.height}"]
        return "\n".join(header + rows) + "\n"


def traversable_area(grid: OccupancyGrid) -> float:
    """Free-cell count times cell area, in square meters."""
    return grid.free_count * grid.resolution ** 2


def classify_level(grid: OccupancyGrid) -> MapLevel:
    return level_for_area(traversable_area(grid))


def load_map(path: str | Path) -> OccupancyGrid:
    """Load and validate a ``.t2e.map`` file."""
    path = Path(path)
    text = path.read_text(encoding="ascii")
    return parse_map(text, name=path.name.removesuffix(MAP_SUFFIX))


def parse_map(text: str, name: str = "grid") -> OccupancyGrid:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) < 4:
        raise ParseError("truncated map file")
    if lines[0] != MAP_MAGIC:
        raise ParseError(f"bad magic line {lines[0]!r}")
    try:
        key, value = lines[1].split(" ")
        if key != "resolution":
            raise ValueError
        resolution = float(value)
    except ValueError:
        raise ParseError(f"bad resolution line {lines[1]!r}") from None
    try:
        key, w, h = lines[2].split(" ")
        if key != "size":
            raise ValueError
        width, height = int(w), int(h)
    except ValueError:
        raise ParseError(f"bad size line {lines[2]!r}") from None
    rows = lines[3:]
    if len(rows) != height:
        raise ParseError(f"expected {height} rows, found {len(rows)}")
    cells = np.empty((height, width), dtype=bool)
    for iy, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"row {iy} has {len(row)} chars, expected {width}")
        bad = set(row) - {"#", "."}
        if bad:
            raise ParseError(f"row {iy} has invalid characters {sorted(bad)}")
        cells[iy] = [ch == "#" for ch in row]
    return OccupancyGrid(cells, resolution, name=name)


def save_map(grid: OccupancyGrid, path: str | Path) -> None:
    """Write the grid in the bit-exact text format (LF endings)."""
    Path(path).write_bytes(grid.to_text().encode("ascii"))


def clearance(grid: OccupancyGrid, point: tuple[float, float]) -> float:
    """Distance from a point to the nearest occupied-cell center, minus half
    a cell.  Zero when the point sits inside an occupied cell."""
    ix, iy = grid.cell_of(point)
    if grid.cells[iy, ix]:
        return 0.0
    centers = grid.occupied_centers()
    d = np.hypot(centers[:, 0] - point[0], centers[:, 1] - point[1])
    return max(0.0, float(d.min()) - grid.resolution / 2.0)


def clearance_field(grid: OccupancyGrid) -> np.ndarray:
    """Per-cell clearance evaluated at cell centers, vectorized.

    Occupied cells get 0.  Uses the Euclidean distance transform, which
    measures center-to-center distances, matching :func:`clearance`.
    """
    from scipy import ndimage

    dist = ndimage.distance_transform_edt(~grid.cells) * grid.resolution
    field = np.maximum(0.0, dist - grid.resolution / 2.0)
    field[grid.cells] = 0.0
    return field


def raycast(grid: OccupancyGrid, origin: tuple[float, float],
            direction: float, max_range: float) -> float:
    """Distance to the first occupied cell along a ray, capped at max_range.

    Cell-stepping (Amanatides-Woo) traversal; the returned distance is to the
    boundary where the ray enters the occupied cell.
    """
    ix, iy = grid.cell_of(origin)  # raises OutOfBoundsError outside the grid
    if grid.cells[iy, ix]:
        return 0.0
    res = grid.resolution
    dx = math.cos(direction)
    dy = math.sin(direction)
    ox, oy = origin

    if dx > 0:
        step_x, t_max_x = 1, ((ix + 1) * res - ox) / dx
        t_delta_x = res / dx
    elif dx < 0:
        step_x, t_max_x = -1, (ix * res - ox) / dx
        t_delta_x = -res / dx
    else:
        step_x, t_max_x, t_delta_x = 0, math.inf, math.inf
    if dy > 0:
        step_y, t_max_y = 1, ((iy + 1) * res - oy) / dy
        t_delta_y = res / dy
    elif dy < 0:
        step_y, t_max_y = -1, (iy * res - oy) / dy
        t_delta_y = -res / dy
    else:
        step_y, t_max_y, t_delta_y = 0, math.inf, math.inf

    cells = grid.cells
    while True:
        if t_max_x < t_max_y:
            t = t_max_x
            t_max_x += t_delta_x
            ix += step_x
        else:
            t = t_max_y
            t_max_y += t_delta_y
            iy += step_y
        if t >= max_range:
            return max_range
        if not (0 <= ix < grid.width and 0 <= iy < grid.height):
            return max_range  # unreachable on closed maps; defensive
        if cells[iy, ix]:
            return t


def default_map_dirs() -> list[Path]:
    """Map search path: $T2E_MAP_DIR (if set) then the packaged map sets."""
    here = Path(__file__).parent / "maps"
    dirs = []
    env = os.environ.get("T2E_MAP_DIR")
    if env:
        dirs.append(Path(env))
    dirs.append(here)
    dirs.append(here / "fixtures")
    return dirs


def resolve_map(ref: str | Path) -> Path:
    """Resolve a map reference: an existing path, or a name searched in the
    default map directories (with or without the ``.t2e.map`` suffix)."""
    p = Path(ref)
    if p.exists():
        return p
    names = [str(ref), str(ref) + MAP_SUFFIX]
    for d in default_map_dirs():
        for name in names:
            cand = d / name
            if cand.exists():
                return cand
    raise FileNotFoundError(f"map {ref!r} not found (searched {default_map_dirs()})")


def find_map(ref: str | Path) -> OccupancyGrid:
    return load_map(resolve_map(ref))


def shipped_map_paths(include_fixtures: bool = True) -> list[Path]:
    here = Path(__file__).parent / "maps"
    paths = sorted(here.glob("*" + MAP_SUFFIX))
    if include_fixtures:
        paths += sorted((here / "fixtures").glob("*" + MAP_SUFFIX))
    return paths
