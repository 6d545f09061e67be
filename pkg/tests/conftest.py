import numpy as np
import pytest

from t2e.gridmap import OccupancyGrid
from t2e.mapgen import FIXTURES, empty_arena


def grid_from_rows(rows, resolution=0.1, name="test"):
    cells = np.array([[ch == "#" for ch in row] for row in rows], dtype=bool)
    return OccupancyGrid(cells, resolution, name=name)


def random_grid(seed, side=60, density=0.2, resolution=0.1):
    rng = np.random.default_rng(seed)
    occ = rng.random((side, side)) < density
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    if (~occ).sum() == 0:
        occ[side // 2, side // 2] = False
    return OccupancyGrid(occ, resolution, name=f"rand{seed}")


@pytest.fixture
def arena_6x6():
    return FIXTURES["arena_6x6"]()


@pytest.fixture
def arena_10x10():
    return FIXTURES["arena_10x10"]()


@pytest.fixture
def deadend():
    return FIXTURES["deadend_corridor"]()


@pytest.fixture
def open_arena_20m():
    return empty_arena(202, 202, name="arena_20x20")
