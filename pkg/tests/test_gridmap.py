import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from t2e.gridmap import (MAP_SUFFIX, MapLevel, OccupancyGrid, OutOfBoundsError,
                         ParseError, ValidationError, classify_level,
                         clearance, clearance_field, level_for_area, load_map,
                         parse_map, raycast, save_map, shipped_map_paths,
                         traversable_area)

from conftest import grid_from_rows, random_grid
from oracles import brute_clearance, brute_raycast


def make_text(rows, resolution=0.1):
    return "\n".join(["T2E-MAP v1", f"resolution {resolution}",
                      f"size {len(rows[0])} {len(rows)}"] + rows) + "\n"


class TestParsing:
    def test_ten_by_ten_interior_free(self):
        rows = ["#" * 10] + ["#" + "." * 8 + "#"] * 8 + ["#" * 10]
        grid = parse_map(make_text(rows))
        assert grid.width == grid.height == 10
        assert grid.free_count == 64

    def test_ragged_rows_are_a_parse_error(self):
        rows = ["#" * 10] + ["#" + "." * 8 + "#"] * 7 + ["#" + "." * 7 + "#"] + ["#" * 10]
        with pytest.raises(ParseError):
            parse_map(make_text(rows))

    def test_bad_magic(self):
        text = make_text(["#" * 10] + ["#" + "." * 8 + "#"] * 8 + ["#" * 10])
        with pytest.raises(ParseError):
            parse_map(text.replace("T2E-MAP v1", "T2E-MAP v9"))

    def test_bad_characters(self):
        rows = ["#" * 10] + ["#" + "." * 8 + "#"] * 7 + ["#" + "..x....." + "#"] + ["#" * 10]
        with pytest.raises(ParseError):
            parse_map(make_text(rows))

    def test_row_count_mismatch(self):
        rows = ["#" * 10] + ["#" + "." * 8 + "#"] * 8 + ["#" * 10]
        text = make_text(rows).replace("size 10 10", "size 10 11")
        with pytest.raises(ParseError):
            parse_map(text)

    def test_open_border_rejected(self):
        rows = ["#" * 10] + ["." + "." * 8 + "#"] + ["#" + "." * 8 + "#"] * 7 + ["#" * 10]
        with pytest.raises(ValidationError):
            parse_map(make_text(rows))

    def test_no_free_cells_rejected(self):
        with pytest.raises(ValidationError):
            parse_map(make_text(["#" * 10] * 10))

    def test_too_small_rejected(self):
        rows = ["#" * 7] + ["#" + "." * 5 + "#"] * 5 + ["#" * 7]
        with pytest.raises(ValidationError):
            parse_map(make_text(rows))

    def test_roundtrip_bit_exact(self, tmp_path):
        grid = random_grid(3, side=20)
        path = tmp_path / ("roundtrip" + MAP_SUFFIX)
        save_map(grid, path)
        again = load_map(path)
        assert again == grid
        save_map(again, tmp_path / ("second" + MAP_SUFFIX))
        assert (tmp_path / ("second" + MAP_SUFFIX)).read_bytes() == path.read_bytes()

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_roundtrip_property(self, seed):
        grid = random_grid(seed, side=12, density=0.3)
        assert parse_map(grid.to_text(), name=grid.name) == grid


class TestAreaAndLevels:
    def test_single_free_cell_area(self):
        rows = ["#" * 8] * 3 + ["###.####"] + ["#" * 8] * 4
        grid = parse_map(make_text(rows))
        assert traversable_area(grid) == pytest.approx(0.01)

    def test_100x100_empty_area(self):
        rows = ["#" * 100] + ["#" + "." * 98 + "#"] * 98 + ["#" * 100]
        grid = parse_map(make_text(rows))
        assert traversable_area(grid) == pytest.approx(96.04)

    def test_exact_40_m2_is_medium(self):
        # 20x20 at 0.5 m: interior has 324 cells; block all but 160.
        cells = np.ones((20, 20), dtype=bool)
        free = 0
        for iy in range(1, 19):
            for ix in range(1, 19):
                if free < 160:
                    cells[iy, ix] = False
                    free += 1
        grid = OccupancyGrid(cells, 0.5)
        assert grid.free_count == 160
        assert traversable_area(grid) == pytest.approx(40.0)
        assert classify_level(grid) is MapLevel.MEDIUM

    @pytest.mark.parametrize("area,level", [
        (39.99, MapLevel.SMALL),
        (40.0, MapLevel.MEDIUM),
        (50.0, MapLevel.MEDIUM),
        (60.0, MapLevel.MEDIUM),
        (60.01, MapLevel.LARGE),
    ])
    def test_level_boundaries(self, area, level):
        assert level_for_area(area) is level

    def test_every_grid_has_exactly_one_level(self):
        for area in np.linspace(0.01, 120, 77):
            assert level_for_area(float(area)) in MapLevel

    def test_shipped_sample_mean_area(self):
        sample_paths = [p for p in shipped_map_paths(include_fixtures=False)]
        assert len(sample_paths) >= 12
        areas = [traversable_area(load_map(p)) for p in sample_paths]
        mean = sum(areas) / len(areas)
        assert 35.0 <= mean <= 50.0
        levels = {classify_level(load_map(p)) for p in sample_paths}
        assert levels == {MapLevel.SMALL, MapLevel.MEDIUM, MapLevel.LARGE}


class TestClearance:
    def test_inside_obstacle_is_zero(self):
        grid = random_grid(1, side=20)
        oy, ox = np.argwhere(grid.cells)[5]
        assert clearance(grid, grid.cell_center(ox, oy)) == 0.0

    def test_free_disc_radius(self):
        # 21x21 free disc of radius 1.0 m carved in a filled grid.
        cells = np.ones((31, 31), dtype=bool)
        for iy in range(31):
            for ix in range(31):
                if math.hypot((ix - 15), (iy - 15)) * 0.1 <= 1.0:
                    cells[iy, ix] = False
        grid = OccupancyGrid(cells, 0.1)
        center = grid.cell_center(15, 15)
        c = clearance(grid, center)
        assert c == pytest.approx(1.0, abs=grid.resolution)
        assert c == pytest.approx(brute_clearance(grid, center), abs=1e-12)

    def test_point_near_wall(self):
        grid = grid_from_rows(["#" * 12] + ["#" + "." * 10 + "#"] * 10 + ["#" * 12])
        point = (0.45, 0.55)  # 0.35 m from the west wall face
        c = clearance(grid, point)
        assert c == pytest.approx(0.35, abs=grid.resolution / 2)
        assert c == pytest.approx(brute_clearance(grid, point), abs=1e-12)

    def test_out_of_bounds(self):
        grid = random_grid(2, side=20)
        with pytest.raises(OutOfBoundsError):
            clearance(grid, (-0.5, 0.5))

    def test_every_free_cell_center_has_positive_clearance(self):
        grid = random_grid(4, side=30)
        field = clearance_field(grid)
        for oy, ox in np.argwhere(~grid.cells)[::7]:
            c = clearance(grid, grid.cell_center(ox, oy))
            assert c > 0.0
            assert c == pytest.approx(field[oy, ox], abs=1e-9)


class TestRaycast:
    def _empty(self, side=40):
        cells = np.zeros((side, side), dtype=bool)
        cells[0, :] = cells[-1, :] = cells[:, 0] = cells[:, -1] = True
        return OccupancyGrid(cells, 0.1)

    def test_perpendicular_wall(self):
        grid = self._empty()
        # east wall face at x = 3.9; origin 1.0 m away
        d = raycast(grid, (2.9, 2.0), 0.0, 5.0)
        assert d == pytest.approx(1.0, abs=grid.resolution)
        assert d == pytest.approx(brute_raycast(grid, (2.9, 2.0), 0.0, 5.0),
                                  abs=grid.resolution / 5)

    def test_open_space_returns_max_range(self):
        grid = self._empty()
        assert raycast(grid, (2.0, 2.0), 0.7, 1.0) == 1.0

    def test_parallel_to_wall(self):
        grid = self._empty()
        # runs parallel to the south wall, 0.5 m above its face
        d = raycast(grid, (0.3, 0.6), 0.0, 3.0)
        assert d == 3.0

    def test_origin_out_of_bounds(self):
        grid = self._empty()
        with pytest.raises(OutOfBoundsError):
            raycast(grid, (99.0, 2.0), 0.0, 1.0)

    def test_matches_brute_oracle_on_random_grids(self):
        # Exact cell traversal may flag corner-grazing cells a point sampler
        # steps over, so the bound is one-sided plus a free-prefix check.
        rng = np.random.default_rng(11)
        for seed in range(5):
            grid = random_grid(seed, side=30)
            free = np.argwhere(~grid.cells)
            for _ in range(20):
                iy, ix = free[rng.integers(len(free))]
                origin = grid.cell_center(ix, iy)
                theta = float(rng.uniform(-math.pi, math.pi))
                got = raycast(grid, origin, theta, 2.0)
                want = brute_raycast(grid, origin, theta, 2.0, step_frac=0.02)
                assert got <= want + grid.resolution / 50
                # everything the sampler sees before the reported hit is free
                prefix = brute_raycast(grid, origin, theta,
                                       max(got - grid.resolution / 50, 0.001),
                                       step_frac=0.02)
                assert prefix >= got - grid.resolution / 25

    def test_bounded_by_clearance_along_ray(self):
        rng = np.random.default_rng(12)
        grid = random_grid(21, side=30)
        free = np.argwhere(~grid.cells)
        diag = grid.resolution * math.sqrt(2)
        for _ in range(50):
            iy, ix = free[rng.integers(len(free))]
            origin = grid.cell_center(ix, iy)
            theta = float(rng.uniform(-math.pi, math.pi))
            d = raycast(grid, origin, theta, 3.0)
            # the ray cannot report an obstacle farther than the nearest
            # obstacle along the ray plus one cell diagonal
            want = brute_raycast(grid, origin, theta, 3.0, step_frac=0.02)
            assert d <= want + diag


class TestMapSearchPath:
    def test_env_var_dir_searched_first(self, tmp_path, monkeypatch):
        from t2e.gridmap import find_map, resolve_map
        grid = random_grid(8, side=16)
        save_map(grid, tmp_path / ("custom" + MAP_SUFFIX))
        monkeypatch.setenv("T2E_MAP_DIR", str(tmp_path))
        assert resolve_map("custom") == tmp_path / ("custom" + MAP_SUFFIX)
        assert find_map("custom") == grid

    def test_packaged_maps_resolve_by_name(self):
        from t2e.gridmap import find_map
        assert find_map("arena_6x6").name == "arena_6x6"
        assert find_map("small_01").width >= 8
