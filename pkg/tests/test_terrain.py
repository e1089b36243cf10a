import numpy as np
import pytest

from footplan import pgm
from footplan.terrain import (GridSpec, HeightmapWindow, TerrainError, TerrainGrid,
                              extract_window, generate_flat, generate_rough,
                              generate_stairs, load_terrain_pgm, sample_height,
                              save_terrain_pgm)

SPEC = GridSpec(n_rows=150, n_cols=250, resolution=0.02, origin_xy=(-1.0, -1.5))


class TestStairs:
    def test_height_past_last_step(self):
        grid = generate_stairs(0.10, 0.30, 4, SPEC)
        x_max = grid.extent()[1]
        assert sample_height(grid, (x_max, 0.0)) == pytest.approx(0.40)

    def test_zero_steps_is_flat(self):
        grid = generate_stairs(0.10, 0.30, 0, SPEC)
        assert np.all(grid.heights == 0.0)

    def test_first_tread_is_exactly_one_rise(self):
        grid = generate_stairs(0.10, 0.30, 4, SPEC, stairs_start_x=0.0)
        # stored cells are sharp: every cell on the first tread holds 0.10
        j = np.searchsorted(np.arange(SPEC.n_cols) * SPEC.resolution + SPEC.origin_xy[0], 0.15)
        assert grid.heights[0, j] == pytest.approx(0.10)

    def test_invariant_along_y(self):
        grid = generate_stairs(0.08, 0.24, 5, SPEC)
        assert np.all(grid.heights == grid.heights[0:1, :])

    def test_rejects_bad_dimensions(self):
        with pytest.raises(TerrainError):
            generate_stairs(-0.1, 0.3, 4, SPEC)
        with pytest.raises(TerrainError):
            generate_stairs(0.1, 0.01, 4, SPEC)


class TestRough:
    def test_zero_amplitude_flat(self):
        grid = generate_rough(0.0, 0.3, 7, SPEC)
        assert np.all(grid.heights == 0.0)

    def test_deterministic_for_seed(self):
        a = generate_rough(0.08, 0.3, 7, SPEC)
        b = generate_rough(0.08, 0.3, 7, SPEC)
        assert np.array_equal(a.heights, b.heights)

    def test_amplitude_bound(self):
        grid = generate_rough(0.08, 0.3, 7, SPEC)
        assert np.abs(grid.heights).max() == pytest.approx(0.08)

    def test_golden_checksum(self):
        # frozen from the first implementation run; guards accidental RNG
        # or filtering changes
        grid = generate_rough(0.08, 0.3, 7, GridSpec(64, 64, 0.02, (0.0, 0.0)))
        assert float(grid.heights.sum()) == pytest.approx(-17.343355275704347, rel=1e-12)


class TestSampleHeight:
    def test_cell_center_exact(self):
        grid = generate_rough(0.05, 0.2, 3, SPEC)
        x = SPEC.origin_xy[0] + 10 * SPEC.resolution
        y = SPEC.origin_xy[1] + 7 * SPEC.resolution
        assert sample_height(grid, (x, y)) == pytest.approx(grid.heights[7, 10])

    def test_midpoint_linear(self):
        heights = np.zeros((4, 4))
        heights[:, 2] = 0.1
        grid = TerrainGrid((0.0, 0.0), 0.02, heights)
        assert sample_height(grid, (0.03, 0.0)) == pytest.approx(0.05)

    def test_outside_extent_raises(self):
        grid = generate_flat(SPEC)
        with pytest.raises(TerrainError):
            sample_height(grid, (SPEC.origin_xy[0] - 0.01, 0.0))

    def test_continuity(self):
        grid = generate_stairs(0.10, 0.30, 4, SPEC)
        rng = np.random.default_rng(0)
        x_min, x_max, y_min, y_max = grid.extent()
        for _ in range(200):
            x = rng.uniform(x_min, x_max - 1e-5)
            y = rng.uniform(y_min, y_max - 1e-5)
            a = sample_height(grid, (x, y))
            b = sample_height(grid, (x + 1e-6, y + 1e-6))
            assert abs(a - b) < 1e-4


class TestExtractWindow:
    def test_flat_window_zero(self):
        window = extract_window(generate_flat(SPEC), (0.5, 0.0))
        assert np.all(window.heights == 0.0)

    def test_center_cell_matches_grid(self):
        grid = generate_rough(0.06, 0.25, 11, SPEC)
        rng = np.random.default_rng(2)
        for _ in range(20):
            cx = rng.uniform(-0.3, 3.0)
            cy = rng.uniform(-0.8, 0.8)
            window = extract_window(grid, (cx, cy))
            assert window.heights[16, 16] == pytest.approx(sample_height(grid, (
                grid.origin_xy[0] + round((cx - grid.origin_xy[0]) / 0.02) * 0.02,
                grid.origin_xy[1] + round((cy - grid.origin_xy[1]) / 0.02) * 0.02)))

    def test_stairs_window_matches_lookup(self):
        grid = generate_stairs(0.10, 0.30, 4, SPEC)
        window = extract_window(grid, (1.5, 0.0))
        x, y = window.cell_xy()
        for i in range(0, 32, 5):
            for j in range(0, 32, 5):
                assert window.heights[i, j] == pytest.approx(
                    sample_height(grid, (x[i, j], y[i, j])), abs=1e-12)

    def test_too_close_to_border_raises(self):
        grid = generate_flat(SPEC)
        with pytest.raises(TerrainError):
            extract_window(grid, (SPEC.origin_xy[0] + 0.1, 0.0))

    def test_resolution_matches_grid(self):
        window = extract_window(generate_flat(SPEC), (0.5, 0.0))
        assert window.resolution == SPEC.resolution


class TestPgmRoundTrip:
    def test_terrain_pgm_round_trip(self, tmp_path):
        grid = generate_stairs(0.10, 0.30, 4, SPEC)
        path = tmp_path / "stairs.pgm"
        save_terrain_pgm(grid, path)
        back = load_terrain_pgm(path)
        scale = (grid.heights.max() - grid.heights.min()) / 65535.0
        assert back.origin_xy == grid.origin_xy
        assert back.resolution == grid.resolution
        assert np.abs(back.heights - grid.heights).max() <= scale

    def test_pgm_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P6 nonsense")
        with pytest.raises(pgm.PgmError):
            pgm.read_pgm(path)

    def test_missing_sidecar(self, tmp_path):
        grid = generate_flat(SPEC)
        path = tmp_path / "flat.pgm"
        save_terrain_pgm(grid, path)
        path.with_suffix(".json").unlink()
        with pytest.raises(TerrainError):
            load_terrain_pgm(path)


class TestValidation:
    def test_nonfinite_heights_rejected(self):
        with pytest.raises(TerrainError):
            TerrainGrid((0, 0), 0.02, np.array([[0.0, np.nan]]))

    def test_window_must_be_32(self):
        with pytest.raises(TerrainError):
            HeightmapWindow((0, 0), 0.02, np.zeros((16, 16)))

    def test_grids_immutable(self):
        grid = generate_flat(SPEC)
        with pytest.raises(ValueError):
            grid.heights[0, 0] = 1.0
