"""Elevation grids, benchmark terrain generators, and per-foot heightmap windows.

World frame convention used across the whole package: x forward, y left,
z up, yaw about z. Grids are stored sharp (no smoothing); interpolation
happens only in sample_height.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .pgm import read_pgm, write_pgm

WINDOW_SIZE = 32  # cells per window side; file formats, CNN and criteria all assume it


class TerrainError(ValueError):
    """Invalid terrain construction or out-of-extent query."""


@dataclass(frozen=True)
class GridSpec:
    """Size and placement of a generated terrain grid."""

    n_rows: int = 200
    n_cols: int = 300
    resolution: float = 0.02
    origin_xy: tuple[float, float] = (-1.0, -2.0)

    def __post_init__(self):
        if self.n_rows <= 0 or self.n_cols <= 0:
            raise TerrainError("grid dimensions must be positive")
        if self.resolution <= 0:
            raise TerrainError("resolution must be positive")


@dataclass(frozen=True)
class TerrainGrid:
    """Regular 2.5D elevation field.

    Cell (i, j) center sits at origin_xy + (j*resolution, i*resolution):
    rows advance along +y, columns along +x. heights is indexed [i, j].
    Immutable after construction; safe to share across workers.
    """

    origin_xy: tuple[float, float]
    resolution: float
    heights: np.ndarray

    def __post_init__(self):
        if self.resolution <= 0:
            raise TerrainError("resolution must be positive")
        h = np.ascontiguousarray(np.asarray(self.heights, dtype=float))
        if h.ndim != 2 or h.size == 0:
            raise TerrainError("heights must be a non-empty 2D array")
        if not np.isfinite(h).all():
            raise TerrainError("heights must be finite")
        h.setflags(write=False)
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "origin_xy", (float(self.origin_xy[0]), float(self.origin_xy[1])))

    @property
    def n_rows(self) -> int:
        return self.heights.shape[0]

    @property
    def n_cols(self) -> int:
        return self.heights.shape[1]

    def extent(self) -> tuple[float, float, float, float]:
        """Hull of cell centers as (x_min, x_max, y_min, y_max). Queries outside error."""
        ox, oy = self.origin_xy
        return (
            ox,
            ox + (self.n_cols - 1) * self.resolution,
            oy,
            oy + (self.n_rows - 1) * self.resolution,
        )


@dataclass(frozen=True)
class HeightmapWindow:
    """Square local heightmap centered on a nominal foothold.

    Cell (i, j) holds the terrain height at
    center_xy + ((j - W/2)*resolution, (i - W/2)*resolution), so the
    window center cell is (W/2, W/2). W is fixed at 32.
    """

    center_xy: tuple[float, float]
    resolution: float
    heights: np.ndarray

    def __post_init__(self):
        h = np.ascontiguousarray(np.asarray(self.heights, dtype=float))
        if h.shape != (WINDOW_SIZE, WINDOW_SIZE):
            raise TerrainError(f"window must be {WINDOW_SIZE}x{WINDOW_SIZE}, got {h.shape}")
        if not np.isfinite(h).all():
            raise TerrainError("window heights must be finite")
        if self.resolution <= 0:
            raise TerrainError("resolution must be positive")
        h.setflags(write=False)
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "center_xy", (float(self.center_xy[0]), float(self.center_xy[1])))

    @property
    def size(self) -> int:
        return WINDOW_SIZE

    def cell_xy(self) -> tuple[np.ndarray, np.ndarray]:
        """World x and y coordinates of all cell centers, each (W, W)."""
        half = WINDOW_SIZE // 2
        offs = (np.arange(WINDOW_SIZE) - half) * self.resolution
        x = self.center_xy[0] + offs[np.newaxis, :] + np.zeros((WINDOW_SIZE, 1))
        y = self.center_xy[1] + offs[:, np.newaxis] + np.zeros((1, WINDOW_SIZE))
        return x, y

    def lookup_nearest(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nearest-cell heights at world (x, y); second return flags points inside the window.

        Out-of-window points get height -inf (treated as no obstacle by collision checks).
        """
        j = np.rint((np.asarray(x) - self.center_xy[0]) / self.resolution).astype(int) + WINDOW_SIZE // 2
        i = np.rint((np.asarray(y) - self.center_xy[1]) / self.resolution).astype(int) + WINDOW_SIZE // 2
        i, j = np.broadcast_arrays(i, j)
        inside = (i >= 0) & (i < WINDOW_SIZE) & (j >= 0) & (j < WINDOW_SIZE)
        vals = self.heights[np.clip(i, 0, WINDOW_SIZE - 1), np.clip(j, 0, WINDOW_SIZE - 1)]
        return np.where(inside, vals, -np.inf), inside


def generate_stairs(step_rise: float, step_run: float, n_steps: int, spec: GridSpec = GridSpec(),
                    stairs_start_x: float | None = None) -> TerrainGrid:
    """Monotone staircase along +x with flat aprons before and after.

    Risers are sharp: a cell is either on one tread or the next, no blending.
    The staircase is centered in x unless stairs_start_x is given.
    """
    if step_rise <= 0:
        raise TerrainError("step_rise must be positive")
    if step_run < 2 * spec.resolution:
        raise TerrainError("step_run must be at least two cells")
    if n_steps < 0:
        raise TerrainError("n_steps must be non-negative")
    xs = spec.origin_xy[0] + np.arange(spec.n_cols) * spec.resolution
    if stairs_start_x is None:
        span = xs[-1] - xs[0]
        stairs_start_x = xs[0] + 0.5 * (span - n_steps * step_run)
    if n_steps == 0:
        col = np.zeros(spec.n_cols)
    else:
        step_idx = np.floor((xs - stairs_start_x) / step_run) + 1
        col = step_rise * np.clip(step_idx, 0, n_steps)
    heights = np.tile(col, (spec.n_rows, 1))
    return TerrainGrid(spec.origin_xy, spec.resolution, heights)


def generate_rough(amplitude: float, correlation_len: float, seed: int,
                   spec: GridSpec = GridSpec()) -> TerrainGrid:
    """Random rough terrain: white noise smoothed by repeated box filters.

    Deterministic for a fixed seed; heights are rescaled so max|h| == amplitude.
    """
    if amplitude < 0:
        raise TerrainError("amplitude must be non-negative")
    if correlation_len <= 0:
        raise TerrainError("correlation_len must be positive")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((spec.n_rows, spec.n_cols))
    size = max(1, int(round(correlation_len / spec.resolution)))
    smooth = ndimage.uniform_filter(noise, size=size, mode="nearest")
    smooth = ndimage.uniform_filter(smooth, size=size, mode="nearest")
    peak = np.abs(smooth).max()
    if amplitude == 0 or peak == 0:
        heights = np.zeros_like(smooth)
    else:
        heights = smooth * (amplitude / peak)
    return TerrainGrid(spec.origin_xy, spec.resolution, heights)


def generate_flat(spec: GridSpec = GridSpec()) -> TerrainGrid:
    """All-zero terrain."""
    return TerrainGrid(spec.origin_xy, spec.resolution, np.zeros((spec.n_rows, spec.n_cols)))


def sample_height(grid: TerrainGrid, xy) -> float:
    """Bilinear interpolation of the four surrounding cell centers. No extrapolation."""
    x, y = float(xy[0]), float(xy[1])
    x_min, x_max, y_min, y_max = grid.extent()
    if not (x_min <= x <= x_max and y_min <= y <= y_max):
        raise TerrainError(f"query ({x:.3f}, {y:.3f}) outside terrain extent")
    fj = (x - grid.origin_xy[0]) / grid.resolution
    fi = (y - grid.origin_xy[1]) / grid.resolution
    j0 = min(int(np.floor(fj)), grid.n_cols - 2) if grid.n_cols > 1 else 0
    i0 = min(int(np.floor(fi)), grid.n_rows - 2) if grid.n_rows > 1 else 0
    tj = fj - j0
    ti = fi - i0
    h = grid.heights
    j1 = min(j0 + 1, grid.n_cols - 1)
    i1 = min(i0 + 1, grid.n_rows - 1)
    top = h[i0, j0] * (1 - tj) + h[i0, j1] * tj
    bot = h[i1, j0] * (1 - tj) + h[i1, j1] * tj
    return float(top * (1 - ti) + bot * ti)


def extract_window(grid: TerrainGrid, center_xy) -> HeightmapWindow:
    """Cut the 32x32 window centered at center_xy using nearest-cell lookup."""
    cx, cy = float(center_xy[0]), float(center_xy[1])
    half = WINDOW_SIZE // 2
    offs = np.arange(WINDOW_SIZE) - half
    j = np.rint((cx + offs * grid.resolution - grid.origin_xy[0]) / grid.resolution).astype(int)
    i = np.rint((cy + offs * grid.resolution - grid.origin_xy[1]) / grid.resolution).astype(int)
    if i.min() < 0 or i.max() >= grid.n_rows or j.min() < 0 or j.max() >= grid.n_cols:
        raise TerrainError("window footprint exceeds terrain extent")
    heights = grid.heights[np.ix_(i, j)]
    return HeightmapWindow((cx, cy), grid.resolution, heights)


def save_terrain_pgm(grid: TerrainGrid, path) -> None:
    """Write 16-bit PGM plus a JSON sidecar holding origin, resolution and height scale."""
    path = Path(path)
    z_min = float(grid.heights.min())
    z_max = float(grid.heights.max())
    z_scale = (z_max - z_min) / 65535.0 if z_max > z_min else 1.0
    pixels = np.rint((grid.heights - z_min) / z_scale).astype(np.uint16)
    write_pgm(path, pixels, 65535)
    sidecar = {
        "origin_xy": [grid.origin_xy[0], grid.origin_xy[1]],
        "resolution": grid.resolution,
        "z_min": z_min,
        "z_scale": z_scale,
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))


def load_terrain_pgm(path) -> TerrainGrid:
    """Read a terrain written by save_terrain_pgm (PGM + sidecar JSON)."""
    path = Path(path)
    pixels, maxval = read_pgm(path)
    if maxval != 65535:
        raise TerrainError(f"{path}: terrain PGM must be 16-bit")
    sidecar_path = path.with_suffix(".json")
    if not sidecar_path.exists():
        raise TerrainError(f"missing sidecar {sidecar_path}")
    meta = json.loads(sidecar_path.read_text())
    heights = meta["z_min"] + pixels.astype(float) * meta["z_scale"]
    return TerrainGrid(tuple(meta["origin_xy"]), float(meta["resolution"]), heights)
