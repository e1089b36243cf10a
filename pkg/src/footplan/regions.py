"""Convex safe-region extraction from safety masks.

Pipeline: connected components of the safe set -> rectilinear boundary
contour -> Douglas-Peucker simplification -> ear-clipping triangulation
merged by Hertel-Mehlhorn -> foot-radius inset -> nearest-region selection.
Simplification may bulge outside the true safe set, so every piece is
re-verified cell-wise against the mask and clipped back when it fails.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .criteria import RobotGeometry, SafetyMask
from .terrain import WINDOW_SIZE

_EPS = 1e-12


class RegionError(ValueError):
    """Invalid geometry input to the region pipeline."""


@dataclass(frozen=True)
class Polygon:
    """Simple polygon, vertices ordered counter-clockwise in world xy."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
            raise RegionError("polygon needs at least 3 xy vertices")
        if _signed_area(v) <= 0:
            raise RegionError("polygon must be counter-clockwise with positive area")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def area(self) -> float:
        return _signed_area(self.vertices)

    def is_simple(self) -> bool:
        """Quadratic non-adjacent segment intersection test (diagnostics only)."""
        v = self.vertices
        n = len(v)
        for a in range(n):
            a2 = (a + 1) % n
            for b in range(a + 1, n):
                b2 = (b + 1) % n
                if a == b or a2 == b or a == b2:
                    continue
                if _segments_cross(v[a], v[a2], v[b], v[b2]):
                    return False
        return True


@dataclass(frozen=True)
class ConvexRegion:
    """Convex polygon with halfspace form a.p <= b, usable as MPC constraints."""

    polygon: Polygon
    normals: np.ndarray
    offsets: np.ndarray
    area: float
    terrain_z_ref: float = 0.0

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        """Boundary-inclusive membership test for (..., 2) points."""
        p = np.asarray(points, dtype=float)
        return np.all(p @ self.normals.T <= self.offsets + tol, axis=-1)

    def distance(self, point) -> float:
        """Euclidean distance from point to the region (0 inside)."""
        p = np.asarray(point, dtype=float)
        if self.contains(p, tol=1e-12):
            return 0.0
        v = self.polygon.vertices
        return min(
            _point_segment_distance(p, v[k], v[(k + 1) % len(v)]) for k in range(len(v))
        )


@dataclass(frozen=True)
class Component:
    """Connected set of safe cells, georeferenced by its corner lattice origin."""

    cells: np.ndarray  # (n, 2) int (row, col)
    corner_origin_xy: tuple[float, float]
    resolution: float

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=int)
        if cells.ndim != 2 or cells.shape[1] != 2 or cells.shape[0] == 0:
            raise RegionError("component needs a non-empty (n, 2) cell list")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def area(self) -> float:
        return self.cells.shape[0] * self.resolution**2


@dataclass(frozen=True)
class RegionSelection:
    """Output of decompose_and_select: all surviving regions plus the pick."""

    regions: list[ConvexRegion]
    selected_index: int | None

    @property
    def no_region(self) -> bool:
        return self.selected_index is None

    @property
    def selected(self) -> ConvexRegion | None:
        return None if self.selected_index is None else self.regions[self.selected_index]


# ---------------------------------------------------------------------------
# scalar geometry helpers


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    xn = np.concatenate([x[1:], x[:1]])
    yn = np.concatenate([y[1:], y[:1]])
    return 0.5 * float(np.dot(x, yn) - np.dot(y, xn))


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _point_segment_distance(p, a, b) -> float:
    ab = b - a
    denom = float(ab @ ab)
    if denom < _EPS:
        return float(np.linalg.norm(p - a))
    t = np.clip(float((p - a) @ ab) / denom, 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def _points_segment_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from many points to one segment."""
    ab = b - a
    denom = float(ab @ ab)
    if denom < _EPS:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(points - proj, axis=1)


def _segments_cross(a, b, c, d) -> bool:
    d1 = _cross(c, d, a)
    d2 = _cross(c, d, b)
    d3 = _cross(a, b, c)
    d4 = _cross(a, b, d)
    return ((d1 > _EPS) != (d2 > _EPS)) and ((d3 > _EPS) != (d4 > _EPS)) \
        and min(abs(d1), abs(d2), abs(d3), abs(d4)) > _EPS


def _dedupe_collinear(v: np.ndarray, eps: float) -> np.ndarray:
    """Drop consecutive duplicates and collinear middle vertices."""
    pts = [tuple(p) for p in v.tolist()]
    out = []
    n = len(pts)
    for k in range(n):
        nxt = pts[(k + 1) % n]
        cur = pts[k]
        if (cur[0] - nxt[0]) ** 2 + (cur[1] - nxt[1]) ** 2 >= 1e-24:
            out.append(cur)
    pts = out
    changed = True
    while changed and len(pts) > 3:
        changed = False
        keep = []
        n = len(pts)
        for k in range(n):
            a, b, c = pts[k - 1], pts[k], pts[(k + 1) % n]
            cr = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if abs(cr) <= eps:
                changed = True
            else:
                keep.append(b)
        if len(keep) < 3:
            break
        pts = keep
    return np.asarray(pts) if pts else np.empty((0, 2))


def _polygon_nocheck(v: np.ndarray) -> Polygon:
    """Internal constructor for loops already known simple and CCW."""
    poly = object.__new__(Polygon)
    object.__setattr__(poly, "vertices", v)
    return poly


def _make_region(vertices, terrain_z_ref: float = 0.0) -> ConvexRegion | None:
    """Build a ConvexRegion from a CCW convex vertex loop; None when degenerate."""
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return None
    scale = max(1e-9, float(np.abs(v).max()))
    v = _dedupe_collinear(v, eps=1e-12 * scale * scale)
    if len(v) < 3:
        return None
    area = _signed_area(v)
    if area <= 1e-12:
        return None
    edges = np.empty_like(v)
    edges[:-1] = v[1:] - v[:-1]
    edges[-1] = v[0] - v[-1]
    lengths = np.sqrt(edges[:, 0] ** 2 + edges[:, 1] ** 2)
    if lengths.min() < 1e-12:
        return None
    normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1) / lengths[:, None]  # outward for CCW
    offsets = normals[:, 0] * v[:, 0] + normals[:, 1] * v[:, 1]
    return ConvexRegion(_polygon_nocheck(v), normals, offsets, area, terrain_z_ref)


def _clip_halfspace(vertices: np.ndarray, normal, offset: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex loop against a.p <= b."""
    n = len(vertices)
    dist = offset - vertices @ np.asarray(normal)
    if dist.min() >= -_EPS:
        return vertices
    out = []
    vx = vertices.tolist()
    dl = dist.tolist()
    for k in range(n):
        k2 = k + 1 if k + 1 < n else 0
        dc, dn = dl[k], dl[k2]
        if dc >= -_EPS:
            out.append(vx[k])
        if (dc > _EPS and dn < -_EPS) or (dc < -_EPS and dn > _EPS):
            t = dc / (dc - dn)
            cur, nxt = vx[k], vx[k2]
            out.append([cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])])
    return np.asarray(out) if out else np.empty((0, 2))


# ---------------------------------------------------------------------------
# pipeline stages


def connected_components(mask: SafetyMask) -> list[Component]:
    """4-connected components of the safe cells, in label order."""
    labels, count = ndimage.label(mask.safe)
    half = WINDOW_SIZE // 2
    corner_origin = (
        mask.center_xy[0] - (half + 0.5) * mask.resolution,
        mask.center_xy[1] - (half + 0.5) * mask.resolution,
    )
    comps = []
    for lab in range(1, count + 1):
        cells = np.argwhere(labels == lab)
        comps.append(Component(cells, corner_origin, mask.resolution))
    return comps


_LEFT = {(0, 1): (1, 0), (1, 0): (0, -1), (0, -1): (-1, 0), (-1, 0): (0, 1)}
_RIGHT = {v: k for k, v in _LEFT.items()}


def trace_contour(component: Component) -> Polygon:
    """Outer boundary of the component's cells as a CCW rectilinear polygon.

    Vertices sit on outer cell corners; interior holes are discarded (the
    pipeline re-verifies pieces cell-wise instead). Assumes the component
    is free of diagonal pinch corners, which decompose_and_select
    guarantees by pre-cleaning the mask.
    """
    cells_arr = component.cells
    i0 = cells_arr[:, 0].min() - 1
    j0 = cells_arr[:, 1].min() - 1
    grid = np.zeros((cells_arr[:, 0].max() - i0 + 2, cells_arr[:, 1].max() - j0 + 2),
                    dtype=bool)
    grid[cells_arr[:, 0] - i0, cells_arr[:, 1] - j0] = True
    edges: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def add_edges(cell_rows, cell_cols, di_a, dj_a, di_b, dj_b):
        for i, j in zip((cell_rows + i0).tolist(), (cell_cols + j0).tolist()):
            edges.setdefault((i + di_a, j + dj_a), []).append((i + di_b, j + dj_b))

    shifted = np.zeros_like(grid)
    shifted[1:, :] = grid[:-1, :]
    bottom = grid & ~shifted
    shifted = np.zeros_like(grid)
    shifted[:, :-1] = grid[:, 1:]
    right = grid & ~shifted
    shifted = np.zeros_like(grid)
    shifted[:-1, :] = grid[1:, :]
    top = grid & ~shifted
    shifted = np.zeros_like(grid)
    shifted[:, 1:] = grid[:, :-1]
    left = grid & ~shifted
    r, c = np.nonzero(bottom)
    add_edges(r, c, 0, 0, 0, 1)
    r, c = np.nonzero(right)
    add_edges(r, c, 0, 1, 1, 1)
    r, c = np.nonzero(top)
    add_edges(r, c, 1, 1, 1, 0)
    r, c = np.nonzero(left)
    add_edges(r, c, 1, 0, 0, 0)

    loops = []
    while edges:
        start = min(edges)
        loop = [start]
        cur = edges[start].pop(0)
        if not edges[start]:
            del edges[start]
        prev_dir = (cur[0] - start[0], cur[1] - start[1])
        while cur != start:
            loop.append(cur)
            options = edges.get(cur, [])
            if not options:
                raise RegionError("open boundary while tracing contour")
            nxt = None
            for want in (_LEFT[prev_dir], prev_dir, _RIGHT[prev_dir]):
                target = (cur[0] + want[0], cur[1] + want[1])
                if target in options:
                    nxt = target
                    break
            if nxt is None:
                nxt = options[0]
            options.remove(nxt)
            if not options:
                del edges[cur]
            prev_dir = (nxt[0] - cur[0], nxt[1] - cur[1])
            cur = nxt
        loops.append(loop)

    def loop_area(loop):
        pts = np.asarray(loop, dtype=float)
        # lattice (I, J) maps to world (x from J, y from I)
        return _signed_area(pts[:, ::-1])

    outer = max(loops, key=loop_area)
    pts = np.asarray(outer, dtype=float)
    world = np.empty_like(pts)
    ox, oy = component.corner_origin_xy
    world[:, 0] = ox + pts[:, 1] * component.resolution
    world[:, 1] = oy + pts[:, 0] * component.resolution
    # merge collinear runs along each straight boundary stretch
    prev = np.roll(world, 1, axis=0)
    nxt = np.roll(world, -1, axis=0)
    cross = ((world[:, 0] - prev[:, 0]) * (nxt[:, 1] - prev[:, 1])
             - (world[:, 1] - prev[:, 1]) * (nxt[:, 0] - prev[:, 0]))
    return Polygon(world[np.abs(cross) > _EPS])


def _dp_chain(points: np.ndarray, tol: float) -> list[int]:
    """Douglas-Peucker on an open chain; returns kept indices including endpoints."""
    keep = [0, len(points) - 1]
    stack = [(0, len(points) - 1)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        dists = _points_segment_distances(points[lo + 1:hi], points[lo], points[hi])
        k_rel = int(np.argmax(dists))
        if dists[k_rel] > tol:
            k = lo + 1 + k_rel
            keep.append(k)
            stack.append((lo, k))
            stack.append((k, hi))
    return sorted(set(keep))


def simplify(polygon: Polygon, tol: float) -> Polygon:
    """Douglas-Peucker on the closed contour; vertices stay within tol of it.

    The result is only ever used as decomposition input; safety is
    re-checked cell-wise downstream.
    """
    if tol < 0:
        raise RegionError("tolerance must be non-negative")
    if tol == 0:
        return polygon
    v = polygon.vertices
    # anchor at vertex 0 and the vertex farthest from it, then simplify both chains
    far = int(np.argmax(np.linalg.norm(v - v[0], axis=1)))
    chain1 = v[: far + 1]
    chain2 = np.vstack([v[far:], v[:1]])
    idx1 = _dp_chain(chain1, tol)
    idx2 = _dp_chain(chain2, tol)
    kept = np.vstack([chain1[idx1][:-1], chain2[idx2][:-1]])
    scale = max(1e-9, float(np.abs(kept).max()))
    kept = _dedupe_collinear(kept, eps=1e-12 * scale * scale)
    if len(kept) < 3 or _signed_area(kept) <= 0:
        raise RegionError("simplification degenerated the polygon")
    return Polygon(kept)


def _triangulate(v: np.ndarray) -> list[tuple[int, int, int]]:
    """Ear clipping for a simple CCW polygon; returns vertex index triangles."""
    n = len(v)
    scale = max(1e-9, float(np.abs(v).max()))
    eps = 1e-12 * scale * scale
    active = list(range(n))
    tris = []

    def is_ear(pos: int) -> bool:
        m = len(active)
        ia, ib, ic = active[pos - 1], active[pos], active[(pos + 1) % m]
        a, b, c = v[ia], v[ib], v[ic]
        if _cross(a, b, c) <= eps:
            return False
        others = [k for k in active if k not in (ia, ib, ic)]
        if not others:
            return True
        p = v[others]
        in_ab = (b[0] - a[0]) * (p[:, 1] - a[1]) - (b[1] - a[1]) * (p[:, 0] - a[0]) >= -eps
        in_bc = (c[0] - b[0]) * (p[:, 1] - b[1]) - (c[1] - b[1]) * (p[:, 0] - b[0]) >= -eps
        in_ca = (a[0] - c[0]) * (p[:, 1] - c[1]) - (a[1] - c[1]) * (p[:, 0] - c[0]) >= -eps
        return not (in_ab & in_bc & in_ca).any()

    while len(active) > 3:
        for pos in range(len(active)):
            if is_ear(pos):
                m = len(active)
                tris.append((active[pos - 1], active[pos], active[(pos + 1) % m]))
                active.pop(pos)
                break
        else:
            # numerically stuck: clip the most convex corner to guarantee progress
            m = len(active)
            crosses = [
                _cross(v[active[p - 1]], v[active[p]], v[active[(p + 1) % m]])
                for p in range(m)
            ]
            pos = int(np.argmax(crosses))
            tris.append((active[pos - 1], active[pos], active[(pos + 1) % m]))
            active.pop(pos)
    tris.append((active[0], active[1], active[2]))
    return tris


def _hertel_mehlhorn(v: np.ndarray, tris: list[tuple[int, int, int]]) -> list[list[int]]:
    """Merge triangles across inessential diagonals; pieces stay convex."""
    scale = max(1e-9, float(np.abs(v).max()))
    eps = 1e-12 * scale * scale
    pieces: dict[int, list[int]] = {pid: list(tri) for pid, tri in enumerate(tris)}
    edge_owners: dict[tuple[int, int], list[int]] = {}
    for pid, tri in pieces.items():
        for k in range(len(tri)):
            e = tuple(sorted((tri[k], tri[(k + 1) % len(tri)])))
            edge_owners.setdefault(e, []).append(pid)
    diagonals = sorted(e for e, owners in edge_owners.items() if len(owners) == 2)

    def merged_cycle(pa: list[int], pb: list[int], i: int, j: int) -> list[int] | None:
        # pa contains directed edge i->j, pb contains j->i
        na, nb = len(pa), len(pb)
        ka = next((k for k in range(na) if pa[k] == i and pa[(k + 1) % na] == j), None)
        kb = next((k for k in range(nb) if pb[k] == j and pb[(k + 1) % nb] == i), None)
        if ka is None or kb is None:
            return None
        between = [pb[(kb + 1 + t) % nb] for t in range(1, nb - 1)]  # path i -> ... -> j exclusive
        out = []
        k = (ka + 1) % na  # start at j, walk pa back around to i
        while True:
            out.append(pa[k])
            if pa[k] == i:
                break
            k = (k + 1) % na
        return out + between

    for e in diagonals:
        owners = [pid for pid in edge_owners.get(e, []) if pid in pieces]
        owners = sorted(set(owners))
        if len(owners) != 2:
            continue
        pa, pb = pieces[owners[0]], pieces[owners[1]]
        i, j = e
        cycle = merged_cycle(pa, pb, i, j)
        if cycle is None:
            cycle = merged_cycle(pa, pb, j, i)
        if cycle is None:
            continue
        m = len(cycle)
        convex_ok = True
        for vid in (i, j):
            k = cycle.index(vid)
            if _cross(v[cycle[k - 1]], v[cycle[k]], v[cycle[(k + 1) % m]]) < -eps:
                convex_ok = False
                break
        if not convex_ok:
            continue
        keep_id, drop_id = owners
        pieces[keep_id] = cycle
        del pieces[drop_id]
        for k in range(m):
            e2 = tuple(sorted((cycle[k], cycle[(k + 1) % m])))
            owners2 = edge_owners.setdefault(e2, [])
            edge_owners[e2] = [keep_id if pid == drop_id else pid for pid in owners2]
    return [pieces[pid] for pid in sorted(pieces)]


def convex_decompose(polygon: Polygon) -> list[ConvexRegion]:
    """Split a simple CCW polygon into convex pieces covering it exactly."""
    v = polygon.vertices
    tris = _triangulate(v)
    cycles = _hertel_mehlhorn(v, tris)
    regions = []
    for cycle in cycles:
        region = _make_region(v[cycle])
        if region is not None:
            regions.append(region)
    return regions


def inset(region: ConvexRegion, margin: float) -> ConvexRegion | None:
    """Shrink every halfspace by margin; None when the interior vanishes."""
    if margin < 0:
        raise RegionError("margin must be non-negative")
    if margin == 0:
        return region
    verts = region.polygon.vertices
    for normal, offset in zip(region.normals, region.offsets):
        verts = _clip_halfspace(verts, normal, offset - margin)
        if len(verts) < 3:
            return None
    return _make_region(verts, region.terrain_z_ref)


def select_region(regions: list[ConvexRegion], nominal_xy) -> ConvexRegion:
    """Region nearest to the nominal foothold; ties go to larger area, then lower index."""
    idx = select_region_index(regions, nominal_xy)
    return regions[idx]


def select_region_index(regions: list[ConvexRegion], nominal_xy) -> int:
    if not regions:
        raise RegionError("no candidate regions")
    p = np.asarray(nominal_xy, dtype=float)
    dists = [r.distance(p) for r in regions]
    d_min = min(dists)
    best = None
    for k, (d, r) in enumerate(zip(dists, regions)):
        if d > d_min + 1e-9:
            continue
        if best is None or r.area > regions[best].area + 1e-12:
            best = k
    return best


# ---------------------------------------------------------------------------
# end-to-end decomposition


def _break_pinches(safe: np.ndarray) -> np.ndarray:
    """Clear one cell of every diagonal pinch pair so contours stay simple.

    Only ever removes safe cells, so downstream regions remain sound.
    """
    s = safe.copy()
    while True:
        a = s[:-1, :-1]
        b = s[1:, 1:]
        c = s[:-1, 1:]
        d = s[1:, :-1]
        pinch_main = a & b & ~c & ~d
        pinch_anti = c & d & ~a & ~b
        if not (pinch_main.any() or pinch_anti.any()):
            return s
        s[:-1, :-1] &= ~pinch_main
        s[:-1, 1:] &= ~pinch_anti


def _cell_centers(mask: SafetyMask) -> np.ndarray:
    half = WINDOW_SIZE // 2
    offs = (np.arange(WINDOW_SIZE) - half) * mask.resolution
    x = mask.center_xy[0] + offs
    y = mask.center_xy[1] + offs
    gx, gy = np.meshgrid(x, y)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def _piece_sound(region: ConvexRegion, mask: SafetyMask, centers: np.ndarray) -> bool:
    v = region.polygon.vertices
    bbox = ((centers[:, 0] >= v[:, 0].min() - 1e-9) & (centers[:, 0] <= v[:, 0].max() + 1e-9)
            & (centers[:, 1] >= v[:, 1].min() - 1e-9) & (centers[:, 1] <= v[:, 1].max() + 1e-9))
    if not bbox.any():
        return True
    inside = region.contains(centers[bbox], tol=1e-9)
    return bool(mask.safe.ravel()[bbox][inside].all())


def _rect_decompose(component: Component) -> list[ConvexRegion]:
    """Exact cover of the component's cells by maximal row-run rectangles.

    Used as the re-intersection target when a simplified piece fails the
    cell-wise soundness check: rectangle unions equal the cell region
    exactly and need no triangulation.
    """
    rows: dict[int, list[int]] = {}
    for i, j in component.cells.tolist():
        rows.setdefault(i, []).append(j)
    runs_by_row: dict[int, set[tuple[int, int]]] = {}
    for i, cols in rows.items():
        cols.sort()
        runs = []
        start = prev = cols[0]
        for j in cols[1:]:
            if j == prev + 1:
                prev = j
                continue
            runs.append((start, prev))
            start = prev = j
        runs.append((start, prev))
        runs_by_row[i] = set(runs)
    ox, oy = component.corner_origin_xy
    res = component.resolution
    rects: list[ConvexRegion] = []

    def emit(run, i0, i1):
        j0, j1 = run
        x0, x1 = ox + j0 * res, ox + (j1 + 1) * res
        y0, y1 = oy + i0 * res, oy + (i1 + 1) * res
        v = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
        normals = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
        offsets = np.array([-y0, x1, y1, -x0])
        rects.append(ConvexRegion(_polygon_nocheck(v), normals, offsets,
                                  (x1 - x0) * (y1 - y0)))

    active: dict[tuple[int, int], int] = {}
    prev_row = None
    for i in sorted(runs_by_row):
        if prev_row is not None and i != prev_row + 1:
            for run, i_start in sorted(active.items()):
                emit(run, i_start, prev_row)
            active.clear()
        current = runs_by_row[i]
        for run in sorted(set(active) - current):
            emit(run, active.pop(run), i - 1)
        for run in sorted(current - set(active)):
            active[run] = i
        prev_row = i
    for run, i_start in sorted(active.items()):
        emit(run, i_start, prev_row)
    return rects


def _bbox_overlap(a: ConvexRegion, b: ConvexRegion) -> bool:
    va, vb = a.polygon.vertices, b.polygon.vertices
    return not (va[:, 0].max() < vb[:, 0].min() or vb[:, 0].max() < va[:, 0].min()
                or va[:, 1].max() < vb[:, 1].min() or vb[:, 1].max() < va[:, 1].min())


def _intersect(region: ConvexRegion, other: ConvexRegion) -> ConvexRegion | None:
    if not _bbox_overlap(region, other):
        return None
    verts = region.polygon.vertices
    for normal, offset in zip(other.normals, other.offsets):
        verts = _clip_halfspace(verts, normal, offset)
        if len(verts) < 3:
            return None
    return _make_region(verts, region.terrain_z_ref)


def decompose_and_select(mask: SafetyMask, nominal_xy, geom: RobotGeometry,
                         window=None, simplify_tol: float | None = None) -> RegionSelection:
    """Full pipeline from safety mask to the selected, inset, verified region.

    window (a HeightmapWindow) supplies heights for terrain_z_ref; without
    it the reference height is 0. Returns a no-region selection when
    nothing survives.
    """
    if simplify_tol is None:
        simplify_tol = 1.5 * mask.resolution
    cleaned = _break_pinches(np.asarray(mask.safe, dtype=bool))
    cleaned_mask = SafetyMask(
        safe=cleaned, kinematic=cleaned, roughness=cleaned, frontal=cleaned,
        leg=cleaned, center_xy=mask.center_xy, resolution=mask.resolution,
    )
    centers = _cell_centers(mask)
    final: list[ConvexRegion] = []
    for comp in connected_components(cleaned_mask):
        # a component narrower than the inset diameter cannot survive it
        spans = comp.cells.max(axis=0) - comp.cells.min(axis=0) + 1
        if (spans.min() * mask.resolution) <= 2 * geom.foot_radius:
            continue
        contour = trace_contour(comp)
        try:
            poly = simplify(contour, simplify_tol)
        except RegionError:
            poly = contour
        pieces = convex_decompose(poly)
        exact_pieces: list[ConvexRegion] | None = None
        verified: list[ConvexRegion] = []
        for piece in pieces:
            if _piece_sound(piece, mask, centers):
                verified.append(piece)
                continue
            # cheap first remedy: shave the simplification bulge off
            tightened = inset(piece, mask.resolution)
            if tightened is not None and _piece_sound(tightened, mask, centers):
                verified.append(tightened)
                continue
            if exact_pieces is None:
                exact_pieces = _rect_decompose(comp)
            for exact in exact_pieces:
                clipped = _intersect(piece, exact)
                if clipped is not None:
                    verified.append(clipped)
        survivors = []
        for piece in verified:
            shrunk = inset(piece, geom.foot_radius)
            if shrunk is not None:
                survivors.append(shrunk)
        if not survivors:
            # thin structures can be destroyed by simplification; the exact
            # rectangle cover is the safety net
            if exact_pieces is None:
                exact_pieces = _rect_decompose(comp)
            for piece in exact_pieces:
                shrunk = inset(piece, geom.foot_radius)
                if shrunk is not None:
                    survivors.append(shrunk)
        for shrunk in survivors:
            final.append(replace(shrunk, terrain_z_ref=_reference_height(shrunk, mask, window, centers)))
    if not final:
        return RegionSelection([], None)
    return RegionSelection(final, select_region_index(final, nominal_xy))


def _reference_height(region: ConvexRegion, mask: SafetyMask, window, centers: np.ndarray) -> float:
    if window is None:
        return 0.0
    inside = region.contains(centers, tol=1e-9)
    heights = np.asarray(window.heights).ravel()
    if inside.any():
        return float(heights[inside].mean())
    centroid = region.polygon.vertices.mean(axis=0)
    k = int(np.argmin(np.linalg.norm(centers - centroid, axis=1)))
    return float(heights[k])
