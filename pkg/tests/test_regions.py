import numpy as np
import pytest

from footplan import criteria as crit
from footplan import regions as reg

GEOM = crit.default_geometry()
RES = 0.02


def make_mask(safe, center=(0.0, 0.0)):
    safe = np.asarray(safe, dtype=bool)
    return crit.SafetyMask(safe=safe, kinematic=safe, roughness=safe,
                           frontal=safe, leg=safe, center_xy=center, resolution=RES)


def blob_mask(seed, density=0.5):
    """Smoothed-noise blobby masks: the realistic shape for this pipeline."""
    rng = np.random.default_rng(seed)
    noise = rng.random((32, 32))
    from scipy import ndimage
    smooth = ndimage.uniform_filter(noise, size=5)
    return make_mask(smooth > np.quantile(smooth, 1 - density))


def assert_region_valid(region):
    v = region.polygon.vertices
    n = len(v)
    # convexity with tolerance
    for k in range(n):
        assert reg._cross(v[k - 1], v[k], v[(k + 1) % n]) >= -1e-9
    # halfspace consistency: all vertices inside, every halfspace tight somewhere
    prod = v @ region.normals.T - region.offsets
    assert prod.max() <= 1e-9
    assert np.all(prod.max(axis=0) >= -1e-9)
    assert region.polygon.is_simple()


class TestConnectedComponents:
    def test_all_true_single_component(self):
        comps = reg.connected_components(make_mask(np.ones((32, 32))))
        assert len(comps) == 1 and comps[0].cells.shape[0] == 1024

    def test_two_blobs(self):
        safe = np.zeros((32, 32))
        safe[2:5, 2:5] = 1
        safe[20:23, 20:23] = 1
        comps = reg.connected_components(make_mask(safe))
        assert sorted(c.cells.shape[0] for c in comps) == [9, 9]

    def test_checkerboard_all_singletons(self):
        safe = np.indices((32, 32)).sum(axis=0) % 2 == 0
        comps = reg.connected_components(make_mask(safe))
        assert len(comps) == int(safe.sum())
        assert all(c.cells.shape[0] == 1 for c in comps)

    def test_empty_mask(self):
        assert reg.connected_components(make_mask(np.zeros((32, 32)))) == []


class TestTraceContour:
    def test_single_cell_square(self):
        mask = make_mask(np.eye(32)[:, ::-1] * 0)  # placeholder, build directly
        safe = np.zeros((32, 32))
        safe[10, 12] = 1
        comps = reg.connected_components(make_mask(safe))
        poly = reg.trace_contour(comps[0])
        assert len(poly.vertices) == 4
        assert poly.area == pytest.approx(RES * RES)

    def test_2x3_block(self):
        safe = np.zeros((32, 32))
        safe[10:12, 12:15] = 1
        comps = reg.connected_components(make_mask(safe))
        poly = reg.trace_contour(comps[0])
        assert len(poly.vertices) == 4
        assert poly.area == pytest.approx(2 * 3 * RES * RES)

    def test_l_shape_six_vertices(self):
        safe = np.zeros((32, 32))
        safe[5:15, 5:8] = 1
        safe[5:8, 5:15] = 1
        comps = reg.connected_components(make_mask(safe))
        poly = reg.trace_contour(comps[0])
        assert len(poly.vertices) == 6
        assert poly.area == pytest.approx((10 * 3 + 3 * 7) * RES * RES)
        assert poly.is_simple()

    def test_area_equals_cell_area(self):
        for seed in range(5):
            mask = blob_mask(seed)
            cleaned = reg._break_pinches(mask.safe.copy())
            for comp in reg.connected_components(make_mask(cleaned)):
                poly = reg.trace_contour(comp)
                # contour bounds cells exactly (holes excluded, so >=)
                assert poly.area >= comp.area - 1e-9


class TestSimplify:
    def test_tol_zero_identity(self):
        poly = reg.Polygon(np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]]))
        assert reg.simplify(poly, 0.0) is poly

    def test_collinear_midpoints_removed(self):
        poly = reg.Polygon(np.array([[0, 0], [0.5, 0], [1, 0], [1, 1], [0, 1.0]]))
        out = reg.simplify(poly, 1e-6)
        assert len(out.vertices) == 4

    def test_staircase_teeth_removed_within_hausdorff(self):
        # 0.02 m staircase teeth, tol 0.03 removes them
        pts = []
        for k in range(8):
            pts.append([k * 0.02, 0.02 * (k % 2)])
        pts += [[0.16, 0.3], [0.0, 0.3]]
        poly = reg.Polygon(np.array(pts))
        out = reg.simplify(poly, 0.03)
        assert len(out.vertices) < len(poly.vertices)
        # sampled Hausdorff: original vertices stay within tol of the output
        for p in poly.vertices:
            d = min(reg._point_segment_distance(
                p, out.vertices[i], out.vertices[(i + 1) % len(out.vertices)])
                for i in range(len(out.vertices)))
            assert d <= 0.03 + 1e-9

    def test_degenerate_raises(self):
        poly = reg.Polygon(np.array([[0, 0], [1, 0], [1, 0.001], [0, 0.001]]))
        with pytest.raises(reg.RegionError):
            reg.simplify(poly, 0.5)


class TestConvexDecompose:
    def test_convex_pentagon_single_piece(self):
        angles = np.linspace(0, 2 * np.pi, 6)[:-1]
        poly = reg.Polygon(np.stack([np.cos(angles), np.sin(angles)], axis=1))
        pieces = reg.convex_decompose(poly)
        assert len(pieces) == 1
        assert pieces[0].area == pytest.approx(poly.area)

    def test_l_shape_two_pieces(self):
        poly = reg.Polygon(np.array([
            [0, 0], [0.3, 0], [0.3, 0.1], [0.1, 0.1], [0.1, 0.3], [0, 0.3]]))
        pieces = reg.convex_decompose(poly)
        assert sum(p.area for p in pieces) == pytest.approx(poly.area, rel=1e-9)
        for p in pieces:
            assert_region_valid(p)
        assert len(pieces) == 2

    def test_u_shape(self):
        poly = reg.Polygon(np.array([
            [0, 0], [0.5, 0], [0.5, 0.3], [0.4, 0.3], [0.4, 0.1],
            [0.1, 0.1], [0.1, 0.3], [0, 0.3]]))
        pieces = reg.convex_decompose(poly)
        assert sum(p.area for p in pieces) == pytest.approx(poly.area, rel=1e-9)
        for p in pieces:
            assert_region_valid(p)

    def test_random_rectilinear_conservation(self):
        for seed in range(8):
            mask = blob_mask(seed, density=0.45)
            cleaned = reg._break_pinches(mask.safe.copy())
            comps = reg.connected_components(make_mask(cleaned))
            if not comps:
                continue
            comp = max(comps, key=lambda c: c.cells.shape[0])
            poly = reg.trace_contour(comp)
            pieces = reg.convex_decompose(poly)
            assert sum(p.area for p in pieces) == pytest.approx(poly.area, rel=1e-9)
            for p in pieces:
                assert_region_valid(p)


class TestInset:
    def test_zero_margin_identity(self):
        square = reg._make_region(np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]]))
        assert reg.inset(square, 0.0) is square

    def test_unit_square_inset(self):
        square = reg._make_region(np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]]))
        out = reg.inset(square, 0.1)
        assert out.area == pytest.approx(0.64)
        assert np.allclose(sorted(out.polygon.vertices[:, 0]), [0.1, 0.1, 0.9, 0.9])

    def test_sliver_vanishes(self):
        sliver = reg._make_region(np.array([[0, 0], [0.03, 0], [0.03, 0.5], [0, 0.5]]))
        assert reg.inset(sliver, 0.02) is None


class TestSelectRegion:
    def r(self, verts, z=0.0):
        return reg._make_region(np.asarray(verts, dtype=float), z)

    def test_inside_distance_zero(self):
        a = self.r([[0, 0], [1, 0], [1, 1], [0, 1]])
        assert reg.select_region([a], (0.5, 0.5)) is a
        assert a.distance((0.5, 0.5)) == 0.0

    def test_nearer_region_wins(self):
        a = self.r([[0.05, 0], [0.15, 0], [0.15, 0.1], [0.05, 0.1]])
        b = self.r([[0.12, 0.3], [0.3, 0.3], [0.3, 0.5], [0.12, 0.5]])
        pick = reg.select_region([b, a], (0.0, 0.0))
        assert pick is a

    def test_tie_breaks_on_area_then_index(self):
        a = self.r([[0.05, -0.05], [0.15, -0.05], [0.15, 0.05], [0.05, 0.05]])
        big = self.r([[-0.25, -0.1], [-0.05, -0.1], [-0.05, 0.1], [-0.25, 0.1]])
        # both at distance 0.05 from the origin; big has 4x the area
        assert reg.select_region([a, big], (0.0, 0.0)) is big
        same = self.r([[0.05, -0.05], [0.15, -0.05], [0.15, 0.05], [0.05, 0.05]])
        assert reg.select_region([a, same], (0.0, 0.0)) is a  # lower index

    def test_distance_matches_brute_force(self):
        rng = np.random.default_rng(11)
        tri = self.r([[0, 0], [0.4, 0.1], [0.1, 0.5]])
        for _ in range(50):
            p = rng.uniform(-0.5, 0.8, 2)
            d = tri.distance(p)
            # brute force: dense boundary sampling
            v = tri.polygon.vertices
            best = np.inf
            for k in range(len(v)):
                seg = np.linspace(v[k], v[(k + 1) % len(v)], 200)
                best = min(best, np.linalg.norm(seg - p, axis=1).min())
            if tri.contains(p):
                assert d == 0.0
            else:
                assert d == pytest.approx(best, abs=1e-4)

    def test_empty_list_raises(self):
        with pytest.raises(reg.RegionError):
            reg.select_region([], (0, 0))


class TestDecomposeAndSelect:
    def test_all_true_nominal_inside(self):
        mask = make_mask(np.ones((32, 32)))
        sel = reg.decompose_and_select(mask, (0.0, 0.0), GEOM)
        assert not sel.no_region
        assert sel.selected.distance((0.0, 0.0)) == 0.0

    def test_all_false_no_region(self):
        sel = reg.decompose_and_select(make_mask(np.zeros((32, 32))), (0, 0), GEOM)
        assert sel.no_region and sel.selected is None

    def test_stairs_region_on_one_tread(self):
        from footplan.terrain import GridSpec, extract_window, generate_stairs
        grid = generate_stairs(0.10, 0.30, 4, GridSpec())
        w = extract_window(grid, (2.0, 0.0))
        hz = float(w.heights[16, 16]) + 0.60
        q = crit.FootQuery(leg_id=0, hip_touchdown=[2.0, 0.0, hz],
                           foot_liftoff=[1.8, 0.0, float(w.heights[16, 6])],
                           stance_base_heights=np.full(10, hz))
        mask = crit.evaluate(w, q, GEOM)
        sel = reg.decompose_and_select(mask, (2.0, 0.0), GEOM, window=w)
        assert not sel.no_region
        x, _ = w.cell_xy()
        centers = reg._cell_centers(mask)
        inside = sel.selected.contains(centers)
        tread_heights = np.asarray(w.heights).ravel()[inside]
        assert np.ptp(tread_heights) < 1e-9  # single tread: one height

    def test_soundness_random_masks(self):
        for seed in range(40):
            mask = blob_mask(seed, density=0.55)
            sel = reg.decompose_and_select(mask, (0.0, 0.0), GEOM)
            centers = reg._cell_centers(mask)
            for region in sel.regions:
                assert_region_valid(region)
                inside = region.contains(centers, tol=1e-9)
                assert mask.safe.ravel()[inside].all()

    def test_selection_matches_brute_force(self):
        rng = np.random.default_rng(21)
        for seed in range(10):
            mask = blob_mask(seed + 100, density=0.5)
            nominal = rng.uniform(-0.2, 0.2, 2)
            sel = reg.decompose_and_select(mask, nominal, GEOM)
            if sel.no_region:
                continue
            dists = [r.distance(nominal) for r in sel.regions]
            assert sel.selected_index in [
                i for i, d in enumerate(dists) if d <= min(dists) + 1e-9]

    def test_pipeline_deterministic(self):
        mask = blob_mask(3)
        a = reg.decompose_and_select(mask, (0.05, -0.03), GEOM)
        b = reg.decompose_and_select(mask, (0.05, -0.03), GEOM)
        assert a.selected_index == b.selected_index
        assert len(a.regions) == len(b.regions)
        for ra, rb in zip(a.regions, b.regions):
            assert np.array_equal(ra.polygon.vertices, rb.polygon.vertices)

    def test_terrain_z_ref_is_mean_height(self):
        from footplan.terrain import HeightmapWindow
        heights = np.full((32, 32), 0.25)
        w = HeightmapWindow((0, 0), RES, heights)
        mask = make_mask(np.ones((32, 32)))
        sel = reg.decompose_and_select(mask, (0, 0), GEOM, window=w)
        assert sel.selected.terrain_z_ref == pytest.approx(0.25)
