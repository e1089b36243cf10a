"""Exact per-pixel foothold safety evaluation.

Four per-cell tests over a heightmap window: kinematic reachability of the
candidate point from the predicted hip, terrain roughness around the cell,
foot collision along the swing path into the cell, and leg-limb collision
over the full step cycle. The safe mask is their conjunction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .locomotion import swing_trajectory
from .terrain import WINDOW_SIZE, HeightmapWindow

# Fraction of the evaluated step cycle spent in swing (trot at duty 0.5);
# the remainder is stance at the candidate.
_SWING_FRACTION = 0.5

_DEFAULT_HIPS = np.array([
    [0.44, 0.24, 0.0],    # LF
    [0.44, -0.24, 0.0],   # RF
    [-0.44, 0.24, 0.0],   # LH
    [-0.44, -0.24, 0.0],  # RH
])

_kernels = None


def _jit_kernels():
    """Compiled collision kernels, or None when numba is unavailable."""
    global _kernels
    if _kernels is None:
        try:
            from . import _kernels as mod
        except Exception:
            mod = False
        _kernels = mod
    return _kernels or None


@dataclass(frozen=True)
class RobotGeometry:
    """Leg geometry and the thresholds behind the safety criteria."""

    hip_offsets: np.ndarray = field(default_factory=lambda: _DEFAULT_HIPS.copy())
    l_upper: float = 0.36
    l_lower: float = 0.38
    r_min: float = 0.30
    r_max: float = 0.70
    foot_radius: float = 0.02
    roughness_h: float = 0.04
    roughness_kmin: int = 2
    swing_apex: float = 0.12
    collision_margin: float = 0.01
    n_phase_samples: int = 10

    def __post_init__(self):
        hips = np.asarray(self.hip_offsets, dtype=float)
        if hips.shape != (4, 3):
            raise ValueError("hip_offsets must be (4, 3)")
        object.__setattr__(self, "hip_offsets", hips)
        if not 0 < self.r_min < self.r_max <= self.l_upper + self.l_lower:
            raise ValueError("need 0 < r_min < r_max <= l_upper + l_lower")
        if not 1 <= self.roughness_kmin <= 8:
            raise ValueError("roughness_kmin must be in [1, 8]")
        if self.n_phase_samples < 4:
            raise ValueError("n_phase_samples must be >= 4")


def default_geometry() -> RobotGeometry:
    return RobotGeometry()


@dataclass(frozen=True)
class FootQuery:
    """Robot state a foothold evaluation is conditioned on.

    stance_base_heights holds the predicted hip height at each of the
    n_phase_samples cycle samples (hip z offsets are zero by default, so
    base height and hip height coincide). hip_travel_xy is the predicted
    hip displacement over the stance phase; the hip is assumed to move at
    constant velocity across the cycle, reaching hip_touchdown exactly at
    the swing-to-stance transition.
    """

    leg_id: int
    hip_touchdown: np.ndarray
    foot_liftoff: np.ndarray
    stance_base_heights: np.ndarray
    hip_travel_xy: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        if not 0 <= self.leg_id <= 3:
            raise ValueError("leg_id must be 0..3")
        for name in ("hip_touchdown", "foot_liftoff", "stance_base_heights", "hip_travel_xy"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.hip_touchdown.shape != (3,) or self.foot_liftoff.shape != (3,):
            raise ValueError("hip_touchdown and foot_liftoff must be 3-vectors")
        if self.hip_travel_xy.shape != (2,):
            raise ValueError("hip_travel_xy must be a 2-vector")


@dataclass(frozen=True)
class SafetyMask:
    """Per-pixel safety with per-criterion diagnostic layers.

    Georeferenced like the window it was computed from so that downstream
    region extraction can emit world-frame polygons.
    """

    safe: np.ndarray
    kinematic: np.ndarray
    roughness: np.ndarray
    frontal: np.ndarray
    leg: np.ndarray
    center_xy: tuple[float, float] = (0.0, 0.0)
    resolution: float = 0.02
    eval_time_us: float = 0.0

    def __post_init__(self):
        for name in ("safe", "kinematic", "roughness", "frontal", "leg"):
            layer = np.asarray(getattr(self, name), dtype=bool)
            if layer.shape != (WINDOW_SIZE, WINDOW_SIZE):
                raise ValueError(f"{name} layer must be {WINDOW_SIZE}x{WINDOW_SIZE}")
            layer.setflags(write=False)
            object.__setattr__(self, name, layer)
        object.__setattr__(self, "center_xy", (float(self.center_xy[0]), float(self.center_xy[1])))

    @property
    def size(self) -> int:
        return WINDOW_SIZE

    def false_counts(self) -> dict[str, int]:
        return {
            "kinematic": int((~self.kinematic).sum()),
            "roughness": int((~self.roughness).sum()),
            "frontal": int((~self.frontal).sum()),
            "leg": int((~self.leg).sum()),
        }


def _candidate_points(window: HeightmapWindow) -> np.ndarray:
    """(W, W, 3) world positions of every candidate foothold."""
    x, y = window.cell_xy()
    return np.stack([x, y, window.heights], axis=-1)


def eval_kinematic(window: HeightmapWindow, query: FootQuery, geom: RobotGeometry) -> np.ndarray:
    """Cell is reachable iff its 3D distance from the touchdown hip is within [r_min, r_max]."""
    cand = _candidate_points(window)
    d = np.linalg.norm(cand - query.hip_touchdown, axis=-1)
    return (d >= geom.r_min) & (d <= geom.r_max)


def eval_roughness(window: HeightmapWindow, geom: RobotGeometry) -> np.ndarray:
    """Cell is discarded when >= k_min of its 8-neighbors differ by more than h_r.

    Border cells only count the neighbors that exist.
    """
    h = window.heights
    offenders = np.zeros(h.shape, dtype=int)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            src_i = slice(max(0, -di), h.shape[0] - max(0, di))
            src_j = slice(max(0, -dj), h.shape[1] - max(0, dj))
            dst_i = slice(max(0, di), h.shape[0] - max(0, -di))
            dst_j = slice(max(0, dj), h.shape[1] - max(0, -dj))
            diff = np.abs(h[src_i, src_j] - h[dst_i, dst_j])
            offenders[dst_i, dst_j] += diff > geom.roughness_h
    return offenders < geom.roughness_kmin


def _swing_samples(geom: RobotGeometry) -> np.ndarray:
    """Strictly interior swing phases; endpoints sit on the terrain and are excluded."""
    n = geom.n_phase_samples
    return (np.arange(n) + 1.0) / (n + 1.0)


def _clearance_ok(window: HeightmapWindow, points: np.ndarray, margin: float,
                  reduce_axes: tuple[int, ...]) -> np.ndarray:
    """True where all sample points stay above terrain + margin.

    Only points low enough to possibly hit the terrain are looked up;
    everything at or above the window's peak clears trivially.
    """
    z = points[..., 2]
    maybe = z < window.heights.max() + margin
    violation = np.zeros(z.shape, dtype=bool)
    if maybe.any():
        terr, _ = window.lookup_nearest(points[..., 0][maybe], points[..., 1][maybe])
        violation[maybe] = z[maybe] < terr + margin
    return ~violation.any(axis=reduce_axes)


def _segment_clearance(window: HeightmapWindow, a: np.ndarray, b: np.ndarray,
                       seg_t: np.ndarray, margin: float) -> np.ndarray:
    """Per segment: all sampled interior points clear terrain + margin.

    Segments whose sampled z-range sits above the window peak are skipped
    without any terrain lookup (z is linear in t, so the extremes bound it).
    """
    z_a, z_b = a[..., 2], b[..., 2]
    z_lo = np.minimum(z_a + (z_b - z_a) * seg_t[0], z_a + (z_b - z_a) * seg_t[-1])
    maybe = z_lo < window.heights.max() + margin
    safe = np.ones(maybe.shape, dtype=bool)
    if maybe.any():
        aa = np.broadcast_to(a, maybe.shape + (3,))[maybe]
        bb = np.broadcast_to(b, maybe.shape + (3,))[maybe]
        pts = aa[np.newaxis] + (bb - aa)[np.newaxis] * seg_t[:, np.newaxis, np.newaxis]
        terr, _ = window.lookup_nearest(pts[..., 0], pts[..., 1])
        safe[maybe] = ~(pts[..., 2] < terr + margin).any(axis=0)
    return safe


def eval_frontal_collision(window: HeightmapWindow, query: FootQuery, geom: RobotGeometry) -> np.ndarray:
    """Check the foot's swing path from liftoff into every candidate cell.

    A cell fails when the terrain at any path sample rises above the path
    height minus the foot radius. Terrain is only known inside the window;
    samples outside it are skipped.
    """
    kernels = _jit_kernels()
    if kernels is not None:
        out = np.empty((WINDOW_SIZE, WINDOW_SIZE), dtype=np.bool_)
        kernels.frontal_collision(
            window.heights, window.resolution, window.center_xy[0], window.center_xy[1],
            query.foot_liftoff, geom.swing_apex, geom.foot_radius,
            _swing_samples(geom), out)
        return out
    return _eval_frontal_numpy(window, query, geom)


def _eval_frontal_numpy(window: HeightmapWindow, query: FootQuery, geom: RobotGeometry) -> np.ndarray:
    """Reference numpy implementation of eval_frontal_collision."""
    cand = _candidate_points(window)
    s = _swing_samples(geom)[:, np.newaxis, np.newaxis]
    pos = swing_trajectory(query.foot_liftoff, cand, geom.swing_apex, s)
    return _clearance_ok(window, pos, geom.foot_radius, reduce_axes=(0,))


def _knee_positions(hip: np.ndarray, foot: np.ndarray, geom: RobotGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Knee-backward planar two-link IK, vectorized over leading dims.

    Returns (knee world positions, feasible mask). The IK plane is the
    vertical plane through hip and foot, with its horizontal axis oriented
    toward world +x so the knee stays on the backward side even when the
    foot passes behind the hip; a foot directly under the hip uses the
    world x-z plane.
    """
    d = foot - hip
    sq_xy = d[..., 0] ** 2 + d[..., 1] ** 2
    dxy = np.sqrt(sq_xy)
    r = np.sqrt(sq_xy + d[..., 2] ** 2)
    l1, l2 = geom.l_upper, geom.l_lower
    feasible = (r <= l1 + l2 - 1e-9) & (r >= abs(l1 - l2) + 1e-9)
    r_safe = np.where(r > 1e-9, r, 1.0)
    dxy_safe = np.where(dxy > 1e-9, dxy, 1.0)
    ux = np.where(dxy > 1e-9, d[..., 0] / dxy_safe, 1.0)
    uy = np.where(dxy > 1e-9, d[..., 1] / dxy_safe, 0.0)
    # Orient the in-plane horizontal axis toward +x (ties keep +y) so
    # "backward" is a consistent world direction.
    flip = (ux < 0) | ((ux == 0) & (uy < 0))
    sign = np.where(flip, -1.0, 1.0)
    ux = ux * sign
    uy = uy * sign
    a_f = dxy * sign  # foot's in-plane horizontal coordinate
    cos_q = np.clip((l1**2 + r_safe**2 - l2**2) / (2 * l1 * r_safe), -1.0, 1.0)
    sin_q = np.sqrt(np.maximum(0.0, 1.0 - cos_q**2))
    ra = a_f / r_safe
    rz = d[..., 2] / r_safe
    # Rotate the hip->foot direction by +/- q; keep the solution further back along a.
    a_plus = l1 * (cos_q * ra - sin_q * rz)
    z_plus = l1 * (cos_q * rz + sin_q * ra)
    a_minus = l1 * (cos_q * ra + sin_q * rz)
    z_minus = l1 * (cos_q * rz - sin_q * ra)
    backward = a_plus <= a_minus
    ka = np.where(backward, a_plus, a_minus)
    kz = np.where(backward, z_plus, z_minus)
    knee = np.stack([hip[..., 0] + ka * ux, hip[..., 1] + ka * uy, hip[..., 2] + kz], axis=-1)
    return knee, feasible


def eval_leg_collision(window: HeightmapWindow, query: FootQuery, geom: RobotGeometry) -> np.ndarray:
    """Check both leg limbs against the terrain over the whole step cycle.

    The cycle runs swing (foot on the path from liftoff to the candidate)
    then stance (foot at the candidate); the hip translates at constant
    velocity, reaching hip_touchdown at the transition, with heights taken
    from stance_base_heights. A cell fails when any of 5 interior sample
    points on either limb drops below terrain + collision_margin, or when
    the candidate is out of IK reach at any phase sample.
    """
    n = geom.n_phase_samples
    heights = np.asarray(query.stance_base_heights, dtype=float)
    if heights.shape != (n,):
        raise ValueError(f"stance_base_heights must have {n} entries")
    hips = _hip_path(query, geom, heights)
    seg_t = (np.arange(5) + 1.0) / 6.0  # interior points only; the foot end touches terrain
    cycle = (np.arange(n) + 0.5) / n
    kernels = _jit_kernels()
    if kernels is not None:
        out = np.empty((WINDOW_SIZE, WINDOW_SIZE), dtype=np.bool_)
        kernels.leg_collision(
            window.heights, window.resolution, window.center_xy[0], window.center_xy[1],
            query.foot_liftoff, geom.swing_apex, hips, geom.l_upper, geom.l_lower,
            geom.collision_margin, _SWING_FRACTION, cycle, seg_t, out)
        return out
    return _eval_leg_numpy(window, query, geom, hips, cycle, seg_t)


def _hip_path(query: FootQuery, geom: RobotGeometry, heights: np.ndarray) -> np.ndarray:
    """Hip position at every cycle sample: constant-velocity xy translation
    reaching hip_touchdown exactly at the swing-to-stance transition."""
    n = geom.n_phase_samples
    cycle = (np.arange(n) + 0.5) / n
    frac = (cycle - _SWING_FRACTION) / (1 - _SWING_FRACTION)
    hips = np.empty((n, 3))
    hips[:, 0] = query.hip_touchdown[0] + query.hip_travel_xy[0] * frac
    hips[:, 1] = query.hip_touchdown[1] + query.hip_travel_xy[1] * frac
    hips[:, 2] = heights + geom.hip_offsets[query.leg_id, 2]
    return hips


def _eval_leg_numpy(window: HeightmapWindow, query: FootQuery, geom: RobotGeometry,
                    hips: np.ndarray, cycle: np.ndarray, seg_t: np.ndarray) -> np.ndarray:
    """Reference numpy implementation of eval_leg_collision."""
    cand = _candidate_points(window)
    hip = hips[:, np.newaxis, np.newaxis, :]

    # swing path hits the candidate exactly at s=1, so clamping the phase
    # also yields the stance-foot position for the stance samples
    s = np.clip(cycle / _SWING_FRACTION, 0.0, 1.0)[:, np.newaxis, np.newaxis]
    foot = swing_trajectory(query.foot_liftoff, cand, geom.swing_apex, s)

    knee, feasible = _knee_positions(hip, foot, geom)
    # out-of-reach only condemns the candidate itself (stance samples);
    # stretched transient swing poses carry no information and are skipped
    in_stance = (cycle >= _SWING_FRACTION)[:, np.newaxis, np.newaxis]
    safe = (feasible | ~in_stance).all(axis=0)

    clear_hk = _segment_clearance(window, np.broadcast_to(hip, knee.shape), knee,
                                  seg_t, geom.collision_margin)
    clear_kf = _segment_clearance(window, knee, foot, seg_t, geom.collision_margin)
    safe &= (clear_hk | ~feasible).all(axis=0)
    safe &= (clear_kf | ~feasible).all(axis=0)
    return safe


def evaluate(window: HeightmapWindow, query: FootQuery, geom: RobotGeometry) -> SafetyMask:
    """Run all four criteria and return their conjunction with timing."""
    t0 = time.perf_counter()
    kin = eval_kinematic(window, query, geom)
    rough = eval_roughness(window, geom)
    frontal = eval_frontal_collision(window, query, geom)
    leg = eval_leg_collision(window, query, geom)
    elapsed_us = (time.perf_counter() - t0) * 1e6
    return SafetyMask(
        safe=kin & rough & frontal & leg,
        kinematic=kin,
        roughness=rough,
        frontal=frontal,
        leg=leg,
        center_xy=window.center_xy,
        resolution=window.resolution,
        eval_time_us=elapsed_us,
    )
