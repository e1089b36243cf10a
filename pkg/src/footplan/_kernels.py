"""Numba-compiled inner loops for the collision criteria.

Same arithmetic as the numpy reference paths in criteria.py, restructured
as per-cell scalar loops with early exit. Importing this module is
optional; criteria.py falls back to the numpy implementations when numba
is unavailable.
"""

from __future__ import annotations

import numpy as np
from numba import njit

HALF = 16  # WINDOW_SIZE // 2


@njit(cache=True)
def _nearest(heights, res, cx, cy, px, py):
    """Nearest-cell height at world (px, py); -inf outside the window."""
    j = int(np.rint((px - cx) / res)) + HALF
    i = int(np.rint((py - cy) / res)) + HALF
    if i < 0 or i >= 32 or j < 0 or j >= 32:
        return -np.inf
    return heights[i, j]


@njit(cache=True)
def frontal_collision(heights, res, cx, cy, lift, apex, foot_radius, phases, out):
    h_max = heights.max()
    for i in range(32):
        cy_i = cy + (i - HALF) * res
        for j in range(32):
            cx_j = cx + (j - HALF) * res
            cz = heights[i, j]
            ok = True
            for k in range(phases.size):
                s = phases[k]
                pz = lift[2] + (cz - lift[2]) * s + apex * np.sin(np.pi * s)
                if pz - foot_radius >= h_max:
                    continue  # above everything in the window
                px = lift[0] + (cx_j - lift[0]) * s
                py = lift[1] + (cy_i - lift[1]) * s
                terr = _nearest(heights, res, cx, cy, px, py)
                if terr > pz - foot_radius:
                    ok = False
                    break
            out[i, j] = ok


@njit(cache=True)
def leg_collision(heights, res, cx, cy, lift, apex, hips, l1, l2, margin,
                  swing_frac, cycle, seg_t, out):
    n = cycle.size
    h_max = heights.max()
    for i in range(32):
        cy_i = cy + (i - HALF) * res
        for j in range(32):
            cx_j = cx + (j - HALF) * res
            cz = heights[i, j]
            ok = True
            for k in range(n):
                # foot position: swing path, clamped phase gives stance pose
                in_stance = cycle[k] >= swing_frac
                s = cycle[k] / swing_frac
                if s > 1.0:
                    s = 1.0
                fx = lift[0] + (cx_j - lift[0]) * s
                fy = lift[1] + (cy_i - lift[1]) * s
                fz = lift[2] + (cz - lift[2]) * s + apex * np.sin(np.pi * s)
                hx, hy, hz = hips[k, 0], hips[k, 1], hips[k, 2]
                dx, dy, dz = fx - hx, fy - hy, fz - hz
                sq_xy = dx * dx + dy * dy
                dxy = np.sqrt(sq_xy)
                r = np.sqrt(sq_xy + dz * dz)
                if r > l1 + l2 - 1e-9 or r < abs(l1 - l2) + 1e-9:
                    # out-of-reach only condemns the candidate itself; a
                    # stretched transient swing pose carries no information
                    if in_stance:
                        ok = False
                        break
                    continue
                r_safe = r if r > 1e-9 else 1.0
                if dxy > 1e-9:
                    ux = dx / dxy
                    uy = dy / dxy
                else:
                    ux = 1.0
                    uy = 0.0
                if ux < 0 or (ux == 0 and uy < 0):
                    ux = -ux
                    uy = -uy
                    a_f = -dxy
                else:
                    a_f = dxy
                cos_q = (l1 * l1 + r_safe * r_safe - l2 * l2) / (2 * l1 * r_safe)
                if cos_q > 1.0:
                    cos_q = 1.0
                elif cos_q < -1.0:
                    cos_q = -1.0
                sin_q = np.sqrt(max(0.0, 1.0 - cos_q * cos_q))
                ra = a_f / r_safe
                rz = dz / r_safe
                a_plus = l1 * (cos_q * ra - sin_q * rz)
                z_plus = l1 * (cos_q * rz + sin_q * ra)
                a_minus = l1 * (cos_q * ra + sin_q * rz)
                z_minus = l1 * (cos_q * rz - sin_q * ra)
                if a_plus <= a_minus:
                    ka, kz = a_plus, z_plus
                else:
                    ka, kz = a_minus, z_minus
                kx = hx + ka * ux
                ky = hy + ka * uy
                kzz = hz + kz
                t_lo, t_hi = seg_t[0], seg_t[seg_t.size - 1]
                # sampled z extremes of each limb; skip limbs above the window peak
                z1a = hz + (kzz - hz) * t_lo
                z1b = hz + (kzz - hz) * t_hi
                check_upper = min(z1a, z1b) < h_max + margin
                z2a = kzz + (fz - kzz) * t_lo
                z2b = kzz + (fz - kzz) * t_hi
                check_lower = min(z2a, z2b) < h_max + margin
                if check_upper or check_lower:
                    for t_idx in range(seg_t.size):
                        t = seg_t[t_idx]
                        if check_upper:
                            px = hx + (kx - hx) * t
                            py = hy + (ky - hy) * t
                            pz = hz + (kzz - hz) * t
                            if pz < _nearest(heights, res, cx, cy, px, py) + margin:
                                ok = False
                                break
                        if check_lower:
                            px = kx + (fx - kx) * t
                            py = ky + (fy - ky) * t
                            pz = kzz + (fz - kzz) * t
                            if pz < _nearest(heights, res, cx, cy, px, py) + margin:
                                ok = False
                                break
                if not ok:
                    break
            out[i, j] = ok
