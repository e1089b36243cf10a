"""Gait scheduling, nominal foothold generation, and swing trajectory synthesis.

Leg indexing everywhere: 0=LF, 1=RF, 2=LH, 3=RH.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .terrain import TerrainGrid, sample_height

RAIBERT_GAIN = 0.03  # s, capture gain on velocity error


@dataclass(frozen=True)
class GaitSchedule:
    """Periodic gait: a leg is in stance while its wrapped phase is below duty_factor."""

    cycle_time: float = 0.70
    duty_factor: float = 0.5
    phase_offsets: tuple[float, float, float, float] = (0.0, 0.5, 0.5, 0.0)

    def __post_init__(self):
        if not 0 < self.duty_factor < 1:
            raise ValueError("duty_factor must be in (0, 1)")
        if self.cycle_time <= 0:
            raise ValueError("cycle_time must be positive")

    @property
    def stance_time(self) -> float:
        return self.cycle_time * self.duty_factor

    @property
    def swing_time(self) -> float:
        return self.cycle_time * (1 - self.duty_factor)


def trot(cycle_time: float = 0.70, duty_factor: float = 0.5) -> GaitSchedule:
    """Diagonal-pair trot preset: LF/RH in phase, RF/LH half a cycle later."""
    return GaitSchedule(cycle_time, duty_factor, (0.0, 0.5, 0.5, 0.0))


def leg_phases(gait: GaitSchedule, t: float) -> np.ndarray:
    """Wrapped phase in [0, 1) for each leg at time t."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return np.mod(t / gait.cycle_time + np.asarray(gait.phase_offsets), 1.0)


def contact_state(gait: GaitSchedule, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-leg stance flags and wrapped phases at time t."""
    phases = leg_phases(gait, t)
    return phases < gait.duty_factor, phases


def swing_phase(gait: GaitSchedule, phase: float) -> float:
    """Normalized swing progress s in [0, 1) for a leg with wrapped phase in swing."""
    return (phase - gait.duty_factor) / (1 - gait.duty_factor)


def time_to_touchdown(gait: GaitSchedule, phase: float) -> float:
    """Seconds until the next touchdown for a leg currently in swing."""
    return (1.0 - phase) * gait.cycle_time


def nominal_foothold(hip_world, v_base, v_des, gait: GaitSchedule, terrain: TerrainGrid,
                     k_v: float = RAIBERT_GAIN) -> np.ndarray:
    """Velocity-based touchdown target: hip projection + v*T_st/2 + k_v*(v - v_des).

    z is the terrain height at the computed xy.
    """
    hip = np.asarray(hip_world, dtype=float)
    v = np.asarray(v_base, dtype=float)[:2]
    vd = np.asarray(v_des, dtype=float)[:2]
    xy = hip[:2] + v * (gait.stance_time / 2.0) + k_v * (v - vd)
    return np.array([xy[0], xy[1], sample_height(terrain, xy)])


def swing_trajectory(start, end, apex: float, s) -> np.ndarray:
    """Point on the swing path at phase s in [0, 1].

    xy interpolates the chord linearly; z adds apex*sin(pi*s) of clearance
    above the chord. Broadcasts over end points and phases: end may be
    (..., 3) and s scalar or (...,).
    """
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(s < -1e-12) or np.any(s > 1 + 1e-12):
        raise ValueError("swing phase s must be in [0, 1]")
    chord = start + (end - start) * s[..., np.newaxis]
    lift = apex * np.sin(np.pi * s)
    out = chord.copy()
    out[..., 2] += lift
    return out


def predict_touchdown_hip(base_pos, base_vel, yaw: float, hip_offset, dt_touchdown: float) -> np.ndarray:
    """World hip position at touchdown assuming constant base velocity and yaw."""
    base_pos = np.asarray(base_pos, dtype=float)
    base_vel = np.asarray(base_vel, dtype=float)
    c, s = np.cos(yaw), np.sin(yaw)
    off = np.asarray(hip_offset, dtype=float)
    off_w = np.array([c * off[0] - s * off[1], s * off[0] + c * off[1], off[2]])
    return base_pos + off_w + base_vel * dt_touchdown
