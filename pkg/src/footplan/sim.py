"""Closed-loop desk-scale simulation of trot locomotion with foothold planning.

The plant is the same single-rigid-body family the controller assumes
(with full nonlinear rotation), so experiments isolate the effect of the
foothold choice rather than model mismatch. Stance feet are world-fixed;
swing feet follow the commanded swing paths kinematically and are placed
exactly at their commanded foothold at the scheduled touchdown.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import criteria as crit
from . import locomotion as loco
from . import regions as reg
from .mpc import (GRAVITY, FootholdTarget, LegPlan, MpcController, MpcError,
                  MpcParams, SrbdState, build_reference, rot_z, wrap_angles)
from .terrain import (GridSpec, TerrainGrid, extract_window, generate_flat,
                      generate_rough, generate_stairs, sample_height)

FALL_ANGLE = 0.6  # rad, |roll| or |pitch| beyond this terminates the run
MIN_REGION_AREA = 0.008  # m^2; smaller safe fragments are not worth optimizing into


@dataclass
class DisturbancePulse:
    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    start: float = 3.0
    duration: float = 0.2

    def __post_init__(self):
        self.force = np.asarray(self.force, dtype=float)

    def active(self, t: float) -> bool:
        return self.start <= t < self.start + self.duration


@dataclass
class SimConfig:
    terrain_kind: str = "flat"  # flat | stairs | rough
    terrain_params: dict = field(default_factory=dict)
    grid: GridSpec = field(default_factory=GridSpec)
    gait: loco.GaitSchedule = field(default_factory=loco.trot)
    mode: str = "convex_region"  # convex_region | heuristic
    duration: float = 5.0
    control_rate: float = 150.0
    physics_dt: float = 0.001
    disturbance: DisturbancePulse | None = None
    mpc: MpcParams = field(default_factory=MpcParams)
    geometry: crit.RobotGeometry = field(default_factory=crit.RobotGeometry)
    v_des: np.ndarray = field(default_factory=lambda: np.array([0.3, 0.0]))
    ramp_time: float = 0.8
    base_height: float = 0.55
    track_centerline: bool = False  # pull the y reference back to the path line
    centerline_y: float = 0.0
    start_xy: np.ndarray = field(default_factory=lambda: np.zeros(2))
    seed: int = 0
    perception: str = "exact"  # exact | surrogate
    weights_path: str | None = None

    def __post_init__(self):
        self.v_des = np.asarray(self.v_des, dtype=float)
        self.start_xy = np.asarray(self.start_xy, dtype=float)
        if self.mode not in ("convex_region", "heuristic"):
            raise ValueError("mode must be convex_region or heuristic")
        if self.perception not in ("exact", "surrogate"):
            raise ValueError("perception must be exact or surrogate")
        if self.physics_dt > 1.0 / self.control_rate:
            raise ValueError("physics_dt must not exceed the control period")
        if self.duration <= 0:
            raise ValueError("duration must be positive")

    def build_terrain(self) -> TerrainGrid:
        p = self.terrain_params
        if self.terrain_kind == "flat":
            terrain = generate_flat(self.grid)
        elif self.terrain_kind == "stairs":
            terrain = generate_stairs(
                p.get("step_rise", 0.08), p.get("step_run", 0.30),
                p.get("n_steps", 4), self.grid,
                stairs_start_x=p.get("start_x"))
        elif self.terrain_kind == "rough":
            terrain = generate_rough(
                p.get("amplitude", 0.06), p.get("correlation_len", 0.3),
                p.get("seed", self.seed), self.grid)
        else:
            raise ValueError(f"unknown terrain kind {self.terrain_kind}")
        # optional walkway: the surface drops off beyond |y| > halfwidth
        halfwidth = p.get("walkway_halfwidth")
        if halfwidth is not None:
            heights = terrain.heights.copy()
            y = terrain.origin_xy[1] + np.arange(terrain.n_rows) * terrain.resolution
            drop = p.get("dropoff", 0.8)
            heights[np.abs(y) > halfwidth, :] = heights.min() - drop
            terrain = TerrainGrid(terrain.origin_xy, terrain.resolution, heights)
        return terrain


@dataclass
class FootholdEvent:
    t: float
    leg: int
    kind: str  # touchdown | liftoff
    position: np.ndarray
    constraint_violation: float | None = None  # convex mode, halfspace residual
    safe_cell: bool | None = None  # heuristic mode, landed on a safe cell
    fallback: bool = False


@dataclass
class TickRecord:
    t: float
    solve_us: float
    criteria_us: float
    decompose_us: float
    region_count: int
    status: str
    iterations: int


@dataclass
class SimLog:
    mode: str
    time: np.ndarray
    roll: np.ndarray
    pitch: np.ndarray
    yaw: np.ndarray
    com: np.ndarray  # (n, 3)
    contacts: np.ndarray  # (n, 4)
    events: list[FootholdEvent]
    ticks: list[TickRecord]
    fall: bool
    fall_time: float | None

    def summary(self) -> dict:
        tick_solve = [tk.solve_us for tk in self.ticks]
        tick_crit = [tk.criteria_us for tk in self.ticks]
        tick_dec = [tk.decompose_us for tk in self.ticks]
        return {
            "mode": self.mode,
            "fall": self.fall,
            "fall_time": self.fall_time,
            "peak_roll": float(np.abs(self.roll).max()),
            "peak_pitch": float(np.abs(self.pitch).max()),
            "final_x": float(self.com[-1, 0]),
            "mean_solve_us": float(np.mean(tick_solve)) if tick_solve else 0.0,
            "mean_criteria_us": float(np.mean(tick_crit)) if tick_crit else 0.0,
            "mean_decompose_us": float(np.mean(tick_dec)) if tick_dec else 0.0,
            "n_ticks": len(self.ticks),
            "n_touchdowns": sum(1 for e in self.events if e.kind == "touchdown"),
        }

    def to_csv(self, path) -> None:
        header = "t,roll,pitch,yaw,px,py,pz,c0,c1,c2,c3"
        data = np.column_stack([
            self.time, self.roll, self.pitch, self.yaw,
            self.com, self.contacts.astype(int),
        ])
        np.savetxt(path, data, delimiter=",", header=header, comments="")


@dataclass
class _Plant:
    p: np.ndarray
    v: np.ndarray
    rot: np.ndarray  # body-to-world
    omega: np.ndarray  # body frame

    def state(self) -> SrbdState:
        return SrbdState(p=self.p, v=self.v, theta=_rot_to_rpy(self.rot), omega=self.omega)


def _rot_to_rpy(rot: np.ndarray) -> np.ndarray:
    roll = np.arctan2(rot[2, 1], rot[2, 2])
    pitch = -np.arcsin(np.clip(rot[2, 0], -1.0, 1.0))
    yaw = np.arctan2(rot[1, 0], rot[0, 0])
    return np.array([roll, pitch, yaw])


def _rodrigues(axis_angle: np.ndarray) -> np.ndarray:
    angle = np.linalg.norm(axis_angle)
    if angle < 1e-12:
        return np.eye(3)
    k = axis_angle / angle
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * kx + (1 - np.cos(angle)) * (kx @ kx)


def step_physics(plant: _Plant, feet: np.ndarray, forces: np.ndarray,
                 stance: np.ndarray, external_force: np.ndarray, dt: float,
                 params: MpcParams) -> _Plant:
    """Semi-implicit Euler on the full nonlinear SRBD (Newton + Euler equations).

    Stance feet act as world-fixed force application points; the external
    force acts at the CoM (no torque).
    """
    total_f = external_force + np.array([0.0, 0.0, -GRAVITY * params.mass])
    torque_w = np.zeros(3)
    for leg in range(4):
        if stance[leg]:
            total_f = total_f + forces[leg]
            torque_w += np.cross(feet[leg] - plant.p, forces[leg])
    v_new = plant.v + dt * total_f / params.mass
    p_new = plant.p + dt * v_new
    torque_b = plant.rot.T @ torque_w
    inertia = params.inertia_body
    omega_dot = np.linalg.solve(inertia, torque_b - np.cross(plant.omega, inertia @ plant.omega))
    omega_new = plant.omega + dt * omega_dot
    rot_new = plant.rot @ _rodrigues(omega_new * dt)
    return _Plant(p_new, v_new, rot_new, omega_new)


def _clamped_height(terrain: TerrainGrid, xy) -> float:
    x_min, x_max, y_min, y_max = terrain.extent()
    x = float(np.clip(xy[0], x_min, x_max))
    y = float(np.clip(xy[1], y_min, y_max))
    return sample_height(terrain, (x, y))


def _nearest_safe_cell(mask: crit.SafetyMask, window, nominal_xy) -> np.ndarray | None:
    if not mask.safe.any():
        return None
    x, y = window.cell_xy()
    d2 = (x - nominal_xy[0]) ** 2 + (y - nominal_xy[1]) ** 2
    d2 = np.where(mask.safe, d2, np.inf)
    i, j = np.unravel_index(int(np.argmin(d2)), d2.shape)
    return np.array([x[i, j], y[i, j], window.heights[i, j]])


def _region_reachable(region: reg.ConvexRegion, nominal_xy, box: float) -> bool:
    """True when the region intersects the MPC's box around the nominal."""
    verts = region.polygon.vertices
    for normal, offset in (
        ((1.0, 0.0), nominal_xy[0] + box),
        ((-1.0, 0.0), -(nominal_xy[0] - box)),
        ((0.0, 1.0), nominal_xy[1] + box),
        ((0.0, -1.0), -(nominal_xy[1] - box)),
    ):
        verts = reg._clip_halfspace(verts, np.asarray(normal), offset)
        if len(verts) < 3:
            return False
    return True


class _Perception:
    """Per-tick foothold pipeline: window -> mask -> target for one leg."""

    def __init__(self, config: SimConfig, terrain: TerrainGrid):
        self.config = config
        self.terrain = terrain
        self.geom = config.geometry
        self._net = None
        if config.perception == "surrogate":
            from . import safenet
            if config.weights_path is None:
                raise ValueError("surrogate perception needs weights_path")
            self._net = safenet.load_weights(config.weights_path)

    def mask_for(self, window, query) -> crit.SafetyMask:
        if self._net is None:
            return crit.evaluate(window, query, self.geom)
        from . import safenet
        return safenet.predict_mask(self._net, window)

    def _hip_height_profile(self, hip_td: np.ndarray, hip_travel: np.ndarray) -> np.ndarray:
        """Predicted hip heights over the step cycle: the base keeps its
        current clearance while following the terrain under the hip."""
        n = self.geom.n_phase_samples
        cycle = (np.arange(n) + 0.5) / n
        frac = (cycle - 0.5) / 0.5
        clearance = hip_td[2] - _clamped_height(self.terrain, hip_td[:2])
        heights = np.empty(n)
        for k in range(n):
            xy = hip_td[:2] + hip_travel * frac[k]
            heights[k] = _clamped_height(self.terrain, xy) + clearance
        return heights

    def plan_leg(self, leg: int, hip_td: np.ndarray, liftoff: np.ndarray,
                 hip_travel: np.ndarray, nominal: np.ndarray, previous: np.ndarray,
                 anchor_xy: np.ndarray | None = None):
        """Returns (FootholdTarget, criteria_us, decompose_us, region_count, fallback).

        anchor_xy, when given, is the previous solve's foothold for this
        swing; linearizing there keeps the torque model consistent across
        ticks. When no safe cell exists at all, adaptation stops: the
        previous commanded foothold is kept rather than stepping at a
        blind nominal.
        """
        geom = self.geom
        try:
            window = extract_window(self.terrain, nominal[:2])
        except Exception:
            return (FootholdTarget("fixed", previous), 0.0, 0.0, 0, True)
        query = crit.FootQuery(
            leg_id=leg, hip_touchdown=hip_td, foot_liftoff=liftoff,
            stance_base_heights=self._hip_height_profile(hip_td, hip_travel),
            hip_travel_xy=hip_travel,
        )
        mask = self.mask_for(window, query)
        criteria_us = mask.eval_time_us
        if self.config.mode == "heuristic":
            cell = _nearest_safe_cell(mask, window, nominal[:2])
            if cell is None:
                return (FootholdTarget("fixed", previous), criteria_us, 0.0, 0, True)
            return (FootholdTarget("fixed", cell), criteria_us, 0.0, 0, False)
        t0 = time.perf_counter()
        selection = reg.decompose_and_select(mask, nominal[:2], geom, window=window)
        decompose_us = (time.perf_counter() - t0) * 1e6
        # slivers and unreachable fragments make poor optimization targets
        usable = [r for r in selection.regions
                  if r.area >= MIN_REGION_AREA
                  and _region_reachable(r, nominal[:2], self.config.mpc.foothold_box)]
        region = None
        if usable:
            region = usable[reg.select_region_index(usable, nominal[:2])]
        if region is None:
            cell = _nearest_safe_cell(mask, window, nominal[:2])
            target = FootholdTarget("fixed", cell if cell is not None else previous)
            return (target, criteria_us, decompose_us, len(selection.regions), True)
        anchor = nominal[:2] if anchor_xy is None else anchor_xy
        anchor_z, inside = window.lookup_nearest(anchor[0], anchor[1])
        target = FootholdTarget(
            "optimize",
            np.array([anchor[0], anchor[1],
                      float(anchor_z) if inside else region.terrain_z_ref]),
            normals=region.normals, offsets=region.offsets,
            nominal=nominal[:2],
        )
        return (target, criteria_us, decompose_us, len(selection.regions), False)


def run_scenario(config: SimConfig) -> SimLog:
    """Integrate the closed loop and log the run; a fall ends it early."""
    terrain = config.build_terrain()
    geom = config.geometry
    gait = config.gait
    params = config.mpc
    dt = config.physics_dt
    n_steps = int(round(config.duration / dt))
    perception = _Perception(config, terrain)
    controller = MpcController(params)

    start_z = _clamped_height(terrain, config.start_xy) + config.base_height
    plant = _Plant(
        p=np.array([config.start_xy[0], config.start_xy[1], start_z]),
        v=np.zeros(3), rot=np.eye(3), omega=np.zeros(3),
    )
    feet = np.zeros((4, 3))
    for leg in range(4):
        hip = plant.p + geom.hip_offsets[leg]
        feet[leg] = [hip[0], hip[1], _clamped_height(terrain, hip[:2])]
    liftoff_pos = feet.copy()
    commanded = feet.copy()
    targets: list[FootholdTarget | None] = [None] * 4
    swing_planned = np.zeros(4, dtype=bool)  # a plan exists for the current swing

    stance_prev, _ = loco.contact_state(gait, 0.0)
    forces_cmd = np.zeros((4, 3))
    next_tick = 0.0
    tick_period = 1.0 / config.control_rate

    times = [0.0]
    rpys = [_rot_to_rpy(plant.rot)]
    coms = [plant.p.copy()]
    contacts = [stance_prev.copy()]
    events: list[FootholdEvent] = []
    ticks: list[TickRecord] = []
    fall = False
    fall_time = None

    for step in range(n_steps):
        t = step * dt
        stance_now, phases = stance_prev, loco.contact_state(gait, t)[1]

        if t >= next_tick - 1e-9:
            next_tick += tick_period
            state = plant.state()
            ramp = min(1.0, t / config.ramp_time) if config.ramp_time > 0 else 1.0
            v_cmd = config.v_des * ramp
            criteria_us = decompose_us = 0.0
            region_count = 0
            plans = [LegPlan() for _ in range(4)]
            for leg in range(4):
                if stance_now[leg]:
                    plans[leg].current_position = feet[leg].copy()
                    # possible re-touchdown late in the horizon: pin at a nominal
                    t_lo = (gait.duty_factor - phases[leg]) * gait.cycle_time
                    t_td = t_lo + gait.swing_time
                    if t_td < params.horizon * params.dt:
                        hip_td = loco.predict_touchdown_hip(
                            plant.p, plant.v, state.theta[2], geom.hip_offsets[leg], t_td)
                        nominal = _safe_nominal(hip_td, plant.v, v_cmd, gait, terrain)
                        plans[leg].target = FootholdTarget("fixed", nominal)
                else:
                    t_td = loco.time_to_touchdown(gait, phases[leg])
                    hip_td = loco.predict_touchdown_hip(
                        plant.p, plant.v, state.theta[2], geom.hip_offsets[leg], t_td)
                    nominal = _safe_nominal(hip_td, plant.v, v_cmd, gait, terrain)
                    hip_travel = plant.v[:2] * gait.stance_time
                    anchor_xy = None
                    if (targets[leg] is not None and targets[leg].mode == "optimize"
                            and swing_planned[leg]):
                        anchor_xy = commanded[leg][:2]
                    target, c_us, d_us, n_regions, fallback = perception.plan_leg(
                        leg, hip_td, liftoff_pos[leg], hip_travel, nominal,
                        commanded[leg], anchor_xy)
                    swing_planned[leg] = True
                    plans[leg].target = target
                    criteria_us += c_us
                    decompose_us += d_us
                    region_count += n_regions
            contact_h = np.stack([
                loco.contact_state(gait, t + k * params.dt)[0] for k in range(params.horizon)
            ])
            x_ref = build_reference(
                state, v_cmd,
                lambda xy: _clamped_height(terrain, xy) + config.base_height,
                params)
            if config.track_centerline:
                # converge the lateral reference back onto the path line
                err = config.centerline_y - state.p[1]
                steps = np.arange(1, params.horizon + 1) * params.dt
                x_ref[:, 4] = state.p[1] + err * np.minimum(1.0, steps / 1.0)
                x_ref[:, 10] = np.clip(err, -0.3, 0.3)
            try:
                sol = controller.solve(state, contact_h, plans, x_ref)
            except MpcError:
                fall = True
                fall_time = t
                break
            forces_cmd = sol.forces[0]
            for leg in range(4):
                plan_target = plans[leg].target
                if not stance_now[leg] and plan_target is not None:
                    if leg in sol.footholds:
                        commanded[leg] = sol.footholds[leg].copy()
                    else:
                        commanded[leg] = plan_target.position.copy()
                    targets[leg] = plan_target
            ticks.append(TickRecord(t, sol.solve_time_us, criteria_us, decompose_us,
                                    region_count, sol.status, sol.iterations))

        external = np.zeros(3)
        if config.disturbance is not None and config.disturbance.active(t):
            external = config.disturbance.force
        plant = step_physics(plant, feet, forces_cmd, stance_now, external, dt, params)

        # schedule-driven transitions, then kinematic swing-foot tracking
        t_new = t + dt
        stance_new, phases_new = loco.contact_state(gait, t_new)
        for leg in range(4):
            if stance_new[leg] and not stance_prev[leg]:
                pos = commanded[leg].copy()
                pos[2] = _clamped_height(terrain, pos[:2])
                feet[leg] = pos
                target = targets[leg]
                violation = None
                if target is not None and target.mode == "optimize":
                    violation = float(np.max(target.normals @ pos[:2] - target.offsets))
                events.append(FootholdEvent(t_new, leg, "touchdown", pos.copy(),
                                            constraint_violation=violation))
            elif not stance_new[leg] and stance_prev[leg]:
                liftoff_pos[leg] = feet[leg].copy()
                swing_planned[leg] = False
                events.append(FootholdEvent(t_new, leg, "liftoff", feet[leg].copy()))
        stance_prev = stance_new.copy()
        for leg in range(4):
            if not stance_new[leg]:
                s = loco.swing_phase(gait, phases_new[leg])
                feet[leg] = loco.swing_trajectory(
                    liftoff_pos[leg], commanded[leg], geom.swing_apex, min(1.0, s))

        rpy = _rot_to_rpy(plant.rot)
        times.append(t + dt)
        rpys.append(rpy)
        coms.append(plant.p.copy())
        contacts.append(stance_new.copy())
        ground = _clamped_height(terrain, plant.p[:2])
        if abs(rpy[0]) > FALL_ANGLE or abs(rpy[1]) > FALL_ANGLE or plant.p[2] < ground:
            fall = True
            fall_time = t + dt
            break

    rpys_arr = np.asarray(rpys)
    return SimLog(
        mode=config.mode,
        time=np.asarray(times),
        roll=rpys_arr[:, 0],
        pitch=rpys_arr[:, 1],
        yaw=rpys_arr[:, 2],
        com=np.asarray(coms),
        contacts=np.asarray(contacts),
        events=events,
        ticks=ticks,
        fall=fall,
        fall_time=fall_time,
    )


def _safe_nominal(hip_td, v, v_des, gait, terrain) -> np.ndarray:
    try:
        return loco.nominal_foothold(hip_td, v, v_des, gait, terrain)
    except Exception:
        xy = hip_td[:2]
        return np.array([xy[0], xy[1], _clamped_height(terrain, xy)])


def compare_modes(config: SimConfig) -> dict:
    """Run both controller modes on identical scenarios and report the pairing."""
    from dataclasses import replace as dc_replace

    results = {}
    logs = {}
    for mode in ("convex_region", "heuristic"):
        cfg = dc_replace(config, mode=mode)
        log = run_scenario(cfg)
        logs[mode] = log
        results[mode] = log.summary()
    convex, heur = results["convex_region"], results["heuristic"]
    results["convex_no_fall"] = not convex["fall"]
    results["ordering_ok"] = (not convex["fall"]) and (
        heur["fall"] or convex["peak_roll"] < heur["peak_roll"])
    return {"summary": results, "logs": logs}


# ---------------------------------------------------------------------------
# configuration (de)serialization


def config_to_dict(config: SimConfig) -> dict:
    d = {
        "terrain_kind": config.terrain_kind,
        "terrain_params": config.terrain_params,
        "grid": {
            "n_rows": config.grid.n_rows, "n_cols": config.grid.n_cols,
            "resolution": config.grid.resolution,
            "origin_xy": list(config.grid.origin_xy),
        },
        "gait": {
            "cycle_time": config.gait.cycle_time,
            "duty_factor": config.gait.duty_factor,
            "phase_offsets": list(config.gait.phase_offsets),
        },
        "mode": config.mode,
        "duration": config.duration,
        "control_rate": config.control_rate,
        "physics_dt": config.physics_dt,
        "mpc": {
            "horizon": config.mpc.horizon, "dt": config.mpc.dt,
            "mass": config.mpc.mass,
            "inertia_body": np.asarray(config.mpc.inertia_body).ravel().tolist(),
            "mu": config.mpc.mu, "fz_min": config.mpc.fz_min, "fz_max": config.mpc.fz_max,
            "q_weights": np.asarray(config.mpc.q_weights).tolist(),
            "r_weight": config.mpc.r_weight,
            "foothold_weight": config.mpc.foothold_weight,
            "foothold_box": config.mpc.foothold_box,
        },
        "geometry": {
            "hip_offsets": np.asarray(config.geometry.hip_offsets).ravel().tolist(),
            "l_upper": config.geometry.l_upper, "l_lower": config.geometry.l_lower,
            "r_min": config.geometry.r_min, "r_max": config.geometry.r_max,
            "foot_radius": config.geometry.foot_radius,
            "roughness_h": config.geometry.roughness_h,
            "roughness_kmin": config.geometry.roughness_kmin,
            "swing_apex": config.geometry.swing_apex,
            "collision_margin": config.geometry.collision_margin,
            "n_phase_samples": config.geometry.n_phase_samples,
        },
        "v_des": config.v_des.tolist(),
        "ramp_time": config.ramp_time,
        "base_height": config.base_height,
        "track_centerline": config.track_centerline,
        "centerline_y": config.centerline_y,
        "start_xy": config.start_xy.tolist(),
        "seed": config.seed,
        "perception": config.perception,
        "weights_path": config.weights_path,
    }
    if config.disturbance is not None:
        d["disturbance"] = {
            "force": config.disturbance.force.tolist(),
            "start": config.disturbance.start,
            "duration": config.disturbance.duration,
        }
    return d


def config_from_dict(d: dict) -> SimConfig:
    kwargs = {}
    for key in ("terrain_kind", "terrain_params", "mode", "duration", "control_rate",
                "physics_dt", "ramp_time", "base_height", "track_centerline",
                "centerline_y", "seed", "perception", "weights_path"):
        if key in d:
            kwargs[key] = d[key]
    if "grid" in d:
        g = d["grid"]
        kwargs["grid"] = GridSpec(g["n_rows"], g["n_cols"], g["resolution"],
                                  tuple(g["origin_xy"]))
    if "gait" in d:
        g = d["gait"]
        kwargs["gait"] = loco.GaitSchedule(g["cycle_time"], g["duty_factor"],
                                           tuple(g["phase_offsets"]))
    if "mpc" in d:
        m = dict(d["mpc"])
        m["inertia_body"] = np.asarray(m["inertia_body"], dtype=float).reshape(3, 3)
        m["q_weights"] = np.asarray(m["q_weights"], dtype=float)
        kwargs["mpc"] = MpcParams(**m)
    if "geometry" in d:
        g = dict(d["geometry"])
        g["hip_offsets"] = np.asarray(g["hip_offsets"], dtype=float).reshape(4, 3)
        kwargs["geometry"] = crit.RobotGeometry(**g)
    if "disturbance" in d:
        dd = d["disturbance"]
        kwargs["disturbance"] = DisturbancePulse(np.asarray(dd["force"], dtype=float),
                                                 dd["start"], dd["duration"])
    if "v_des" in d:
        kwargs["v_des"] = np.asarray(d["v_des"], dtype=float)
    if "start_xy" in d:
        kwargs["start_xy"] = np.asarray(d["start_xy"], dtype=float)
    return SimConfig(**kwargs)


def load_config(path) -> SimConfig:
    return config_from_dict(json.loads(Path(path).read_text()))


def save_config(config: SimConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2))


def paper_scenario() -> SimConfig:
    """The shipped benchmark: stairs climb under a hard lateral push."""
    from importlib import resources

    data = resources.files("footplan").joinpath("data/paper_scenario.json").read_text()
    return config_from_dict(json.loads(data))
