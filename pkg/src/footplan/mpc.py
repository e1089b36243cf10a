"""Linear MPC over single-rigid-body dynamics with foothold optimization.

State x = (theta, p, omega, v): Euler angles, CoM position, body angular
velocity, CoM velocity. Decision variables are the stacked stance-leg
ground reaction forces over the horizon plus an xy position per optimized
upcoming foothold, constrained to its convex safe region. The torque map
is evaluated at nominal footholds; foothold deviations enter through the
gravity-share force linearization and are refreshed every solve.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .qpsolver import QpProblem, QpSettings, QpSolution, solve as qp_solve

GRAVITY = 9.81

NX = 12  # state dimension


class MpcError(RuntimeError):
    """Unrecoverable MPC failure (first solve failed or no contact at all)."""


def wrap_angles(theta) -> np.ndarray:
    """Wrap each angle to (-pi, pi]."""
    t = np.asarray(theta, dtype=float)
    wrapped = t - 2 * np.pi * np.floor((t + np.pi) / (2 * np.pi))
    wrapped[wrapped <= -np.pi] += 2 * np.pi
    return wrapped


@dataclass
class SrbdState:
    """Single-rigid-body state; angles wrapped to (-pi, pi]."""

    p: np.ndarray
    v: np.ndarray
    theta: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).copy()
        self.v = np.asarray(self.v, dtype=float).copy()
        self.theta = wrap_angles(self.theta)
        self.omega = np.asarray(self.omega, dtype=float).copy()

    def vector(self) -> np.ndarray:
        return np.concatenate([self.theta, self.p, self.omega, self.v])


@dataclass(frozen=True)
class MpcParams:
    horizon: int = 12
    dt: float = 0.04
    mass: float = 140.0
    inertia_body: np.ndarray = field(default_factory=lambda: np.diag([4.5, 11.0, 12.0]))
    mu: float = 0.7
    fz_min: float = 0.0
    fz_max: float = 2500.0
    q_weights: np.ndarray = field(default_factory=lambda: np.array(
        [550.0, 550.0, 200.0, 100.0, 100.0, 300.0, 1.0, 1.0, 1.0, 10.0, 10.0, 10.0]))
    r_weight: float = 1e-5
    foothold_weight: float = 1e3
    foothold_box: float = 0.25
    terminal_weight: float = 20.0  # scales the horizon-end state cost; stops thrust front-loading

    def __post_init__(self):
        inertia = np.asarray(self.inertia_body, dtype=float)
        qw = np.asarray(self.q_weights, dtype=float)
        object.__setattr__(self, "inertia_body", inertia)
        object.__setattr__(self, "q_weights", qw)
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.mass <= 0 or self.mu <= 0 or self.fz_min < 0:
            raise ValueError("mass and mu must be positive, fz_min non-negative")
        if inertia.shape != (3, 3) or np.any(np.linalg.eigvalsh(inertia) <= 0):
            raise ValueError("inertia_body must be 3x3 positive definite")
        if qw.shape != (NX,):
            raise ValueError("q_weights must have 12 entries")


@dataclass
class FootholdTarget:
    """Plan for a leg's next touchdown within the horizon.

    mode 'fixed' pins the foothold at position; mode 'optimize' makes its
    xy a decision variable constrained by the region halfspaces and a box
    around the nominal (z comes from terrain_z_ref). position doubles as
    the linearization anchor for the torque map; passing the previous
    tick's solution there keeps the per-solve linearization error small.
    """

    mode: str
    position: np.ndarray
    normals: np.ndarray | None = None
    offsets: np.ndarray | None = None
    nominal: np.ndarray | None = None  # cost/box center; defaults to position xy

    def __post_init__(self):
        if self.mode not in ("fixed", "optimize"):
            raise ValueError("mode must be 'fixed' or 'optimize'")
        self.position = np.asarray(self.position, dtype=float).copy()
        if self.nominal is not None:
            self.nominal = np.asarray(self.nominal, dtype=float)[:2].copy()
        if self.mode == "optimize":
            if self.normals is None or self.offsets is None:
                raise ValueError("optimize targets need region halfspaces")
            self.normals = np.asarray(self.normals, dtype=float)
            self.offsets = np.asarray(self.offsets, dtype=float)

    @property
    def nominal_xy(self) -> np.ndarray:
        return self.position[:2] if self.nominal is None else self.nominal

    @property
    def terrain_z_ref(self) -> float:
        return float(self.position[2])


@dataclass
class LegPlan:
    """What the MPC knows about one leg over the horizon."""

    current_position: np.ndarray | None = None  # stance foothold, None while swinging
    target: FootholdTarget | None = None  # next touchdown, None if outside horizon

    def __post_init__(self):
        if self.current_position is not None:
            self.current_position = np.asarray(self.current_position, dtype=float).copy()


@dataclass
class MpcSolution:
    forces: np.ndarray  # (N, 4, 3), zeros outside stance
    footholds: dict[int, np.ndarray]  # optimized touchdown positions per leg
    states: np.ndarray  # (N+1, 12) predicted trajectory
    status: str  # solved | degraded
    iterations: int
    solve_time_us: float
    primal_res: float
    dual_res: float


def rot_z(yaw: float) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _skew(r) -> np.ndarray:
    x, y, z = r
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def linearize_dynamics(state: SrbdState, footholds: list[np.ndarray], params: MpcParams,
                       com_ref: np.ndarray | None = None):
    """One-step discrete SRBD linearization (forward Euler).

    footholds lists the active stance foot positions for this step; B maps
    their stacked forces. Rotation terms are linearized about the current
    yaw, torques use moment arms from com_ref (default: the actual CoM).
    """
    dt = params.dt
    com = np.asarray(state.p if com_ref is None else com_ref, dtype=float)
    rz = rot_z(state.theta[2])
    inertia_inv = np.linalg.inv(params.inertia_body)
    a_c = np.zeros((NX, NX))
    a_c[0:3, 6:9] = np.eye(3)  # theta_dot = omega (body, small roll/pitch)
    a_c[3:6, 9:12] = np.eye(3)  # p_dot = v
    a_d = np.eye(NX) + dt * a_c
    b_d = np.zeros((NX, 3 * len(footholds)))
    for k, pos in enumerate(footholds):
        r = np.asarray(pos, dtype=float) - com
        b_d[6:9, 3 * k:3 * k + 3] = dt * inertia_inv @ rz.T @ _skew(r)
        b_d[9:12, 3 * k:3 * k + 3] = dt * np.eye(3) / params.mass
    g_d = np.zeros(NX)
    g_d[11] = -GRAVITY * dt
    return a_d, b_d, g_d


@dataclass
class _QpLayout:
    n_vars: int
    n_rows: int
    force_cols: dict[tuple[int, int], int]  # (step, leg) -> column
    foothold_cols: dict[int, int]  # leg -> column of its xy pair
    force_rows: dict[tuple[int, int], int]  # (step, leg) -> first of 5 rows
    foothold_rows: dict[int, tuple[int, int]]  # leg -> (first row, count)
    anchor: dict[tuple[int, int], np.ndarray]  # foothold position used per (step, leg)


def _foothold_schedule(contact: np.ndarray, plans: list[LegPlan]):
    """Per (step, leg): which foothold position anchors the moment arm,
    and whether it is this leg's upcoming (possibly optimized) target."""
    n_steps = contact.shape[0]
    anchor: dict[tuple[int, int], np.ndarray] = {}
    uses_target: dict[tuple[int, int], bool] = {}
    for leg in range(4):
        plan = plans[leg]
        in_first_run = bool(contact[0, leg]) and plan.current_position is not None
        for k in range(n_steps):
            if not contact[k, leg]:
                in_first_run = False
                continue
            if k > 0 and not contact[k - 1, leg]:
                in_first_run = False
            if in_first_run:
                anchor[(k, leg)] = plan.current_position
                uses_target[(k, leg)] = False
            else:
                if plan.target is None:
                    raise MpcError(f"leg {leg} re-contacts at step {k} without a target")
                anchor[(k, leg)] = plan.target.position
                uses_target[(k, leg)] = True
    return anchor, uses_target


def build_qp(state: SrbdState, contact: np.ndarray, plans: list[LegPlan],
             x_ref: np.ndarray, params: MpcParams,
             force_guess: np.ndarray | None = None) -> tuple[QpProblem, _QpLayout]:
    """Condense the horizon into a QP over stacked forces + optimized footholds.

    contact is (N, 4) stance flags; x_ref is (N, 12), the reference for
    steps 1..N. Region halfspace rows and the nominal box bound each
    optimized foothold; friction pyramid rows bound every stance force.
    force_guess ((N, 4, 3), typically the previous solution) refines the
    frozen force in the foothold-torque linearization; the gravity share
    is used where absent.
    """
    n_steps = params.horizon
    if contact.shape != (n_steps, 4):
        raise ValueError(f"contact must be ({n_steps}, 4)")
    if x_ref.shape != (n_steps, NX):
        raise ValueError(f"x_ref must be ({n_steps}, {NX})")
    if not contact.any():
        raise MpcError("no stance legs anywhere in the horizon")

    anchor, uses_target = _foothold_schedule(contact, plans)
    opt_legs = [leg for leg in range(4)
                if plans[leg].target is not None and plans[leg].target.mode == "optimize"
                and any(uses_target.get((k, leg), False) for k in range(n_steps))]

    force_cols: dict[tuple[int, int], int] = {}
    col = 0
    for k in range(n_steps):
        for leg in range(4):
            if contact[k, leg]:
                force_cols[(k, leg)] = col
                col += 3
    foothold_cols = {leg: col + 2 * i for i, leg in enumerate(opt_legs)}
    n_vars = col + 2 * len(opt_legs)

    mass, dt = params.mass, params.dt
    rz = rot_z(state.theta[2])
    inertia_inv = np.linalg.inv(params.inertia_body)
    a_d = np.eye(NX)
    a_d[0:3, 6:9] = dt * np.eye(3)
    a_d[3:6, 9:12] = dt * np.eye(3)

    # CoM path used for moment arms: current CoM then the reference trail.
    com_path = np.empty((n_steps, 3))
    com_path[0] = state.p
    if n_steps > 1:
        com_path[1:] = x_ref[:-1, 3:6]

    su = np.zeros((n_steps, NX, n_vars))
    sg = np.zeros((n_steps, NX))
    sx = np.zeros((n_steps, NX, NX))
    run_u = np.zeros((NX, n_vars))
    run_g = np.zeros(NX)
    run_x = np.eye(NX)
    for k in range(n_steps):
        legs_k = [leg for leg in range(4) if contact[k, leg]]
        b_k = np.zeros((NX, n_vars))
        g_k = np.zeros(NX)
        g_k[11] = -GRAVITY * dt
        fz_share = mass * GRAVITY / max(1, len(legs_k))
        for leg in legs_k:
            r = anchor[(k, leg)] - com_path[k]
            c0 = force_cols[(k, leg)]
            b_k[6:9, c0:c0 + 3] = dt * inertia_inv @ rz.T @ _skew(r)
            b_k[9:12, c0:c0 + 3] = (dt / mass) * np.eye(3)
            if uses_target.get((k, leg), False) and leg in foothold_cols:
                # first-order foothold effect around a frozen force; the
                # smooth gravity share behaves better here than the solved
                # (often cone-saturated) previous forces
                f_bar = np.array([0.0, 0.0, fz_share])
                fc = foothold_cols[leg]
                gain = dt * inertia_inv @ rz.T
                # d tau / d q for q = (qx, qy, z_ref): columns of [q]x f_bar
                b_k[6:9, fc] += gain @ np.array([0.0, -f_bar[2], f_bar[1]])
                b_k[6:9, fc + 1] += gain @ np.array([f_bar[2], 0.0, -f_bar[0]])
                q_bar = plans[leg].target.position
                g_k[6:9] += gain @ (-np.cross(q_bar[:3] * [1.0, 1.0, 0.0], f_bar))
        run_u = a_d @ run_u + b_k
        run_g = a_d @ run_g + g_k
        run_x = a_d @ run_x
        su[k] = run_u
        sg[k] = run_g
        sx[k] = run_x

    q_diag = np.tile(params.q_weights, n_steps)
    q_diag[-NX:] *= params.terminal_weight
    su_flat = su.reshape(n_steps * NX, n_vars)
    c = (sx.reshape(n_steps * NX, NX) @ state.vector() + sg.ravel()
         - x_ref.ravel())
    p_mat = 2.0 * (su_flat.T * q_diag) @ su_flat
    q_vec = 2.0 * su_flat.T @ (q_diag * c)
    for c0 in force_cols.values():
        for i in range(3):
            p_mat[c0 + i, c0 + i] += 2.0 * params.r_weight
    for leg in opt_legs:
        fc = foothold_cols[leg]
        nom = plans[leg].target.nominal_xy
        p_mat[fc, fc] += 2.0 * params.foothold_weight
        p_mat[fc + 1, fc + 1] += 2.0 * params.foothold_weight
        q_vec[fc] -= 2.0 * params.foothold_weight * nom[0]
        q_vec[fc + 1] -= 2.0 * params.foothold_weight * nom[1]
    p_mat = 0.5 * (p_mat + p_mat.T)

    rows = 5 * len(force_cols) + sum(
        len(plans[leg].target.offsets) + 2 for leg in opt_legs)
    a_con = np.zeros((rows, n_vars))
    lo = np.full(rows, -np.inf)
    hi = np.full(rows, np.inf)
    row = 0
    force_rows: dict[tuple[int, int], int] = {}
    for (k, leg), c0 in force_cols.items():
        force_rows[(k, leg)] = row
        mu = params.mu
        a_con[row, c0] = 1.0
        a_con[row, c0 + 2] = -mu
        hi[row] = 0.0
        a_con[row + 1, c0] = 1.0
        a_con[row + 1, c0 + 2] = mu
        lo[row + 1] = 0.0
        a_con[row + 2, c0 + 1] = 1.0
        a_con[row + 2, c0 + 2] = -mu
        hi[row + 2] = 0.0
        a_con[row + 3, c0 + 1] = 1.0
        a_con[row + 3, c0 + 2] = mu
        lo[row + 3] = 0.0
        a_con[row + 4, c0 + 2] = 1.0
        lo[row + 4] = params.fz_min
        hi[row + 4] = params.fz_max
        row += 5
    foothold_rows: dict[int, tuple[int, int]] = {}
    for leg in opt_legs:
        fc = foothold_cols[leg]
        target = plans[leg].target
        foothold_rows[leg] = (row, len(target.offsets) + 2)
        for normal, offset in zip(target.normals, target.offsets):
            a_con[row, fc:fc + 2] = normal
            hi[row] = offset
            row += 1
        nom = target.nominal_xy
        for i in range(2):
            a_con[row, fc + i] = 1.0
            lo[row] = nom[i] - params.foothold_box
            hi[row] = nom[i] + params.foothold_box
            row += 1

    problem = QpProblem(p_mat, q_vec, a_con, lo, hi)
    layout = _QpLayout(n_vars, rows, force_cols, foothold_cols, force_rows,
                       foothold_rows, anchor)
    return problem, layout


def _project_friction(force: np.ndarray, params: MpcParams) -> np.ndarray:
    fz = float(np.clip(force[2], params.fz_min, params.fz_max))
    bound = params.mu * fz
    return np.array([np.clip(force[0], -bound, bound),
                     np.clip(force[1], -bound, bound), fz])


def _project_polytope(p: np.ndarray, normals: np.ndarray, offsets: np.ndarray,
                      iters: int = 64) -> np.ndarray:
    """Sequential projection onto the intersection of halfspaces."""
    p = p.copy()
    for _ in range(iters):
        viol = normals @ p - offsets
        k = int(np.argmax(viol))
        if viol[k] <= 1e-9:
            break
        p = p - viol[k] * normals[k]
    return p


class MpcController:
    """Stateful wrapper: build + solve with warm starting across ticks."""

    def __init__(self, params: MpcParams, settings: QpSettings | None = None):
        self.params = params
        self.settings = settings or QpSettings()
        self._warm: tuple | None = None  # (layout, x, y)
        self._rho: float | None = None
        self._prev_solution: MpcSolution | None = None

    def solve(self, state: SrbdState, contact: np.ndarray, plans: list[LegPlan],
              x_ref: np.ndarray) -> MpcSolution:
        t0 = time.perf_counter()
        force_guess = None if self._prev_solution is None else self._prev_solution.forces
        problem, layout = build_qp(state, contact, plans, x_ref, self.params,
                                   force_guess=force_guess)
        x0, y0 = self._transplant_warm_start(layout)
        sol = qp_solve(problem, self.settings, x0, y0, rho0=self._rho)
        if sol.status != "solved":
            if self._prev_solution is None:
                raise MpcError(f"first MPC solve failed with status {sol.status}")
            shifted = self._shift_previous()
            self._warm = None
            self._rho = None
            return shifted
        self._warm = (layout, sol.x.copy(), sol.y.copy())
        self._rho = sol.rho
        solution = self._extract(sol, layout, contact, plans, state)
        solution.solve_time_us = (time.perf_counter() - t0) * 1e6
        self._prev_solution = solution
        return solution

    def reset(self):
        self._warm = None
        self._rho = None
        self._prev_solution = None

    def _transplant_warm_start(self, layout: _QpLayout):
        """Map the previous solution onto the new layout by (step, leg) keys.

        Sequential ticks mostly share their horizon grid; when the contact
        pattern slides by one step the shifted key is tried as fallback.
        """
        if self._warm is None:
            return None, None
        prev, px, py = self._warm
        x0 = np.zeros(layout.n_vars)
        y0 = np.zeros(layout.n_rows)
        for key, col in layout.force_cols.items():
            pc = prev.force_cols.get(key)
            if pc is None:
                pc = prev.force_cols.get((key[0] + 1, key[1]))
            if pc is not None:
                x0[col:col + 3] = px[pc:pc + 3]
        for key, row in layout.force_rows.items():
            pr = prev.force_rows.get(key)
            if pr is None:
                pr = prev.force_rows.get((key[0] + 1, key[1]))
            if pr is not None:
                y0[row:row + 5] = py[pr:pr + 5]
        for leg, col in layout.foothold_cols.items():
            pc = prev.foothold_cols.get(leg)
            if pc is not None:
                x0[col:col + 2] = px[pc:pc + 2]
        for leg, (row, count) in layout.foothold_rows.items():
            prev_rows = prev.foothold_rows.get(leg)
            if prev_rows is not None:
                n = min(count, prev_rows[1])
                y0[row:row + n] = py[prev_rows[0]:prev_rows[0] + n]
        return x0, y0

    def _shift_previous(self) -> MpcSolution:
        prev = self._prev_solution
        forces = np.vstack([prev.forces[1:], prev.forces[-1:]])
        return replace(prev, forces=forces, status="degraded")

    def _extract(self, sol: QpSolution, layout: _QpLayout, contact: np.ndarray,
                 plans: list[LegPlan], state: SrbdState) -> MpcSolution:
        n_steps = self.params.horizon
        forces = np.zeros((n_steps, 4, 3))
        for (k, leg), c0 in layout.force_cols.items():
            forces[k, leg] = _project_friction(sol.x[c0:c0 + 3], self.params)
        footholds: dict[int, np.ndarray] = {}
        for leg, fc in layout.foothold_cols.items():
            target = plans[leg].target
            nom = target.nominal_xy
            box_n = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
            box_b = np.array([nom[0] + self.params.foothold_box,
                              -(nom[0] - self.params.foothold_box),
                              nom[1] + self.params.foothold_box,
                              -(nom[1] - self.params.foothold_box)])
            normals = np.vstack([target.normals, box_n])
            offsets = np.concatenate([target.offsets, box_b])
            xy = _project_polytope(sol.x[fc:fc + 2], normals, offsets)
            footholds[leg] = np.array([xy[0], xy[1], target.terrain_z_ref])
        states = self._rollout(state, contact, plans, forces, footholds)
        return MpcSolution(forces, footholds, states, "solved", sol.iterations,
                           0.0, sol.primal_res, sol.dual_res)

    def _rollout(self, state: SrbdState, contact: np.ndarray, plans: list[LegPlan],
                 forces: np.ndarray, footholds: dict[int, np.ndarray]) -> np.ndarray:
        anchor, uses_target = _foothold_schedule(contact, plans)
        n_steps = self.params.horizon
        xs = np.empty((n_steps + 1, NX))
        xs[0] = state.vector()
        for k in range(n_steps):
            legs_k = [leg for leg in range(4) if contact[k, leg]]
            positions = []
            fs = []
            for leg in legs_k:
                pos = anchor[(k, leg)]
                if uses_target.get((k, leg), False) and leg in footholds:
                    pos = footholds[leg]
                positions.append(pos)
                fs.append(forces[k, leg])
            com_ref = xs[k][3:6]
            a_d, b_d, g_d = linearize_dynamics(state, positions, self.params, com_ref=com_ref)
            u = np.concatenate(fs) if fs else np.zeros(0)
            xs[k + 1] = a_d @ xs[k] + (b_d @ u if u.size else 0.0) + g_d
        return xs


def build_reference(state: SrbdState, v_des, height_fn, params: MpcParams,
                    yaw_ref: float = 0.0) -> np.ndarray:
    """Constant-velocity reference trail: xy advances at v_des from the
    current CoM, z follows height_fn(xy), angles and rates go to zero."""
    n_steps = params.horizon
    v_des = np.asarray(v_des, dtype=float)
    x_ref = np.zeros((n_steps, NX))
    for k in range(n_steps):
        t_k = (k + 1) * params.dt
        xy = state.p[:2] + v_des[:2] * t_k
        x_ref[k, 2] = yaw_ref
        x_ref[k, 3:5] = xy
        x_ref[k, 5] = height_fn(xy)
        x_ref[k, 9:11] = v_des[:2]
    return x_ref
