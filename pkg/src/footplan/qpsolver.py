"""Dense operator-splitting (ADMM) solver for convex QPs.

Solves min 1/2 x'Px + q'x  s.t.  l <= Ax <= u. One factorization of
(P + sigma*I + rho*A'A) per solve, warm-startable, which is what the MPC
needs at control rates. Problems are equilibrated internally (Ruiz-style
diagonal scaling); convergence is always checked on the original data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

INFINITY_SENTINEL = 1e30  # bounds at or beyond this magnitude mean +/- infinity in files


class QpError(ValueError):
    """Invalid problem data."""


@dataclass(frozen=True)
class QpSettings:
    rho: float = 0.1
    sigma: float = 1e-6
    alpha: float = 1.6
    eps_pri: float = 1e-4
    eps_dua: float = 1e-4
    eps_rel: float = 1e-5  # relative slack on badly scaled problems, OSQP-style
    max_iters: int = 4000
    check_interval: int = 10
    scaling_iters: int = 10
    # a strictly fixed rho stalls on a small share of problems; adaptation
    # rebalances primal vs dual progress and re-factorizes when it moves
    adaptive_rho: bool = True
    adaptive_rho_interval: int = 50
    adaptive_rho_tolerance: float = 5.0


@dataclass(frozen=True)
class QpProblem:
    """min 1/2 x'Px + q'x s.t. l <= Ax <= u, dense storage."""

    P: np.ndarray
    q: np.ndarray
    A: np.ndarray
    l: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        q = np.asarray(self.q, dtype=float).ravel()
        A = np.asarray(self.A, dtype=float)
        if A.size == 0:
            A = np.zeros((0, q.size))
        A = np.atleast_2d(A)
        l = np.asarray(self.l, dtype=float).ravel()
        u = np.asarray(self.u, dtype=float).ravel()
        n = q.size
        if P.shape != (n, n):
            raise QpError(f"P must be {n}x{n}")
        scale = max(1.0, float(np.abs(P).max()))
        if np.abs(P - P.T).max() > 1e-12 * scale:
            raise QpError("P must be symmetric")
        P = 0.5 * (P + P.T)
        if A.shape[1] != n:
            raise QpError("A column count must match q")
        m = A.shape[0]
        if l.shape != (m,) or u.shape != (m,):
            raise QpError("l and u must match A row count")
        if np.any(l > u):
            raise QpError("need l <= u elementwise")
        for name, arr in (("P", P), ("q", q), ("A", A)):
            if not np.isfinite(arr).all():
                raise QpError(f"{name} must be finite")
        for name, arr in (("P", P), ("q", q), ("A", A), ("l", l), ("u", u)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.q.size

    @property
    def m(self) -> int:
        return self.A.shape[0]


@dataclass
class QpSolution:
    x: np.ndarray
    y: np.ndarray
    status: str  # solved | max_iters | primal_infeasible
    iterations: int
    primal_res: float
    dual_res: float
    rho: float = 0.1  # final penalty, reusable for warm restarts


def _norm_inf(v: np.ndarray) -> float:
    return 0.0 if v.size == 0 else float(np.abs(v).max())


def kkt_residuals(problem: QpProblem, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Primal and dual KKT residuals (inf-norms) independent of the solve path."""
    ax = problem.A @ x
    primal = _norm_inf(np.clip(ax, problem.l, problem.u) - ax)
    dual = _norm_inf(problem.P @ x + problem.q + problem.A.T @ y)
    return primal, dual


def _ruiz_equilibrate(P, q, A, iters):
    """Symmetric diagonal scaling of the KKT matrix; returns scaled data and scalings."""
    n, m = q.size, A.shape[0]
    d = np.ones(n)
    e = np.ones(m)
    Ps, As = P.copy(), A.copy()
    for _ in range(iters):
        col = np.maximum(np.abs(Ps).max(axis=0, initial=0.0),
                         np.abs(As).max(axis=0, initial=0.0))
        dx = 1.0 / np.sqrt(np.clip(col, 1e-8, 1e8))
        row = np.abs(As).max(axis=1, initial=0.0) if m else np.zeros(0)
        dy = 1.0 / np.sqrt(np.clip(row, 1e-8, 1e8))
        Ps = Ps * dx[:, None] * dx[None, :]
        As = As * dy[:, None] * dx[None, :]
        d *= dx
        e *= dy
    return Ps, q * d, As, d, e


def solve(problem: QpProblem, settings: QpSettings | None = None,
          x0: np.ndarray | None = None, y0: np.ndarray | None = None,
          rho0: float | None = None) -> QpSolution:
    """ADMM solve with optional warm start (x0, y0, and a carried-over rho).

    Termination checks the residuals of the original, unscaled problem
    against eps + eps_rel * (residual scale). Raises QpError when P fails
    the positive-semidefiniteness screen. Primal infeasibility is detected
    from the dual-drift certificate (unbounded dual growth with A'dy ~ 0).
    """
    s = settings or QpSettings()
    n, m = problem.n, problem.m
    try:
        linalg.cho_factor(problem.P + s.sigma * np.eye(n))
    except linalg.LinAlgError as exc:
        raise QpError("P is not positive semidefinite") from exc

    Ps, qs, As, d, e = _ruiz_equilibrate(problem.P, problem.q, problem.A, s.scaling_iters)
    ls = problem.l * e
    us = problem.u * e

    identity = s.sigma * np.eye(n)
    rho = s.rho if rho0 is None else float(np.clip(rho0, 1e-6, 1e6))
    factor = linalg.cho_factor(Ps + identity + rho * (As.T @ As))

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float) / d
    y = np.zeros(m) if y0 is None else np.asarray(y0, dtype=float) / np.where(e > 0, e, 1.0)
    z = As @ x
    y_prev_check = y.copy()

    status = "max_iters"
    iterations = s.max_iters
    for it in range(1, s.max_iters + 1):
        rhs = s.sigma * x - qs + As.T @ (rho * z - y)
        x_tilde = linalg.cho_solve(factor, rhs)
        z_tilde = As @ x_tilde
        x = s.alpha * x_tilde + (1 - s.alpha) * x
        w = s.alpha * z_tilde + (1 - s.alpha) * z
        z = np.clip(w + y / rho, ls, us)
        y = y + rho * (w - z)

        if it % s.check_interval == 0 or it == s.max_iters:
            x_un = d * x
            y_un = e * y
            ax = problem.A @ x_un
            px = problem.P @ x_un
            aty = problem.A.T @ y_un
            primal = _norm_inf(np.clip(ax, problem.l, problem.u) - ax)
            dual = _norm_inf(px + problem.q + aty)
            split = _norm_inf(ax - z / np.where(e > 0, e, 1.0))
            z_un = z / np.where(e > 0, e, 1.0)
            eps_pri = s.eps_pri + s.eps_rel * max(_norm_inf(ax), _norm_inf(z_un))
            eps_dua = s.eps_dua + s.eps_rel * max(_norm_inf(px), _norm_inf(aty),
                                                  _norm_inf(problem.q))
            if max(primal, split) <= eps_pri and dual <= eps_dua:
                status = "solved"
                iterations = it
                break
            dy = y - y_prev_check
            if _detect_primal_infeasible(As, ls, us, dy):
                status = "primal_infeasible"
                iterations = it
                break
            y_prev_check = y.copy()

        if s.adaptive_rho and it % s.adaptive_rho_interval == 0 and it < s.max_iters:
            rho_new = _rebalanced_rho(rho, Ps, qs, As, x, y, z)
            if (rho_new > rho * s.adaptive_rho_tolerance
                    or rho_new < rho / s.adaptive_rho_tolerance):
                rho = rho_new
                factor = linalg.cho_factor(Ps + identity + rho * (As.T @ As))

    x_un = d * x
    y_un = e * y
    primal, dual = kkt_residuals(problem, x_un, y_un)
    return QpSolution(x_un, y_un, status, iterations, primal, dual, rho)


def _rebalanced_rho(rho, Ps, qs, As, x, y, z) -> float:
    """Scale rho by the ratio of relative primal to dual residuals (scaled space)."""
    ax = As @ x
    r_pri = _norm_inf(ax - z)
    r_dua = _norm_inf(Ps @ x + qs + As.T @ y)
    pri_scale = max(_norm_inf(ax), _norm_inf(z), 1e-10)
    dua_scale = max(_norm_inf(Ps @ x), _norm_inf(As.T @ y), _norm_inf(qs), 1e-10)
    ratio = np.sqrt((r_pri / pri_scale) / max(r_dua / dua_scale, 1e-10))
    return float(np.clip(rho * ratio, 1e-6, 1e6))


def _detect_primal_infeasible(As, ls, us, dy, tol: float = 1e-6) -> bool:
    ndy = _norm_inf(dy)
    if ndy <= 1e-12:
        return False
    dy = dy / ndy
    if _norm_inf(As.T @ dy) > tol:
        return False
    dy_plus = np.maximum(dy, 0.0)
    dy_minus = np.minimum(dy, 0.0)
    # a certificate cannot push on infinite bounds
    if np.any(dy_plus[np.isinf(us)] > tol) or np.any(dy_minus[np.isinf(ls)] < -tol):
        return False
    support = float(np.sum(us[~np.isinf(us)] * dy_plus[~np.isinf(us)])
                    + np.sum(ls[~np.isinf(ls)] * dy_minus[~np.isinf(ls)]))
    return support < -tol


# ---------------------------------------------------------------------------
# JSON debugging interface


def problem_to_json(problem: QpProblem) -> dict:
    clip = lambda v: np.clip(v, -INFINITY_SENTINEL, INFINITY_SENTINEL)
    return {
        "n": problem.n,
        "m": problem.m,
        "P": problem.P.ravel().tolist(),
        "q": problem.q.tolist(),
        "A": problem.A.ravel().tolist(),
        "l": clip(problem.l).tolist(),
        "u": clip(problem.u).tolist(),
    }


def problem_from_json(data: dict) -> QpProblem:
    n, m = int(data["n"]), int(data["m"])
    l = np.asarray(data["l"], dtype=float)
    u = np.asarray(data["u"], dtype=float)
    l[l <= -INFINITY_SENTINEL] = -np.inf
    u[u >= INFINITY_SENTINEL] = np.inf
    return QpProblem(
        P=np.asarray(data["P"], dtype=float).reshape(n, n),
        q=np.asarray(data["q"], dtype=float),
        A=np.asarray(data["A"], dtype=float).reshape(m, n),
        l=l,
        u=u,
    )


def load_problem(path) -> QpProblem:
    return problem_from_json(json.loads(Path(path).read_text()))


def save_problem(problem: QpProblem, path) -> None:
    Path(path).write_text(json.dumps(problem_to_json(problem)))
