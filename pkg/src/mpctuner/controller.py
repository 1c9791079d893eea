"""Nonlinear MPC shared controller.

Each control cycle minimizes a blend of two terms over the input sequence:
a quadratic penalty on the deviation of the end-effector twist from the
operator's reference, and a sigmoid barrier on the signed distance of every
collision sphere along the predicted roll-out. Inputs beyond the control
horizon are held at the last free input (move blocking). Velocity bounds are
enforced directly by the box-constrained inner solver; position, acceleration,
jerk and end-effector speed limits enter through an increasing quadratic
penalty schedule, and feasibility is judged post-hoc from the raw residuals.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from ._fastpath import eval_cost_grad
from .robot import JointLimits, RobotGeometry, RobotState, jacobian_batch
from .world import Esdf

# Sigmoid exponent clamp: well inside double range, far outside any regime
# where the penalty is distinguishable from 0 or c1.
_EXP_CLAMP = 500.0


@dataclass(frozen=True)
class MpcParams:
    """The seven tunable controller parameters."""

    Np: int
    Nc: int
    Qx: float
    Qy: float
    Qtheta: float
    c1: float
    c2: float

    def __post_init__(self):
        if not (self.Np >= self.Nc >= 1):
            raise ValueError(f"need Np >= Nc >= 1, got Np={self.Np}, Nc={self.Nc}")
        if min(self.Qx, self.Qy, self.Qtheta) <= 0:
            raise ValueError("Q weights must be positive")
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("c1 and c2 must be positive")

    @property
    def q_diag(self) -> np.ndarray:
        return np.array([self.Qx, self.Qy, self.Qtheta])

    def as_vector(self) -> np.ndarray:
        return np.array([self.Np, self.Nc, self.Qx, self.Qy, self.Qtheta, self.c1, self.c2])

    @classmethod
    def from_vector(cls, v) -> "MpcParams":
        return cls(Np=int(round(v[0])), Nc=int(round(v[1])), Qx=float(v[2]),
                   Qy=float(v[3]), Qtheta=float(v[4]), c1=float(v[5]), c2=float(v[6]))

    def to_dict(self) -> dict:
        return {"Np": self.Np, "Nc": self.Nc, "Qx": self.Qx, "Qy": self.Qy,
                "Qtheta": self.Qtheta, "c1": self.c1, "c2": self.c2}

    @classmethod
    def from_dict(cls, d: dict) -> "MpcParams":
        return cls(**{k: d[k] for k in ("Np", "Nc", "Qx", "Qy", "Qtheta", "c1", "c2")})


def baseline_params() -> MpcParams:
    """The hand-tuned reference parameter set."""
    return MpcParams(Np=25, Nc=13, Qx=1.0, Qy=1.0, Qtheta=1.0, c1=5.0, c2=20.0)


@dataclass(frozen=True)
class SolverSettings:
    penalty_schedule: tuple[float, ...] = (1e2, 1e4, 1e6)
    max_iter: tuple[int, ...] = (30, 20, 15)
    warm_max_iter: int = 20
    retry_max_iter: int = 400  # rescue-phase evaluation budget when residuals lag
    bound_tol: float = 1e-6
    residual_tol: float = 1e-4


@dataclass(frozen=True)
class ControllerConfig:
    """Fixed controller constants; everything the tuner does not touch."""

    alpha: float = 0.5
    Ts: float = 0.05
    c3: float = 0.4
    limits: JointLimits = field(default_factory=JointLimits)
    geometry: RobotGeometry = field(default_factory=RobotGeometry)
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.Ts <= 0 or self.c3 <= 0:
            raise ValueError("Ts and c3 must be positive")


@dataclass
class ControlResult:
    u0: np.ndarray
    input_sequence: np.ndarray  # (Nc, 3)
    feasible: bool
    solve_iterations: int
    cost: float
    max_residual: float = 0.0
    out_of_map: bool = False


def tracking_cost(x: RobotState, u, xdot_d, q_diag, geom: RobotGeometry) -> float:
    """Weighted squared deviation of the end-effector twist from the reference:
    sum_i Q_i (J_e(x) u - xdot_d)_i^2."""
    J = jacobian_batch(x.joints.as_array()[None, :], geom)[0]
    r = J @ np.asarray(u, dtype=float) - np.asarray(xdot_d, dtype=float)
    return float(np.sum(np.asarray(q_diag, dtype=float) * r * r))


def obstacle_penalty(sd, c1: float, c2: float, c3: float):
    """Sigmoid barrier c1 / (1 + exp(c2 (sd - c3))); c1/2 at sd = c3.

    Strictly decreasing in sd; accepts scalars or arrays. The exponent is
    clamped at +-500 before exponentiation.
    """
    z = np.clip(c2 * (np.asarray(sd, dtype=float) - c3), -_EXP_CLAMP, _EXP_CLAMP)
    out = c1 / (1.0 + np.exp(z))
    return float(out) if np.isscalar(sd) else out


@lru_cache(maxsize=256)
def _blocking_counts(Np: int, Nc: int) -> np.ndarray:
    """counts[k, j] = how many of the first k applied inputs were U[j].

    Encodes move blocking: q_k = q_0 + Ts * counts @ U. Shape (Np + 1, Nc).
    """
    counts = np.zeros((Np + 1, Nc))
    for k in range(1, Np + 1):
        idx = np.minimum(np.arange(k), Nc - 1)
        np.add.at(counts[k], idx, 1.0)
    counts.setflags(write=False)
    return counts


@lru_cache(maxsize=128)
def _geometry_arrays(geom: RobotGeometry) -> tuple[np.ndarray, np.ndarray]:
    links = np.array([link for link, _ in geom.spheres], dtype=np.int64)
    offs = np.array([off for _, off in geom.spheres], dtype=float)
    links.setflags(write=False)
    offs.setflags(write=False)
    return links, offs


@lru_cache(maxsize=128)
def _limit_arrays(limits: JointLimits):
    arrays = limits.as_arrays()
    for a in arrays:
        a.setflags(write=False)
    return arrays


class _Workspace:
    """Per-solve context delegating the fused cost/gradient/penalty
    evaluation to the compiled kernel in ``_fastpath``."""

    def __init__(self, x0: RobotState, xdot_d, params: MpcParams, cfg: ControllerConfig,
                 esdf: Esdf):
        self.q0 = x0.joints.as_array()
        self.d = np.asarray(xdot_d, dtype=float)
        self.params = params
        self.cfg = cfg
        self.esdf = esdf
        self.counts = _blocking_counts(params.Np, params.Nc)
        self.links, self.offs = _geometry_arrays(cfg.geometry)
        (self.qmin, self.qmax, self.vmax, self.amax, self.jmax) = _limit_arrays(cfg.limits)
        self.vee = cfg.limits.ee_speed_max

    def states(self, U: np.ndarray) -> np.ndarray:
        return self.q0[None, :] + self.cfg.Ts * (self.counts @ U)

    def kernel(self, U: np.ndarray, with_pen: bool, rho: float, u_prev: np.ndarray):
        """(total_cost, horizon_cost, grad, max_residual, out_of_map)."""
        p, cfg = self.params, self.cfg
        geom = cfg.geometry
        return eval_cost_grad(
            self.q0, U, cfg.Ts, p.Np, p.Nc, cfg.alpha, p.q_diag, self.d,
            p.c1, p.c2, cfg.c3,
            geom.rail_origin[0], geom.rail_origin[1], geom.rail_angle,
            geom.link1_length, geom.link2_length,
            self.links, self.offs,
            self.esdf.distance, self.esdf.origin[0], self.esdf.origin[1],
            self.esdf.resolution,
            self.qmin, self.qmax, self.amax, self.jmax, self.vee,
            with_pen, rho, u_prev)

    def _ee_jacobians(self, Qc: np.ndarray):
        """J, dJ/dq2, dJ/dq3 at the tracking-horizon states, one trig pass."""
        geom = self.cfg.geometry
        phi = geom.rail_angle
        l1, l2 = geom.link1_length, geom.link2_length
        a2 = phi + Qc[:, 1]
        a23 = a2 + Qc[:, 2]
        s2, c2 = np.sin(a2), np.cos(a2)
        s23, c23 = np.sin(a23), np.cos(a23)
        n = Qc.shape[0]
        J = np.zeros((n, 3, 3))
        J[:, 0, 0] = np.cos(phi)
        J[:, 1, 0] = np.sin(phi)
        J[:, 0, 1] = -l1 * s2 - l2 * s23
        J[:, 0, 2] = -l2 * s23
        J[:, 1, 1] = l1 * c2 + l2 * c23
        J[:, 1, 2] = l2 * c23
        J[:, 2, 1] = 1.0
        J[:, 2, 2] = 1.0
        dJ2 = np.zeros((n, 3, 3))
        dJ2[:, 0, 1] = -l1 * c2 - l2 * c23
        dJ2[:, 0, 2] = -l2 * c23
        dJ2[:, 1, 1] = -l1 * s2 - l2 * s23
        dJ2[:, 1, 2] = -l2 * s23
        dJ3 = np.zeros((n, 3, 3))
        dJ3[:, 0, 1] = -l2 * c23
        dJ3[:, 0, 2] = -l2 * c23
        dJ3[:, 1, 1] = -l2 * s23
        dJ3[:, 1, 2] = -l2 * s23
        return J, dJ2, dJ3

    def residuals(self, U: np.ndarray, u_prev: np.ndarray) -> dict[str, np.ndarray]:
        """Raw constraint residuals for the post-hoc feasibility verdict."""
        Ts = self.cfg.Ts
        Q = self.states(U)
        res = {
            "position": np.maximum(0.0, Q[1:] - self.qmax[None, :])
            + np.maximum(0.0, self.qmin[None, :] - Q[1:]),
        }
        ext = np.vstack([u_prev[None, :], U])
        acc = np.diff(ext, axis=0) / Ts
        res["acceleration"] = np.maximum(0.0, np.abs(acc) - self.amax[None, :])
        jerk = np.diff(ext, n=2, axis=0) / Ts**2 if ext.shape[0] >= 3 else np.zeros((0, 3))
        res["jerk"] = np.maximum(0.0, np.abs(jerk) - self.jmax[None, :])
        J, _, _ = self._ee_jacobians(Q[: self.params.Nc])
        speed = np.linalg.norm(np.einsum("kij,kj->ki", J, U)[:, :2], axis=1)
        res["ee_speed"] = np.maximum(0.0, speed - self.vee)
        return res

    def max_residual(self, U: np.ndarray, u_prev: np.ndarray) -> float:
        return max((float(r.max()) if r.size else 0.0)
                   for r in self.residuals(U, u_prev).values())


_ZERO3 = np.zeros(3)  # kept writable so the kernel sees one array type


def horizon_cost(x0: RobotState, U, xdot_d, params: MpcParams, cfg: ControllerConfig,
                 esdf: Esdf) -> float:
    """Blended cost of an input sequence: tracking over Nc plus the obstacle
    barrier over the rolled-out Np states (reference held constant)."""
    U = np.asarray(U, dtype=float).reshape(params.Nc, 3)
    ws = _Workspace(x0, xdot_d, params, cfg, esdf)
    _, cost, _, _, _ = ws.kernel(U, False, 0.0, _ZERO3)
    return float(cost)


def horizon_cost_gradient(x0: RobotState, U, xdot_d, params: MpcParams,
                          cfg: ControllerConfig, esdf: Esdf) -> np.ndarray:
    """Exact gradient of horizon_cost w.r.t. the input sequence."""
    U = np.asarray(U, dtype=float).reshape(params.Nc, 3)
    ws = _Workspace(x0, xdot_d, params, cfg, esdf)
    _, _, grad, _, _ = ws.kernel(U, False, 0.0, _ZERO3)
    return grad


def _pad_sequence(warm, Nc: int) -> np.ndarray:
    warm = np.asarray(warm, dtype=float).reshape(-1, 3)
    if warm.shape[0] < Nc:
        warm = np.vstack([warm, np.repeat(warm[-1:], Nc - warm.shape[0], axis=0)])
    return warm[:Nc]


def solve_mpc(x0: RobotState, xdot_d, params: MpcParams, cfg: ControllerConfig,
              esdf: Esdf, warm_start=None, u_prev=None) -> ControlResult:
    """Solve one control cycle.

    Single shooting over the Nc free inputs: box velocity bounds are handled
    by the L-BFGS-B inner solver, the remaining limits through the quadratic
    penalty schedule in ``cfg.solver``. A warm-started solve skips the
    continuation and refines directly at the final penalty weight, which is
    where a receding-horizon shift always lands near the optimum.
    Deterministic for identical inputs. On failure to converge the warm-start
    input is reused if it was itself feasible, otherwise zero input; the call
    never raises.
    """
    p = params
    u_prev = np.zeros(3) if u_prev is None else np.asarray(u_prev, dtype=float)
    vmax = np.array(cfg.limits.velocity_max)
    rho_final = cfg.solver.penalty_schedule[-1]
    ws = _Workspace(x0, xdot_d, params, cfg, esdf)
    nfev = 0
    out_flag = False

    if warm_start is None:
        U = np.zeros((p.Nc, 3))
        schedule = list(zip(cfg.solver.penalty_schedule, cfg.solver.max_iter))
    else:
        U = np.clip(_pad_sequence(warm_start, p.Nc), -vmax[None, :], vmax[None, :])
        schedule = [(rho_final, cfg.solver.warm_max_iter)]

    bounds = [(-vmax[j], vmax[j]) for _ in range(p.Nc) for j in range(3)]

    def make_objective(rho):
        def fun(x):
            nonlocal out_flag, nfev
            nfev += 1
            total, _, g, _, out = ws.kernel(x.reshape(p.Nc, 3), True, rho, u_prev)
            out_flag = out_flag or out
            return total, g.ravel()
        return fun

    def run_schedule(U0, sched):
        U_cur = U0
        for rho, iters in sched:
            res = minimize(make_objective(rho), U_cur.ravel(), jac=True,
                           method="L-BFGS-B", bounds=bounds,
                           options={"maxiter": iters, "ftol": 1e-12, "gtol": 1e-8})
            U_cur = res.x.reshape(p.Nc, 3)
        return U_cur

    def tnc_rescue(U0, rho):
        # The quasi-Newton line search occasionally aborts without progress
        # on the stiff final penalty; truncated Newton handles that curvature
        # reliably and cheaply.
        res = minimize(make_objective(rho), U0.ravel(), jac=True, method="TNC",
                       bounds=bounds, options={"maxfun": cfg.solver.retry_max_iter})
        return res.x.reshape(p.Nc, 3)

    U = run_schedule(U, schedule)
    max_res = ws.max_residual(U, u_prev)
    if max_res > cfg.solver.residual_tol:
        U = tnc_rescue(U, rho_final)
        max_res = ws.max_residual(U, u_prev)
        if max_res > cfg.solver.residual_tol:
            # Qualitatively wrong plan (e.g. the reference reversed): re-run
            # the whole continuation and rescue again, keep the better point.
            U2 = run_schedule(U, list(zip(cfg.solver.penalty_schedule,
                                          cfg.solver.max_iter)))
            U2 = tnc_rescue(U2, rho_final)
            max_res2 = ws.max_residual(U2, u_prev)
            if max_res2 < max_res:
                U, max_res = U2, max_res2

    vel_ok = bool(np.all(np.abs(U) <= vmax[None, :] + cfg.solver.bound_tol))
    feasible = vel_ok and max_res <= cfg.solver.residual_tol
    _, cost, _, _, out = ws.kernel(U, False, 0.0, _ZERO3)
    out_flag = out_flag or out

    if feasible:
        u0 = U[0].copy()
    else:
        u0 = np.zeros(3)
        if warm_start is not None:
            warm = _pad_sequence(warm_start, p.Nc)
            warm_ok = (np.all(np.abs(warm) <= vmax[None, :] + cfg.solver.bound_tol)
                       and ws.max_residual(warm, u_prev) <= cfg.solver.residual_tol)
            if warm_ok:
                u0 = warm[0].copy()

    return ControlResult(u0=u0, input_sequence=U, feasible=feasible,
                         solve_iterations=nfev, cost=float(cost),
                         max_residual=float(max_res), out_of_map=out_flag)


class MpcController:
    """Single-owner stateful wrapper: warm starts, the acceleration anchor and
    the keep-last-feasible-input fallback live here so the batch simulator and
    the teleop service share one behavior."""

    def __init__(self, params: MpcParams, cfg: ControllerConfig, esdf: Esdf):
        self.params = params
        self.cfg = cfg
        self.esdf = esdf
        self._warm = None
        self._u_applied = np.zeros(3)

    def step(self, x: RobotState, xdot_d) -> tuple[ControlResult, np.ndarray]:
        """Solve one cycle; returns (result, input actually applied)."""
        result = solve_mpc(x, xdot_d, self.params, self.cfg, self.esdf,
                           warm_start=self._warm, u_prev=self._u_applied)
        if result.feasible:
            applied = result.u0
        else:
            applied = self._u_applied.copy()
        # Shift the solution one step for the next cycle's warm start.
        self._warm = np.vstack([result.input_sequence[1:], result.input_sequence[-1:]])
        self._u_applied = applied.copy()
        return result, applied

    def reset(self):
        self._warm = None
        self._u_applied = np.zeros(3)
