"""Closed-loop executor: one movement through the controller, and the
aggregate evaluation of a parameter set over a whole corpus.

Solve timing goes through an injectable clock. The wall clock reports real
elapsed seconds; the model clock converts the solver's deterministic
evaluation count into synthetic seconds so batch runs (and their committed
golden objective values) are exactly reproducible.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from .controller import ControllerConfig, ControlResult, MpcController, MpcParams
from .metrics import (
    MetricVector,
    MetricWeights,
    NormalizationSpec,
    Trajectory,
    compute_metrics,
    normalized_objective,
)
from .robot import RobotState, sphere_centers_batch, step_kinematics
from .scenarios import Movement, MovementSet
from .world import Esdf

FAILURE_OBJECTIVE = 1.0  # worst value of the normalized objective


class WallClock:
    """Real monotonic timing."""

    def attribute(self, result: ControlResult, elapsed: float) -> float:
        return elapsed


class ModelClock:
    """Deterministic compute-cost model: seconds per solve grow linearly with
    the number of cost evaluations the solver spent. Constants are calibrated
    to the compiled kernel's measured throughput."""

    def __init__(self, base: float = 5.0e-4, per_eval: float = 7.0e-5):
        self.base = base
        self.per_eval = per_eval

    def attribute(self, result: ControlResult, elapsed: float) -> float:
        return self.base + self.per_eval * result.solve_iterations


@dataclass
class RunOutcome:
    trajectory: Trajectory
    success: bool
    infeasible_fraction: float
    min_sd: float


@dataclass
class EvalResult:
    params: MpcParams
    metrics: list[MetricVector]           # one entry per movement
    objectives: np.ndarray                # per-movement normalized objectives
    objective: float                      # mean, or the failure penalty
    n_succ: int
    bo_feasible: bool
    wall_time: float
    records: list[dict]                   # per-movement summary (JSONL rows)
    outcomes: list[RunOutcome] | None = None  # full trajectories on request


class TrajectoryRecorder:
    """Accumulates closed-loop samples; shared by the batch simulator and the
    teleop service so both record bit-identical trajectories."""

    def __init__(self, cfg: ControllerConfig, esdf: Esdf, initial_state: RobotState):
        self.cfg = cfg
        self.esdf = esdf
        self.rows: list[tuple] = []
        self._append(0.0, initial_state, np.zeros(3), 0.0, True)

    def _append(self, t, state, u, secs, feas):
        sd, _, _ = self.esdf.query(
            sphere_centers_batch(state.joints.as_array()[None, :], self.cfg.geometry))
        self.rows.append((t, tuple(state.ee_pose), tuple(state.joints.as_array()),
                          tuple(np.asarray(u, dtype=float)), sd[0].copy(), secs, feas))

    def record_tick(self, tick_index: int, state: RobotState, applied, secs: float,
                    feasible: bool):
        """Record the post-step state of tick ``tick_index`` (0-based)."""
        self._append((tick_index + 1) * self.cfg.Ts, state, applied, secs, feasible)

    @property
    def min_sd(self) -> float:
        return float(min(row[4].min() for row in self.rows))

    def build(self, t_F: float) -> Trajectory:
        n = len(self.rows)
        t = np.array([r[0] for r in self.rows])
        ee = np.array([r[1] for r in self.rows])
        q = np.array([r[2] for r in self.rows])
        u = np.array([r[3] for r in self.rows])
        distances = np.array([r[4] for r in self.rows])
        solve_time = np.array([r[5] for r in self.rows])
        feasible = np.array([r[6] for r in self.rows], dtype=bool)
        assert distances.shape == (n, self.cfg.geometry.n_spheres)
        return Trajectory(t=t, ee=ee, q=q, u=u, distances=distances,
                          solve_time=solve_time, feasible=feasible, t_F=t_F)


def run_movement(mv: Movement, params: MpcParams, cfg: ControllerConfig,
                 esdf: Esdf, clock=None) -> RunOutcome:
    """Execute one movement tick by tick and record the trajectory.

    On an infeasible solve the previously applied feasible input is held and
    the tick is counted; the run itself never aborts.
    """
    clock = clock or WallClock()
    geom = cfg.geometry
    n_ticks = int(round(mv.T / cfg.Ts))
    controller = MpcController(params, cfg, esdf)
    state = RobotState.from_joints(mv.initial_joints, geom)
    recorder = TrajectoryRecorder(cfg, esdf, state)

    n_infeasible = 0
    for k in range(n_ticks):
        twist = mv.twist_at(k * cfg.Ts)
        t0 = time.perf_counter()
        result, applied = controller.step(state, twist)
        secs = clock.attribute(result, time.perf_counter() - t0)
        if not result.feasible:
            n_infeasible += 1
        state = step_kinematics(state, applied, cfg.Ts, geom)
        recorder.record_tick(k, state, applied, secs, result.feasible)

    traj = recorder.build(mv.T)
    min_sd = recorder.min_sd
    success = n_infeasible == 0 and min_sd >= geom.sphere_radius
    return RunOutcome(trajectory=traj, success=success,
                      infeasible_fraction=n_infeasible / n_ticks, min_sd=min_sd)


def evaluate_params(params: MpcParams, mset: MovementSet, cfg: ControllerConfig,
                    esdf: Esdf, weights: MetricWeights, norms: NormalizationSpec,
                    clock=None, log_path=None, keep_trajectories: bool = False,
                    failure_objective: float = FAILURE_OBJECTIVE) -> EvalResult:
    """Run every movement of the corpus under one parameter set.

    The objective is the mean per-movement normalized objective. Any failed
    movement (infeasible solve or clearance below the sphere radius) replaces
    it with the failure penalty and flags the result infeasible for the tuner.
    """
    if len(mset) == 0:
        raise ValueError("empty movement set")
    clock = clock or WallClock()
    d_safe = cfg.geometry.sphere_radius
    t_start = time.perf_counter()
    all_metrics: list[MetricVector] = []
    objectives = np.zeros(len(mset))
    outcomes: list[RunOutcome] = []
    records = []
    n_succ = 0
    for i, mv in enumerate(mset.movements):
        outcome = run_movement(mv, params, cfg, esdf, clock=clock)
        m = compute_metrics(outcome.trajectory, d_safe=d_safe)
        all_metrics.append(m)
        objectives[i] = normalized_objective(m, weights, norms)
        n_succ += int(outcome.success)
        records.append({
            "movement": mv.id,
            "metrics": m.to_dict(),
            "objective": float(objectives[i]),
            "success": outcome.success,
            "infeasible_fraction": outcome.infeasible_fraction,
            "min_sd": outcome.min_sd,
        })
        if keep_trajectories:
            outcomes.append(outcome)
    bo_feasible = n_succ == len(mset)
    objective = float(np.mean(objectives)) if bo_feasible else failure_objective
    wall = time.perf_counter() - t_start
    if log_path is not None:
        with open(log_path, "w") as fh:
            header = {"params": params.to_dict(), "objective": objective,
                      "n_succ": n_succ, "n_mov": len(mset), "bo_feasible": bo_feasible}
            fh.write(json.dumps(header) + "\n")
            for rec in records:
                fh.write(json.dumps(rec) + "\n")
    return EvalResult(params=params, metrics=all_metrics, objectives=objectives,
                      objective=objective, n_succ=n_succ, bo_feasible=bo_feasible,
                      wall_time=wall, records=records,
                      outcomes=outcomes if keep_trajectories else None)
