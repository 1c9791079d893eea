"""Six trajectory performance metrics and the weighted normalized objective.

Safety: closest obstacle approach and time spent near obstacles. Smoothness:
end-effector path smoothness, curvature change, joint velocity smoothness.
Efficiency: average controller computation time. Each metric maps to [0, 1]
through fixed reference scales before the weighted sum, since the raw units
are incompatible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Below this end-effector speed the curvature omega/v is numerically undefined.
CURVATURE_SPEED_FLOOR = 0.01


class MetricError(ValueError):
    """Raised when a trajectory cannot support a metric."""


@dataclass(frozen=True)
class Trajectory:
    """Sampled closed-loop record, stored column-wise.

    Arrays share the leading sample axis: times, end-effector poses, joints,
    applied joint velocities, per-sphere signed distances, per-sample solver
    wall time and feasibility. Sample 0 is the pre-motion state (zero input,
    zero solve time).
    """

    t: np.ndarray             # (N,)
    ee: np.ndarray            # (N, 3) pose x, y, theta
    q: np.ndarray             # (N, 3)
    u: np.ndarray             # (N, 3) applied joint velocities
    distances: np.ndarray     # (N, 12) per-sphere signed distances
    solve_time: np.ndarray    # (N,) seconds
    feasible: np.ndarray      # (N,) bool
    t_F: float

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.size == 0:
            raise MetricError("empty trajectory")
        if np.any(np.diff(t) <= 0):
            raise MetricError("sample times must be strictly increasing")
        if self.t_F <= 0:
            raise MetricError("t_F must be positive")

    @property
    def n_samples(self) -> int:
        return self.t.shape[0]


@dataclass(frozen=True)
class MetricVector:
    d_ob: float    # m
    t_ob: float    # percent
    f_ps: float    # m
    f_cc: float    # rad/m
    f_vs: float    # sign flips per sample
    t_C: float     # ms
    degenerate_curvature: bool = False

    def as_array(self) -> np.ndarray:
        return np.array([self.d_ob, self.t_ob, self.f_ps, self.f_cc, self.f_vs, self.t_C])

    def to_dict(self) -> dict:
        return {"d_ob": self.d_ob, "t_ob": self.t_ob, "f_ps": self.f_ps,
                "f_cc": self.f_cc, "f_vs": self.f_vs, "t_C": self.t_C}


METRIC_NAMES = ("d_ob", "t_ob", "f_ps", "f_cc", "f_vs", "t_C")

# True where a larger raw value is better (only the clearance metric).
LARGER_IS_BETTER = (True, False, False, False, False, False)


@dataclass(frozen=True)
class MetricWeights:
    w: tuple[float, float, float, float, float, float] = (0.15, 0.30, 0.15, 0.25, 0.10, 0.05)

    def __post_init__(self):
        if any(v < 0 for v in self.w):
            raise ValueError("weights must be non-negative")
        if abs(sum(self.w) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")


@dataclass(frozen=True)
class NormalizationSpec:
    """Reference scales mapping each metric onto [0, 1] (clamped)."""

    d_ref: float = 1.0        # m of clearance considered "safe enough"
    t_ob_ref: float = 100.0   # percent
    f_ps_ref: float = 1e-4    # m
    f_cc_ref: float = 200.0   # rad/m
    f_vs_ref: float = 2.0
    t_C_ref: float = 200.0    # ms


def obstacle_proximity(traj: Trajectory) -> float:
    """Closest approach over all samples and all spheres."""
    if traj.distances.size == 0:
        raise MetricError("empty trajectory")
    return float(np.min(traj.distances))


def time_near_obstacles(traj: Trajectory, d_safe: float = 0.4) -> float:
    """Percentage of the movement spent with any sphere within d_safe.

    Each sample owns the interval up to the next sample; the last sample owns
    whatever remains of t_F. Durations are measured from the first sample so
    the metric is invariant to uniform time shifts.
    """
    if traj.t_F <= 0:
        raise MetricError("t_F must be positive")
    below = np.min(traj.distances, axis=1) <= d_safe
    rel_t = traj.t - traj.t[0]
    weights = np.empty_like(rel_t)
    weights[:-1] = np.diff(rel_t)
    weights[-1] = max(0.0, traj.t_F - rel_t[-1])
    return float(np.sum(weights[below]) / traj.t_F * 100.0)


def path_smoothness(traj: Trajectory) -> float:
    """Sum of squared consecutive-displacement changes per unit path length."""
    n = traj.n_samples
    if n < 3:
        raise MetricError("need at least 3 samples")
    p = traj.ee[:, :2]
    d = np.diff(p, axis=0)
    s = float(np.sum(np.linalg.norm(d, axis=1)))
    if s < 1e-9:
        return 0.0
    jumps = np.diff(d, axis=0)
    return float(np.sum(jumps**2) / s)


def curvature_change(traj: Trajectory) -> tuple[float, bool]:
    """Total curvature variation per unit path length.

    Curvature kappa = |omega / v| from finite-difference velocities; samples
    slower than CURVATURE_SPEED_FLOOR are excluded. Returns (value, degenerate)
    where degenerate means fewer than 3 usable curvature samples.
    """
    n = traj.n_samples
    if n < 3:
        raise MetricError("need at least 3 samples")
    p = traj.ee[:, :2]
    dt = np.diff(traj.t)
    d = np.diff(p, axis=0)
    seg = np.linalg.norm(d, axis=1)
    s = float(np.sum(seg))
    v = seg / dt
    omega = np.diff(traj.ee[:, 2]) / dt
    usable = v >= CURVATURE_SPEED_FLOOR
    kappa = np.abs(omega[usable] / v[usable])
    if kappa.size < 3:
        return 0.0, True
    if s < 1e-9:
        return 0.0, True
    return float(np.sum(np.abs(np.diff(kappa))) / s), False


def velocity_smoothness(traj: Trajectory) -> float:
    """Zero-crossing rate of the joint accelerations, averaged over joints.

    Accelerations are forward differences of the applied joint velocities;
    consecutive acceleration sign flips are summed and scaled by 1/(N-1),
    with sign(0) = 0.
    """
    n = traj.n_samples
    if n < 3:
        raise MetricError("need at least 3 samples")
    dt = np.diff(traj.t)[:, None]
    acc = np.diff(traj.u, axis=0) / dt
    signs = np.sign(acc)
    flips = np.abs(np.diff(signs, axis=0))
    per_joint = flips.sum(axis=0) / (n - 1)
    return float(np.mean(per_joint))


def avg_computation_time(traj: Trajectory) -> float:
    """Mean solver wall time per sample, in milliseconds."""
    if traj.solve_time.size == 0:
        raise MetricError("empty trajectory")
    return float(np.mean(traj.solve_time) * 1000.0)


def compute_metrics(traj: Trajectory, d_safe: float = 0.4) -> MetricVector:
    """Evaluate all six metrics on one trajectory."""
    f_cc, degenerate = curvature_change(traj)
    return MetricVector(
        d_ob=obstacle_proximity(traj),
        t_ob=time_near_obstacles(traj, d_safe),
        f_ps=path_smoothness(traj),
        f_cc=f_cc,
        f_vs=velocity_smoothness(traj),
        t_C=avg_computation_time(traj),
        degenerate_curvature=degenerate,
    )


def normalize_metrics(metrics: MetricVector, norms: NormalizationSpec) -> np.ndarray:
    """Map each metric onto [0, 1] where 0 is best.

    Clearance is direction-corrected: more clearance (up to d_ref) means a
    smaller cost; every other metric is a clamped ratio to its reference.
    """
    raw = metrics.as_array()
    if not np.all(np.isfinite(raw)):
        raise MetricError(f"non-finite metric value in {raw}")
    refs = np.array([norms.d_ref, norms.t_ob_ref, norms.f_ps_ref,
                     norms.f_cc_ref, norms.f_vs_ref, norms.t_C_ref])
    scaled = raw / refs
    scaled[0] = (norms.d_ref - min(metrics.d_ob, norms.d_ref)) / norms.d_ref
    return np.clip(scaled, 0.0, 1.0)


def normalized_objective(metrics: MetricVector, weights: MetricWeights,
                         norms: NormalizationSpec) -> float:
    """Weighted sum of the normalized metrics; 0 is ideal, 1 is worst."""
    return float(np.dot(np.array(weights.w), normalize_metrics(metrics, norms)))
