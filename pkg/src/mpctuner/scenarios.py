"""Scripted user-input movements for simulation-based tuning.

A movement is a short sequence of constant reference twists applied from a
randomized collision-free start configuration. Direction is uniform on the
circle, magnitude is one of three joystick detents, and the rotational rate
is zero (scripted inputs are translational; rotation exists only in teleop).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .robot import JointConfig, JointLimits, RobotGeometry, forward_kinematics, sphere_centers
from .world import EnvironmentSpec, Esdf, build_esdf, builtin_environment

MAX_START_TRIES = 1000


class ScenarioError(RuntimeError):
    pass


@dataclass(frozen=True)
class Segment:
    twist: tuple[float, float, float]  # vx, vy, omega
    duration: float


@dataclass(frozen=True)
class Movement:
    id: int
    initial_joints: JointConfig
    segments: tuple[Segment, ...]
    T: float
    start_pose: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def twist_at(self, t: float) -> np.ndarray:
        """Reference twist active at time t (last segment persists to T)."""
        acc = 0.0
        for seg in self.segments:
            acc += seg.duration
            if t < acc:
                return np.asarray(seg.twist, dtype=float)
        return np.asarray(self.segments[-1].twist, dtype=float)


@dataclass(frozen=True)
class MovementSet:
    seed: int
    environment: dict
    v_max: float
    movements: tuple[Movement, ...]

    def __len__(self) -> int:
        return len(self.movements)

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "environment": self.environment,
                "v_max": self.v_max,
                "movements": [
                    {
                        "id": m.id,
                        "initial_joints": list(m.initial_joints.as_array()),
                        "segments": [{"twist": list(s.twist), "duration": s.duration}
                                     for s in m.segments],
                        "T": m.T,
                        "start_pose": list(m.start_pose),
                    }
                    for m in self.movements
                ],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "MovementSet":
        d = json.loads(text)
        movements = tuple(
            Movement(
                id=m["id"],
                initial_joints=JointConfig.from_array(m["initial_joints"]),
                segments=tuple(Segment(twist=tuple(s["twist"]), duration=s["duration"])
                               for s in m["segments"]),
                T=m["T"],
                start_pose=tuple(m["start_pose"]),
            )
            for m in d["movements"]
        )
        return cls(seed=d["seed"], environment=d["environment"], v_max=d["v_max"],
                   movements=movements)


def _sample_start(rng: np.random.Generator, limits: JointLimits, geom: RobotGeometry,
                  esdf: Esdf) -> JointConfig:
    lo = np.array(limits.position_min)
    hi = np.array(limits.position_max)
    for _ in range(MAX_START_TRIES):
        q = JointConfig.from_array(rng.uniform(lo, hi))
        sd, _, _ = esdf.query(sphere_centers(q, geom))
        if np.all(sd >= geom.sphere_radius):
            return q
    raise ScenarioError("environment too cluttered: no collision-free start found")


def generate_movements(seed: int, n_mov: int, n_segments: int, T: float,
                       env: EnvironmentSpec, geom: RobotGeometry,
                       v_max: float = 0.5,
                       limits: JointLimits | None = None) -> MovementSet:
    """Deterministically generate a movement corpus.

    Movement j draws from its own child stream of (seed, j), so a smaller
    corpus with the same seed is a prefix of a larger one.
    """
    if n_mov < 1 or n_segments < 1:
        raise ValueError("n_mov and n_segments must be >= 1")
    limits = limits or JointLimits()
    esdf = build_esdf(builtin_environment(env))
    magnitudes = np.array([v_max / 3.0, 2.0 * v_max / 3.0, v_max])
    movements = []
    for j in range(n_mov):
        rng = np.random.default_rng(np.random.SeedSequence([seed, j]))
        start = _sample_start(rng, limits, geom, esdf)
        segments = []
        for _ in range(n_segments):
            ang = rng.uniform(0.0, 2.0 * np.pi)
            mag = magnitudes[rng.integers(0, 3)]
            segments.append(Segment(twist=(mag * np.cos(ang), mag * np.sin(ang), 0.0),
                                    duration=T / n_segments))
        movements.append(Movement(id=j, initial_joints=start, segments=tuple(segments),
                                  T=T, start_pose=tuple(forward_kinematics(start, geom))))
    return MovementSet(seed=seed, environment=json.loads(env.to_json()), v_max=v_max,
                       movements=tuple(movements))


def describe(mset: MovementSet) -> str:
    """One row per movement: start pose and the commanded segment vectors."""
    header = f"{'id':>3}  {'start pose (x, y, th)':<28}  segments (vx, vy | s)"
    lines = [header, "-" * len(header)]
    for m in mset.movements:
        pose = "({:+.3f}, {:+.3f}, {:+.3f})".format(*m.start_pose)
        segs = "  ".join(
            f"({s.twist[0]:+.3f}, {s.twist[1]:+.3f} | {s.duration:g}s)" for s in m.segments
        )
        lines.append(f"{m.id:>3}  {pose:<28}  {segs}")
    return "\n".join(lines)
