"""Planar kinematic model of the rail-mounted 3-joint arm.

Joints: prismatic carriage q1 along the rail, revolute shoulder q2, revolute
elbow q3. The body is approximated by 12 collision spheres grouped on the
carriage and the two links. Everything here is a pure function over an
immutable geometry.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class JointLimits:
    """Per-joint motion limits plus the end-effector speed bound (SI units)."""

    position_min: tuple[float, float, float] = (-2.0, -np.pi, -np.pi)
    position_max: tuple[float, float, float] = (2.0, np.pi, np.pi)
    velocity_max: tuple[float, float, float] = (0.5, 0.5, 0.5)
    acceleration_max: tuple[float, float, float] = (2.0, 2.0, 2.0)
    jerk_max: tuple[float, float, float] = (20.0, 20.0, 20.0)
    ee_speed_max: float = 0.6

    def __post_init__(self):
        for name in ("velocity_max", "acceleration_max", "jerk_max"):
            if any(v <= 0 for v in getattr(self, name)):
                raise ValueError(f"{name} entries must be positive")
        if self.ee_speed_max <= 0:
            raise ValueError("ee_speed_max must be positive")

    def as_arrays(self):
        return (np.array(self.position_min), np.array(self.position_max),
                np.array(self.velocity_max), np.array(self.acceleration_max),
                np.array(self.jerk_max))


def _default_spheres() -> tuple[tuple[int, tuple[float, float]], ...]:
    # Four spheres per structural group: carriage (link 0), link 1, link 2.
    carriage = [(0, (dx, 0.0)) for dx in (-0.3, -0.1, 0.1, 0.3)]
    link1 = [(1, (s * 1.0, 0.0)) for s in (0.125, 0.375, 0.625, 0.875)]
    link2 = [(2, (s * 0.8, 0.0)) for s in (0.125, 0.375, 0.625, 0.875)]
    return tuple(carriage + link1 + link2)


@dataclass(frozen=True)
class RobotGeometry:
    """Rail placement, link lengths and the collision-sphere layout."""

    rail_origin: tuple[float, float] = (0.0, -2.0)
    rail_angle: float = 0.0  # rail direction w.r.t. world x-axis
    link1_length: float = 1.0
    link2_length: float = 0.8
    spheres: tuple[tuple[int, tuple[float, float]], ...] = field(default_factory=_default_spheres)
    sphere_radius: float = 0.4

    def __post_init__(self):
        if len(self.spheres) != 12:
            raise ValueError("geometry must define exactly 12 collision spheres")
        if self.sphere_radius <= 0:
            raise ValueError("sphere_radius must be positive")

    @property
    def n_spheres(self) -> int:
        return len(self.spheres)


@dataclass(frozen=True)
class JointConfig:
    q1: float
    q2: float
    q3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.q1, self.q2, self.q3])

    @classmethod
    def from_array(cls, q) -> "JointConfig":
        return cls(float(q[0]), float(q[1]), float(q[2]))


@dataclass(frozen=True)
class RobotState:
    """End-effector pose paired with the joint configuration it came from.

    The pose is redundant and always recomputed from the joints; use
    ``from_joints`` so the two halves cannot drift apart.
    """

    ee_pose: tuple[float, float, float]
    joints: JointConfig

    @classmethod
    def from_joints(cls, joints: JointConfig, geom: RobotGeometry) -> "RobotState":
        return cls(ee_pose=tuple(forward_kinematics(joints, geom)), joints=joints)


def forward_kinematics(q: JointConfig, geom: RobotGeometry) -> np.ndarray:
    """End-effector pose (x, y, theta) of the planar chain."""
    phi = geom.rail_angle
    a2 = phi + q.q2
    a23 = a2 + q.q3
    x = geom.rail_origin[0] + q.q1 * np.cos(phi) \
        + geom.link1_length * np.cos(a2) + geom.link2_length * np.cos(a23)
    y = geom.rail_origin[1] + q.q1 * np.sin(phi) \
        + geom.link1_length * np.sin(a2) + geom.link2_length * np.sin(a23)
    return np.array([x, y, phi + q.q2 + q.q3])


def fk_batch(q: np.ndarray, geom: RobotGeometry) -> np.ndarray:
    """forward_kinematics over an (N, 3) array of joint vectors -> (N, 3)."""
    q = np.asarray(q, dtype=float)
    phi = geom.rail_angle
    a2 = phi + q[:, 1]
    a23 = a2 + q[:, 2]
    x = geom.rail_origin[0] + q[:, 0] * np.cos(phi) \
        + geom.link1_length * np.cos(a2) + geom.link2_length * np.cos(a23)
    y = geom.rail_origin[1] + q[:, 0] * np.sin(phi) \
        + geom.link1_length * np.sin(a2) + geom.link2_length * np.sin(a23)
    return np.stack([x, y, phi + q[:, 1] + q[:, 2]], axis=1)


def jacobian(q: JointConfig, geom: RobotGeometry) -> np.ndarray:
    """Analytic 3x3 end-effector Jacobian mapping q-dot to (xdot, ydot, thetadot)."""
    return jacobian_batch(q.as_array()[None, :], geom)[0]


def jacobian_batch(q: np.ndarray, geom: RobotGeometry) -> np.ndarray:
    """jacobian over an (N, 3) array -> (N, 3, 3)."""
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    phi = geom.rail_angle
    l1, l2 = geom.link1_length, geom.link2_length
    a2 = phi + q[:, 1]
    a23 = a2 + q[:, 2]
    s2, c2 = np.sin(a2), np.cos(a2)
    s23, c23 = np.sin(a23), np.cos(a23)
    J = np.zeros((n, 3, 3))
    J[:, 0, 0] = np.cos(phi)
    J[:, 1, 0] = np.sin(phi)
    J[:, 0, 1] = -l1 * s2 - l2 * s23
    J[:, 0, 2] = -l2 * s23
    J[:, 1, 1] = l1 * c2 + l2 * c23
    J[:, 1, 2] = l2 * c23
    J[:, 2, 1] = 1.0
    J[:, 2, 2] = 1.0
    return J


def jacobian_dq_batch(q: np.ndarray, geom: RobotGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Derivatives of the Jacobian w.r.t. q2 and q3, each (N, 3, 3).

    Needed for the exact gradient of the tracking cost; dJ/dq1 is zero.
    """
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    phi = geom.rail_angle
    l1, l2 = geom.link1_length, geom.link2_length
    a2 = phi + q[:, 1]
    a23 = a2 + q[:, 2]
    s2, c2 = np.sin(a2), np.cos(a2)
    s23, c23 = np.sin(a23), np.cos(a23)
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
    return dJ2, dJ3


class SphereModel:
    """Vectorized sphere-center kinematics with the per-link layout gathered
    into index arrays once; this sits on the controller's hot path."""

    def __init__(self, geom: RobotGeometry):
        self.geom = geom
        links = np.array([link for link, _ in geom.spheres])
        self.off = np.array([off for _, off in geom.spheres])  # (12, 2)
        self.idx = [np.where(links == i)[0] for i in range(3)]

    def centers(self, q: np.ndarray, with_jacobians: bool = False):
        """Centers (N, 12, 2) and optionally d(center)/dq (N, 12, 2, 3)."""
        geom = self.geom
        q = np.asarray(q, dtype=float)
        n = q.shape[0]
        phi = geom.rail_angle
        cphi, sphi = np.cos(phi), np.sin(phi)
        base_x = geom.rail_origin[0] + q[:, 0] * cphi
        base_y = geom.rail_origin[1] + q[:, 0] * sphi
        a2 = phi + q[:, 1]
        a23 = a2 + q[:, 2]
        c2, s2 = np.cos(a2), np.sin(a2)
        c23, s23 = np.cos(a23), np.sin(a23)
        l1 = geom.link1_length

        centers = np.empty((n, geom.n_spheres, 2))
        i0, i1, i2 = self.idx
        ox0, oy0 = self.off[i0, 0], self.off[i0, 1]
        centers[:, i0, 0] = base_x[:, None] + cphi * ox0 - sphi * oy0
        centers[:, i0, 1] = base_y[:, None] + sphi * ox0 + cphi * oy0
        ox1, oy1 = self.off[i1, 0], self.off[i1, 1]
        centers[:, i1, 0] = base_x[:, None] + c2[:, None] * ox1 - s2[:, None] * oy1
        centers[:, i1, 1] = base_y[:, None] + s2[:, None] * ox1 + c2[:, None] * oy1
        ox2, oy2 = self.off[i2, 0], self.off[i2, 1]
        elbow_x = base_x + l1 * c2
        elbow_y = base_y + l1 * s2
        centers[:, i2, 0] = elbow_x[:, None] + c23[:, None] * ox2 - s23[:, None] * oy2
        centers[:, i2, 1] = elbow_y[:, None] + s23[:, None] * ox2 + c23[:, None] * oy2
        if not with_jacobians:
            return centers, None

        # d(rotated offset)/d(angle) = R(angle + pi/2) offset.
        J = np.zeros((n, geom.n_spheres, 2, 3))
        J[:, :, 0, 0] = cphi
        J[:, :, 1, 0] = sphi
        d1x = -s2[:, None] * ox1 - c2[:, None] * oy1
        d1y = c2[:, None] * ox1 - s2[:, None] * oy1
        J[:, i1, 0, 1] = d1x
        J[:, i1, 1, 1] = d1y
        d2x = -s23[:, None] * ox2 - c23[:, None] * oy2
        d2y = c23[:, None] * ox2 - s23[:, None] * oy2
        J[:, i2, 0, 1] = -l1 * s2[:, None] + d2x
        J[:, i2, 1, 1] = l1 * c2[:, None] + d2y
        J[:, i2, 0, 2] = d2x
        J[:, i2, 1, 2] = d2y
        return centers, J


def sphere_centers(q: JointConfig, geom: RobotGeometry) -> np.ndarray:
    """World positions of the 12 collision-sphere centers, shape (12, 2)."""
    return sphere_centers_batch(q.as_array()[None, :], geom)[0]


def sphere_centers_batch(q: np.ndarray, geom: RobotGeometry) -> np.ndarray:
    """sphere_centers over an (N, 3) array -> (N, 12, 2), ordered by sphere index."""
    centers, _ = SphereModel(geom).centers(q)
    return centers


def sphere_jacobians_batch(q: np.ndarray, geom: RobotGeometry) -> np.ndarray:
    """d(center)/dq for every sphere: (N, 12, 2, 3)."""
    _, J = SphereModel(geom).centers(q, with_jacobians=True)
    return J


def step_kinematics(x: RobotState, u, Ts: float, geom: RobotGeometry) -> RobotState:
    """One zero-order-hold integration step of the joint velocities.

    The pose is recomputed from the new joints rather than Euler-integrated,
    so the RobotState redundancy never drifts.
    """
    if Ts <= 0:
        raise ValueError("Ts must be positive")
    q_next = x.joints.as_array() + Ts * np.asarray(u, dtype=float)
    return RobotState.from_joints(JointConfig.from_array(q_next), geom)
