import numpy as np
import pytest

from mpctuner.robot import (
    JointConfig,
    JointLimits,
    RobotGeometry,
    RobotState,
    forward_kinematics,
    jacobian,
    jacobian_batch,
    sphere_centers,
    sphere_centers_batch,
    sphere_jacobians_batch,
    step_kinematics,
)


def homogeneous(angle, tx, ty):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, tx], [s, c, ty], [0.0, 0.0, 1.0]])


def fk_oracle(q: JointConfig, geom: RobotGeometry):
    """Independent pose via composed homogeneous transforms."""
    T = homogeneous(geom.rail_angle, *geom.rail_origin)
    T = T @ homogeneous(0.0, q.q1, 0.0)
    T = T @ homogeneous(q.q2, 0.0, 0.0)
    T = T @ homogeneous(0.0, geom.link1_length, 0.0)
    T = T @ homogeneous(q.q3, 0.0, 0.0)
    T = T @ homogeneous(0.0, geom.link2_length, 0.0)
    theta = np.arctan2(T[1, 0], T[0, 0])
    return np.array([T[0, 2], T[1, 2], theta])


def sphere_oracle(q: JointConfig, geom: RobotGeometry):
    frames = []
    T = homogeneous(geom.rail_angle, *geom.rail_origin) @ homogeneous(0.0, q.q1, 0.0)
    frames.append(T)                                       # carriage
    T1 = T @ homogeneous(q.q2, 0.0, 0.0)
    frames.append(T1)                                      # link 1
    T2 = T1 @ homogeneous(0.0, geom.link1_length, 0.0) @ homogeneous(q.q3, 0.0, 0.0)
    frames.append(T2)                                      # link 2
    out = []
    for link, (ox, oy) in geom.spheres:
        p = frames[link] @ np.array([ox, oy, 1.0])
        out.append(p[:2])
    return np.array(out)


def random_config(rng, limits=JointLimits()):
    lo = np.array(limits.position_min)
    hi = np.array(limits.position_max)
    return JointConfig.from_array(rng.uniform(lo, hi))


class TestForwardKinematics:
    def test_straight_chain(self):
        geom = RobotGeometry(rail_origin=(0.0, -2.0), link1_length=1.0, link2_length=0.8)
        pose = forward_kinematics(JointConfig(0.0, 0.0, 0.0), geom)
        assert pose == pytest.approx([1.8, -2.0, 0.0])

    def test_chain_along_y(self):
        geom = RobotGeometry(rail_origin=(0.0, -2.0), link1_length=1.0, link2_length=0.8)
        pose = forward_kinematics(JointConfig(0.5, np.pi / 2, 0.0), geom)
        assert pose == pytest.approx([0.5, -0.2, np.pi / 2])

    def test_matches_transform_oracle(self, geom):
        rng = np.random.default_rng(0)
        for _ in range(50):
            q = random_config(rng)
            got = forward_kinematics(q, geom)
            want = fk_oracle(q, geom)
            assert np.allclose(got[:2], want[:2], atol=1e-12)
            # theta may differ by 2*pi wraps from atan2
            assert np.isclose(np.angle(np.exp(1j * (got[2] - want[2]))), 0.0, atol=1e-12)

    def test_rotated_rail(self):
        geom = RobotGeometry(rail_origin=(1.0, 2.0), rail_angle=0.7)
        rng = np.random.default_rng(1)
        for _ in range(20):
            q = random_config(rng)
            got = forward_kinematics(q, geom)
            want = fk_oracle(q, geom)
            assert np.allclose(got[:2], want[:2], atol=1e-12)


class TestJacobian:
    def test_prismatic_column(self, geom):
        rng = np.random.default_rng(2)
        for _ in range(10):
            J = jacobian(random_config(rng), geom)
            assert np.allclose(J[:, 0], [1.0, 0.0, 0.0])

    def test_theta_row(self, geom):
        J = jacobian(JointConfig(0.0, 0.0, 0.0), geom)
        assert np.allclose(J[2], [0.0, 1.0, 1.0])

    def test_finite_difference_100_configs(self, geom):
        rng = np.random.default_rng(3)
        h = 1e-6
        for _ in range(100):
            q = random_config(rng)
            J = jacobian(q, geom)
            Jfd = np.zeros((3, 3))
            for j in range(3):
                dq = np.zeros(3)
                dq[j] = h
                fp = forward_kinematics(JointConfig.from_array(q.as_array() + dq), geom)
                fm = forward_kinematics(JointConfig.from_array(q.as_array() - dq), geom)
                Jfd[:, j] = (fp - fm) / (2 * h)
            assert np.max(np.abs(J - Jfd)) < 1e-6


class TestSphereCenters:
    def test_zero_offset_at_link_origin(self):
        geom = RobotGeometry(spheres=tuple([(1, (0.0, 0.0))] + [(0, (0.1 * i, 0.0)) for i in range(11)]))
        c = sphere_centers(JointConfig(0.3, 0.2, 0.1), geom)
        assert np.allclose(c[0], [0.3, -2.0])

    def test_link1_tip_meets_link2_origin(self):
        geom = RobotGeometry(
            spheres=tuple([(1, (1.0, 0.0)), (2, (0.0, 0.0))] + [(0, (0.1 * i, 0.0)) for i in range(10)]))
        c = sphere_centers(JointConfig(0.0, 0.0, 0.0), geom)
        assert np.allclose(c[0], c[1])

    def test_matches_transform_oracle(self, geom):
        rng = np.random.default_rng(4)
        for _ in range(50):
            q = random_config(rng)
            got = sphere_centers(q, geom)
            want = sphere_oracle(q, geom)
            assert np.allclose(got, want, atol=1e-12)

    def test_translation_equivariance(self):
        rng = np.random.default_rng(5)
        q = random_config(rng)
        a = sphere_centers(q, RobotGeometry(rail_origin=(0.0, -2.0)))
        b = sphere_centers(q, RobotGeometry(rail_origin=(1.3, -0.7)))
        assert np.allclose(b - a, np.array([1.3, 1.3]))

    def test_jacobians_match_finite_differences(self, geom):
        rng = np.random.default_rng(6)
        h = 1e-7
        for _ in range(20):
            q = random_config(rng).as_array()
            J = sphere_jacobians_batch(q[None, :], geom)[0]
            for j in range(3):
                dq = np.zeros(3)
                dq[j] = h
                cp = sphere_centers_batch((q + dq)[None, :], geom)[0]
                cm = sphere_centers_batch((q - dq)[None, :], geom)[0]
                assert np.allclose(J[:, :, j], (cp - cm) / (2 * h), atol=1e-6)


class TestStepKinematics:
    def test_zero_input_identity(self, geom):
        x = RobotState.from_joints(JointConfig(0.1, 0.2, 0.3), geom)
        x2 = step_kinematics(x, np.zeros(3), 0.05, geom)
        assert x2.ee_pose == pytest.approx(x.ee_pose)
        assert x2.joints == x.joints

    def test_pure_rail_translation(self, geom):
        x = RobotState.from_joints(JointConfig(0.0, 0.0, 0.0), geom)
        x2 = step_kinematics(x, np.array([0.1, 0.0, 0.0]), 0.05, geom)
        assert x2.joints.q1 == pytest.approx(0.005)
        assert x2.ee_pose[0] == pytest.approx(x.ee_pose[0] + 0.005)
        assert x2.ee_pose[1] == pytest.approx(x.ee_pose[1])

    def test_small_step_matches_jacobian(self, geom):
        rng = np.random.default_rng(8)
        for _ in range(30):
            q = random_config(rng)
            x = RobotState.from_joints(q, geom)
            u = rng.uniform(-0.5, 0.5, 3)
            Ts = 1e-3
            x2 = step_kinematics(x, u, Ts, geom)
            lin = np.array(x.ee_pose) + Ts * (jacobian(q, geom) @ u)
            assert np.linalg.norm(np.array(x2.ee_pose) - lin) < 10 * Ts**2

    def test_state_invariant_preserved(self, geom):
        rng = np.random.default_rng(9)
        x = RobotState.from_joints(JointConfig(0.0, 1.0, -0.5), geom)
        for _ in range(200):
            x = step_kinematics(x, rng.uniform(-0.5, 0.5, 3), 0.05, geom)
            assert np.allclose(x.ee_pose, forward_kinematics(x.joints, geom), atol=1e-9)

    def test_rejects_nonpositive_dt(self, geom):
        x = RobotState.from_joints(JointConfig(0.0, 0.0, 0.0), geom)
        with pytest.raises(ValueError):
            step_kinematics(x, np.zeros(3), 0.0, geom)


class TestValidation:
    def test_geometry_requires_12_spheres(self):
        with pytest.raises(ValueError, match="12"):
            RobotGeometry(spheres=((0, (0.0, 0.0)),))

    def test_limits_positive(self):
        with pytest.raises(ValueError):
            JointLimits(velocity_max=(0.5, -0.1, 0.5))

    def test_batch_jacobian_consistency(self, geom):
        rng = np.random.default_rng(10)
        qs = np.array([random_config(rng).as_array() for _ in range(7)])
        Jb = jacobian_batch(qs, geom)
        for i in range(7):
            assert np.allclose(Jb[i], jacobian(JointConfig.from_array(qs[i]), geom))
