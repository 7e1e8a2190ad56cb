import numpy as np
import pytest
from scipy.spatial.transform import Rotation, Slerp

from triteleop.geometry import (OutOfInterval, Pose6, TimedSample, lerp_pose,
                                pose_delta, quat_angle_deg, quat_conj,
                                quat_from_euler_deg, quat_mul, quat_rotate,
                                quat_slerp, quat_to_matrix, wrap_deg)


def scipy_quat(q):
    """scalar-first -> scipy's scalar-last."""
    return Rotation.from_quat([q[1], q[2], q[3], q[0]])


def random_pose(rng, beta_cap=85.0):
    e = rng.uniform(-180, 180, 3)
    e[1] = rng.uniform(-beta_cap, beta_cap)
    return Pose6.from_euler(rng.uniform(-100, 100, 3), e)


def test_wrap_deg():
    assert wrap_deg(0.0) == 0.0
    assert wrap_deg(180.0) == 180.0
    assert wrap_deg(-180.0) == 180.0
    assert wrap_deg(190.0) == -170.0
    assert np.allclose(wrap_deg(np.array([360.0, -358.0])), [0.0, 2.0])


def test_quaternions_match_scipy():
    rng = np.random.default_rng(0)
    for _ in range(500):
        e = rng.uniform(-180, 180, 3)
        e[1] = rng.uniform(-85, 85)
        q = quat_from_euler_deg(e)
        r = scipy_quat(q)
        assert np.abs(quat_to_matrix(q) - r.as_matrix()).max() < 1e-12
        ref = Rotation.from_euler("XYZ", e, degrees=True).as_matrix()
        assert np.abs(quat_to_matrix(q) - ref).max() < 1e-12
        v = rng.normal(size=3)
        assert np.abs(quat_rotate(q, v) - r.apply(v)).max() < 1e-12


def test_euler_roundtrip_away_from_gimbal_lock():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        e = rng.uniform(-180, 180, 3)
        e[1] = rng.uniform(-85, 85)
        e2 = Pose6.from_euler(np.zeros(3), e).euler
        worst = max(worst, np.abs(wrap_deg(e2 - e)).max())
    assert worst < 1e-9


def test_unit_norm_invariant():
    rng = np.random.default_rng(2)
    q = quat_from_euler_deg([10, 20, 30])
    for _ in range(200):
        q = quat_mul(q, quat_from_euler_deg(rng.uniform(-5, 5, 3)))
        p = Pose6(np.zeros(3), q)
        assert abs(np.linalg.norm(p.q) - 1.0) < 1e-12
        q = p.q


def test_pose_delta_identity_exact_zero():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        a = random_pose(rng)
        dp, dth = pose_delta(a, a)
        assert np.all(dp == 0.0) and np.all(dth == 0.0)


def test_pose_delta_pure_translation():
    a = Pose6.from_euler([0, 0, 0], [10, -20, 30])
    b = Pose6.from_euler([1, 2, 3], [10, -20, 30])
    dp, dth = pose_delta(a, b)
    assert np.allclose(dp, [1, 2, 3])
    assert np.abs(dth).max() < 1e-9


def test_pose_delta_wraps_gamma():
    a = Pose6.from_euler([0, 0, 0], [0, 0, 179.0])
    b = Pose6.from_euler([0, 0, 0], [0, 0, -179.0])
    _, dth = pose_delta(a, b)
    assert abs(dth[2] - 2.0) < 1e-9
    # quaternion relative-rotation oracle: total angle of the relative
    # rotation must equal the wrapped component for a pure z difference
    rel = quat_mul(b.q, quat_conj(a.q))
    assert abs(quat_angle_deg(rel) - 2.0) < 1e-9


def test_lerp_endpoints_and_midpoint():
    a = TimedSample(1.0, Pose6.from_euler([0, 0, 0], [5, 10, 15]))
    b = TimedSample(2.0, Pose6.from_euler([10, 0, 0], [5, 10, 15]))
    p0 = lerp_pose(a, b, 1.0)
    p1 = lerp_pose(a, b, 2.0)
    assert np.all(p0.p == a.pose.p) and np.all(p1.p == b.pose.p)
    assert np.abs(p0.q - a.pose.q).max() < 1e-12
    assert np.abs(p1.q - b.pose.q).max() < 1e-12
    mid = lerp_pose(a, b, 1.5)
    assert abs(mid.p[0] - 5.0) < 1e-12


def test_lerp_rotation_slerp_oracle():
    a = TimedSample(0.0, Pose6.from_euler([0, 0, 0], [0, 0, 0]))
    b = TimedSample(1.0, Pose6.from_euler([0, 0, 0], [0, 0, 90]))
    mid = lerp_pose(a, b, 0.5)
    assert abs(mid.euler[2] - 45.0) < 1e-9
    # independent slerp oracle on random pairs
    rng = np.random.default_rng(4)
    for _ in range(100):
        qa = quat_from_euler_deg(rng.uniform(-170, 170, 3))
        qb = quat_from_euler_deg(rng.uniform(-170, 170, 3))
        u = rng.uniform()
        sl = Slerp([0, 1], Rotation.from_quat(
            [[qa[1], qa[2], qa[3], qa[0]], [qb[1], qb[2], qb[3], qb[0]]]))
        ref = sl(u).as_quat()
        ref = np.array([ref[3], ref[0], ref[1], ref[2]])
        got = quat_slerp(qa, qb, u)
        assert min(np.abs(got - ref).max(), np.abs(got + ref).max()) < 1e-12


def test_lerp_out_of_interval():
    a = TimedSample(0.0, Pose6.identity())
    b = TimedSample(1.0, Pose6.identity())
    with pytest.raises(OutOfInterval):
        lerp_pose(a, b, 1.5)
    with pytest.raises(OutOfInterval):
        lerp_pose(a, b, -0.1)
    with pytest.raises(OutOfInterval):
        lerp_pose(b, a, 0.5)


def test_twist_wrench_norms():
    from triteleop.geometry import Twist, Wrench
    t = Twist([3, 4, 0], [0, 0, 5])
    assert t.v_norm == 5.0 and t.w_norm == 5.0
    w = Wrench([1, 2, 2], [0, 3, 4])
    assert w.f_norm == 3.0 and w.tau_norm == 5.0
    with pytest.raises(ValueError):
        Twist([np.inf, 0, 0], [0, 0, 0])


def test_pose_vec7_roundtrip():
    p = Pose6.from_euler([1, 2, 3], [10, 20, 30])
    p2 = Pose6.from_vec7(p.as_vec7())
    assert np.all(p.p == p2.p) and np.all(p.q == p2.q)
