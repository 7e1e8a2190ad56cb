"""Shared geometric vocabulary: poses, twists, wrenches, timed samples.

Conventions used across the package:

* translations in millimeters, angles in degrees, time in seconds
* orientation as intrinsic X-Y-Z Euler angles (alpha, beta, gamma) with a
  unit-quaternion canonical form (scalar-first ``[w, x, y, z]``)
* world-frame rotation deltas compose on the left: ``q_new = dq * q_old``

All types are immutable values and safe to share between threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class OutOfInterval(ValueError):
    """Interpolation time outside the bracketing samples."""


def wrap_deg(angle):
    """Wrap an angle (scalar or array) into (-180, 180] degrees."""
    wrapped = (np.asarray(angle, dtype=float) + 180.0) % 360.0 - 180.0
    wrapped = np.where(wrapped == -180.0, 180.0, wrapped)
    return float(wrapped) if np.ndim(angle) == 0 else wrapped


# ---------------------------------------------------------------------------
# quaternion core (scalar-first, hand-rolled for the 1/10 kHz hot loops;
# validated against scipy.spatial.transform in the test suite)
# ---------------------------------------------------------------------------

def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    n = math.sqrt(float(np.dot(q, q)))
    if n == 0.0:
        raise ValueError("zero quaternion")
    q = q / n
    # canonical sign keeps logs and roundtrips deterministic
    if q[0] < 0.0:
        q = -q
    return q


def quat_mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q, v):
    """Rotate a 3-vector by a unit quaternion."""
    w, x, y, z = q
    u = np.array([x, y, z])
    uv = np.cross(u, np.asarray(v, dtype=float))
    return np.asarray(v, dtype=float) + 2.0 * (w * uv + np.cross(u, uv))


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_axis_angle(axis, angle_deg):
    axis = np.asarray(axis, dtype=float)
    n = math.sqrt(float(np.dot(axis, axis)))
    if n == 0.0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    half = math.radians(angle_deg) * 0.5
    s = math.sin(half) / n
    return np.array([math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s])


def quat_to_rotvec_deg(q):
    """Rotation vector (axis * angle, degrees) of a unit quaternion."""
    w, x, y, z = quat_normalize(q)
    sin_half = math.sqrt(x * x + y * y + z * z)
    if sin_half < 1e-15:
        return np.zeros(3)
    angle = 2.0 * math.atan2(sin_half, w)
    return np.array([x, y, z]) * (math.degrees(angle) / sin_half)


def quat_angle_deg(q):
    """Rotation angle of a unit quaternion in degrees, in [0, 180]."""
    w, x, y, z = q
    sin_half = math.sqrt(x * x + y * y + z * z)
    return math.degrees(2.0 * math.atan2(sin_half, abs(w)))


def quat_from_euler_deg(euler):
    """Quaternion for intrinsic X-Y-Z Euler angles in degrees."""
    ha, hb, hg = (math.radians(v) * 0.5 for v in euler)
    qx = np.array([math.cos(ha), math.sin(ha), 0.0, 0.0])
    qy = np.array([math.cos(hb), 0.0, math.sin(hb), 0.0])
    qz = np.array([math.cos(hg), 0.0, 0.0, math.sin(hg)])
    return quat_normalize(quat_mul(quat_mul(qx, qy), qz))


def euler_from_quat_deg(q):
    """Intrinsic X-Y-Z Euler angles (degrees) of a unit quaternion.

    At gimbal lock (|beta| = 90 deg) gamma is fixed to 0 and the remaining
    freedom goes to alpha.
    """
    m = quat_to_matrix(q)
    sb = max(-1.0, min(1.0, m[0, 2]))
    beta = math.asin(sb)
    if abs(sb) < 1.0 - 1e-12:
        alpha = math.atan2(-m[1, 2], m[2, 2])
        gamma = math.atan2(-m[0, 1], m[0, 0])
    else:
        alpha = math.atan2(math.copysign(1.0, sb) * m[1, 0], m[1, 1])
        gamma = 0.0
    return np.degrees([alpha, beta, gamma])


def quat_slerp(qa, qb, u):
    """Shortest-arc spherical interpolation between unit quaternions."""
    qa = np.asarray(qa, dtype=float)
    qb = np.asarray(qb, dtype=float)
    dot = float(np.dot(qa, qb))
    if dot < 0.0:
        qb = -qb
        dot = -dot
    if dot > 1.0 - 1e-12:
        return quat_normalize(qa + u * (qb - qa))
    omega = math.acos(min(1.0, dot))
    so = math.sin(omega)
    return quat_normalize(
        (math.sin((1.0 - u) * omega) / so) * qa + (math.sin(u * omega) / so) * qb
    )


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Pose6:
    """6-DOF pose: translation (mm) plus orientation quaternion."""

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).reshape(3).copy()
        q = quat_normalize(np.asarray(self.q, dtype=float).reshape(4))
        p.flags.writeable = False
        q.flags.writeable = False
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @classmethod
    def from_euler(cls, p, euler_deg) -> "Pose6":
        return cls(np.asarray(p, dtype=float), quat_from_euler_deg(euler_deg))

    @classmethod
    def identity(cls) -> "Pose6":
        return cls(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    @property
    def euler(self) -> np.ndarray:
        """Orientation as intrinsic X-Y-Z Euler angles in degrees."""
        return euler_from_quat_deg(self.q)

    @property
    def matrix(self) -> np.ndarray:
        return quat_to_matrix(self.q)

    def as_vec6(self) -> np.ndarray:
        return np.concatenate([self.p, self.euler])

    def as_vec7(self) -> list:
        """[x, y, z, qw, qx, qy, qz] for wire/state serialization."""
        return [*self.p.tolist(), *self.q.tolist()]

    @classmethod
    def from_vec7(cls, v) -> "Pose6":
        v = list(v)
        return cls(np.array(v[:3], dtype=float), np.array(v[3:7], dtype=float))

    def translated(self, dp) -> "Pose6":
        return Pose6(self.p + np.asarray(dp, dtype=float), self.q)

    def rotated_world(self, dq) -> "Pose6":
        """Apply a world-frame rotation increment (left multiplication)."""
        return Pose6(self.p, quat_mul(dq, self.q))


@dataclass(frozen=True, eq=False)
class Twist:
    """Linear (mm/s) and angular (deg/s) velocity pair."""

    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float).reshape(3).copy()
        w = np.asarray(self.w, dtype=float).reshape(3).copy()
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
            raise ValueError("twist components must be finite")
        v.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)

    @classmethod
    def zero(cls) -> "Twist":
        return cls(np.zeros(3), np.zeros(3))

    @property
    def v_norm(self) -> float:
        return float(np.linalg.norm(self.v))

    @property
    def w_norm(self) -> float:
        return float(np.linalg.norm(self.w))

    def as_vec6(self) -> np.ndarray:
        return np.concatenate([self.v, self.w])


@dataclass(frozen=True, eq=False)
class Wrench:
    """Force (N) and torque (N*m) pair."""

    F: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float).reshape(3).copy()
        tau = np.asarray(self.tau, dtype=float).reshape(3).copy()
        F.flags.writeable = False
        tau.flags.writeable = False
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "tau", tau)

    @classmethod
    def zero(cls) -> "Wrench":
        return cls(np.zeros(3), np.zeros(3))

    @property
    def f_norm(self) -> float:
        return float(np.linalg.norm(self.F))

    @property
    def tau_norm(self) -> float:
        return float(np.linalg.norm(self.tau))

    def as_vec6(self) -> np.ndarray:
        return np.concatenate([self.F, self.tau])


@dataclass(frozen=True, eq=False)
class TimedSample:
    """A pose stamped on the monotonic clock of its stream."""

    t: float
    pose: Pose6


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def pose_delta(a: Pose6, b: Pose6):
    """Translation difference (mm) and per-axis minimal Euler-angle
    difference (deg, each component wrapped into (-180, 180])."""
    dp = b.p - a.p
    dtheta = wrap_deg(b.euler - a.euler)
    return dp, dtheta


def lerp_pose(a: TimedSample, b: TimedSample, t: float) -> Pose6:
    """Interpolate between two timed samples: linear on translation,
    spherical (shortest arc) on orientation."""
    if a.t >= b.t:
        raise OutOfInterval(f"degenerate interval [{a.t}, {b.t}]")
    if t < a.t or t > b.t:
        raise OutOfInterval(f"t={t} outside [{a.t}, {b.t}]")
    u = (t - a.t) / (b.t - a.t)
    p = (1.0 - u) * a.pose.p + u * b.pose.p
    q = quat_slerp(a.pose.q, b.pose.q, u)
    return Pose6(p, q)
