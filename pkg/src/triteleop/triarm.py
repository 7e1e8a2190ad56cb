"""Parametric kinematics of the 3-armed 6-DOF parallel follower robot.

Each arm is a revolute(active)-universal-prismatic(active)-spherical chain
between a fixed ring and the moving ring.  The revolute axis is tangent to
the fixed ring at the arm's anchor; the prismatic joint is the leg itself.
For a leg vector ``l_i`` from fixed anchor to moving anchor:

* ``d_i``     = ``|l_i|``                        (prismatic length, mm)
* ``theta_i`` = angle of ``l_i`` in the arm's (inward-radial, vertical)
                plane (deg); the universal joint absorbs the out-of-plane
                component
* ``cone_i``  = angle between ``l_i`` and the moving-ring normal (deg),
                limited by the spherical joint

Forward kinematics is damped Newton iteration on the IK residual; there is
no closed form for this class of mechanism.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import (Pose6, quat_from_axis_angle, quat_mul, quat_normalize,
                       quat_to_matrix, wrap_deg)

DEG = math.pi / 180.0

_JAC_FD_STEP = 1e-6          # mm / deg, central differences for theta rows
_SINGULAR_COND = 1e12


class DegenerateLeg(ValueError):
    """A leg vector collapsed below solvable length."""


class NoConvergence(RuntimeError):
    """Newton forward kinematics failed (iteration cap or singular step)."""


@dataclass(frozen=True, eq=False)
class TriarmGeometry:
    """Ring radii, anchor layout and joint limits (mm / deg).

    The defaults are a plausible mid-scale stand-in that preserves the
    actuator stroke (214-354 mm) and the 25 deg spherical cone; every field
    is overridable from the run config.

    The moving-ring anchors sit 20 deg ahead of the fixed-ring anchors by
    default.  With the rings aligned, torsion about the platform normal
    moves every anchor tangentially, which changes neither leg lengths nor
    in-plane leg angles to first order: the symmetric home pose is exactly
    singular.  The tangential offset makes the legs weave (as on any
    6-legged platform) so torsion loads the leg lengths, keeping the
    Jacobian condition number around 10-20 across the workspace.
    """

    fixed_radius: float = 180.0
    moving_radius: float = 120.0
    anchor_deg: tuple = (0.0, 120.0, 240.0)
    moving_anchor_deg: tuple = (20.0, 140.0, 260.0)
    home_height: float = 284.0
    d_min: float = 214.0
    d_max: float = 354.0
    cone_limit_deg: float = 25.0
    theta_min_deg: float = 10.0
    theta_max_deg: float = 170.0

    def __post_init__(self):
        if self.fixed_radius <= 0 or self.moving_radius <= 0:
            raise ValueError("ring radii must be positive")
        if self.d_min >= self.d_max:
            raise ValueError("d_min must be below d_max")
        if len(self.anchor_deg) != 3 or len(self.moving_anchor_deg) != 3:
            raise ValueError("exactly three arms required")

    @cached_property
    def anchors_fixed(self) -> np.ndarray:
        """(3,3) anchor points on the fixed ring (base frame, z=0 plane)."""
        ang = np.radians(self.anchor_deg)
        return self.fixed_radius * np.stack(
            [np.cos(ang), np.sin(ang), np.zeros(3)], axis=1)

    @cached_property
    def anchors_moving(self) -> np.ndarray:
        """(3,3) anchor points on the moving ring (body frame)."""
        ang = np.radians(self.moving_anchor_deg)
        return self.moving_radius * np.stack(
            [np.cos(ang), np.sin(ang), np.zeros(3)], axis=1)

    @cached_property
    def frame_m(self) -> np.ndarray:
        """(3,3) inward radial unit vector per arm (theta reference)."""
        ang = np.radians(self.anchor_deg)
        return -np.stack([np.cos(ang), np.sin(ang), np.zeros(3)], axis=1)

    @cached_property
    def frame_n(self) -> np.ndarray:
        """(3,3) vertical unit vector per arm."""
        return np.tile(np.array([0.0, 0.0, 1.0]), (3, 1))

    @cached_property
    def frame_e(self) -> np.ndarray:
        """(3,3) revolute axis per arm: tangent to the fixed ring."""
        ang = np.radians(self.anchor_deg)
        return np.stack([-np.sin(ang), np.cos(ang), np.zeros(3)], axis=1)

    @property
    def home_pose(self) -> Pose6:
        return Pose6(np.array([0.0, 0.0, self.home_height]),
                     np.array([1.0, 0.0, 0.0, 0.0]))


@dataclass(frozen=True, eq=False)
class JointVector:
    """Active joint values: three revolute angles (deg), three leg lengths
    (mm), ordered arm 0..2."""

    th: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.th, dtype=float).reshape(3).copy()
        d = np.asarray(self.d, dtype=float).reshape(3).copy()
        th.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "th", th)
        object.__setattr__(self, "d", d)

    def as_vec6(self) -> np.ndarray:
        return np.concatenate([self.th, self.d])

    @classmethod
    def from_vec6(cls, v) -> "JointVector":
        v = np.asarray(v, dtype=float).reshape(6)
        return cls(v[:3], v[3:])


@dataclass(frozen=True, eq=False)
class Jacobian:
    """6x6 map from end-effector twist [v (mm/s); w (deg/s)] to joint rates
    [theta_dot (deg/s); d_dot (mm/s)].  ``cond`` is reported alongside; a
    condition number above 1e12 sets ``singular`` instead of raising."""

    matrix: np.ndarray
    cond: float

    @property
    def singular(self) -> bool:
        return not math.isfinite(self.cond) or self.cond > _SINGULAR_COND


def _leg_quantities(p, rot, g: TriarmGeometry):
    """Vectorized leg solution.

    p: (..., 3) translation; rot: (..., 3, 3) rotation matrices.
    Returns (legs, d, theta, cone) with shapes (..., 3, 3) and (..., 3).
    """
    p = np.asarray(p, dtype=float)
    rot = np.asarray(rot, dtype=float)
    # moving anchors in world frame: s = p + R @ b
    s = p[..., None, :] + np.einsum("...ij,aj->...ai", rot, g.anchors_moving)
    legs = s - g.anchors_fixed
    d = np.linalg.norm(legs, axis=-1)
    comp_m = np.einsum("...ai,ai->...a", legs, g.frame_m)
    comp_n = legs[..., 2]  # frame_n is the vertical axis for every arm
    theta = np.degrees(np.arctan2(comp_n, comp_m))
    normal = rot[..., :, 2]  # R @ z
    cos_cone = np.einsum("...ai,...i->...a", legs, normal) / np.maximum(d, 1e-300)
    cone = np.degrees(np.arccos(np.clip(cos_cone, -1.0, 1.0)))
    return legs, d, theta, cone


def _leg_scalar(p, rot, g: TriarmGeometry):
    """Single-pose leg solution without batching overhead.

    Returns (legs (3,3), d (3,), theta_deg (3,)); the hot paths (IK residual,
    Jacobian assembly) live here.
    """
    legs = p + (rot @ g.anchors_moving.T).T - g.anchors_fixed
    d = np.sqrt((legs * legs).sum(axis=1))
    comp_m = (legs * g.frame_m).sum(axis=1)
    theta = np.degrees(np.arctan2(legs[:, 2], comp_m))
    return legs, d, theta


def triarm_ik(x: Pose6, g: TriarmGeometry) -> JointVector:
    """Closed-form inverse kinematics for one pose."""
    _, d, theta = _leg_scalar(x.p, x.matrix, g)
    if np.any(d < 1e-6):
        raise DegenerateLeg(f"leg length below 1e-6 mm at pose p={x.p}")
    return JointVector(theta, d)


def margins_batch(p, rot, g: TriarmGeometry) -> np.ndarray:
    """Signed workspace margins for a batch of poses.

    Returns (..., 9): per arm the triple (d - d_min, d_max - d,
    cone_limit - cone).  All nine non-negative iff the pose is admissible.
    ``p`` may be (..., 3) with a single shared rotation, or ``rot`` may be
    batched (..., 3, 3); the whole batch evaluates as vectorized array
    arithmetic (the "parallel across points" implementation).
    """
    p = np.asarray(p, dtype=float)
    rot = np.asarray(rot, dtype=float)
    if rot.ndim == 2:
        rb = (rot @ g.anchors_moving.T).T               # (3 arms, 3)
        normal = rot[:, 2]
        legs = p[..., None, :] + rb - g.anchors_fixed   # (..., 3, 3)
        d = np.sqrt((legs * legs).sum(axis=-1))
        cosc = (legs @ normal) / np.maximum(d, 1e-300)
    else:
        rb = (rot @ g.anchors_moving.T).swapaxes(-1, -2)
        legs = p[..., None, :] + rb - g.anchors_fixed
        d = np.sqrt((legs * legs).sum(axis=-1))
        normal = rot[..., :, 2]
        cosc = (legs * normal[..., None, :]).sum(axis=-1) / np.maximum(d, 1e-300)
    cone = np.degrees(np.arccos(np.clip(cosc, -1.0, 1.0)))
    out = np.empty((*d.shape[:-1], 9))
    out[..., 0::3] = d - g.d_min
    out[..., 1::3] = g.d_max - d
    out[..., 2::3] = g.cone_limit_deg - cone
    return out


def workspace_margin(x: Pose6, g: TriarmGeometry) -> np.ndarray:
    """Signed margins (mm / deg) of one pose against the nine joint-space
    constraints; see :func:`margins_batch` for the ordering."""
    return margins_batch(x.p, x.matrix, g)


def joint_margins(q: JointVector, g: TriarmGeometry) -> np.ndarray:
    """Box margins of a joint vector against actuator travel, arm-major
    (th - th_min, th_max - th, d - d_min, d_max - d)."""
    return np.concatenate([
        q.th - g.theta_min_deg, g.theta_max_deg - q.th,
        q.d - g.d_min, g.d_max - q.d,
    ])


def _rotation_increments(h_deg):
    """Constant Rodrigues matrices for +/-h rotations about the world axes,
    ordered (+x, -x, +y, -y, +z, -z)."""
    out = np.empty((6, 3, 3))
    c, s = math.cos(h_deg * DEG), math.sin(h_deg * DEG)
    for k in range(3):
        ax = np.zeros(3)
        ax[k] = 1.0
        K = np.array([[0, -ax[2], ax[1]], [ax[2], 0, -ax[0]], [-ax[1], ax[0], 0]])
        K2 = K @ K
        out[2 * k] = np.eye(3) + s * K + (1 - c) * K2
        out[2 * k + 1] = np.eye(3) - s * K + (1 - c) * K2
    return out


_ROT_INC = _rotation_increments(_JAC_FD_STEP)
_TRANS_OFF = np.zeros((6, 3))
for _k in range(3):
    _TRANS_OFF[2 * _k, _k] = _JAC_FD_STEP
    _TRANS_OFF[2 * _k + 1, _k] = -_JAC_FD_STEP


def triarm_jacobian(x: Pose6, g: TriarmGeometry) -> Jacobian:
    """Jacobian mapping twist to joint rates at pose ``x``.

    Leg-length rows are analytic (l_hat and its moment); revolute rows come
    from central finite differences of the IK, which sidesteps any
    closed-form screw algebra while agreeing with it numerically.
    """
    rot = x.matrix
    legs, d, _ = _leg_scalar(x.p, rot, g)
    if np.any(d < 1e-6):
        raise DegenerateLeg("Jacobian at degenerate leg")
    l_hat = legs / d[:, None]
    rb = (rot @ g.anchors_moving.T).T

    J = np.empty((6, 6))
    # d rows: d_dot = l_hat . v + ((R b) x l_hat) . w    (w in deg/s)
    J[3:, :3] = l_hat
    J[3:, 3:] = np.cross(rb, l_hat) * DEG

    # theta rows by one batched central-difference sweep: 6 translation
    # perturbations then 6 rotation perturbations
    h = _JAC_FD_STEP
    ps = np.empty((12, 3))
    ps[:6] = x.p + _TRANS_OFF
    ps[6:] = x.p
    rs = np.empty((12, 3, 3))
    rs[:6] = rot
    rs[6:] = _ROT_INC @ rot
    legs12 = ps[:, None, :] + np.matmul(rs, g.anchors_moving.T).swapaxes(-1, -2) \
        - g.anchors_fixed
    th = np.degrees(np.arctan2(legs12[..., 2],
                               (legs12 * g.frame_m).sum(axis=-1)))
    diff = wrap_deg(th[0::2] - th[1::2]) / (2 * h)   # (6, 3)
    J[:3, :] = diff.T

    sv = np.linalg.svd(J, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    return Jacobian(J, cond)


def _apply_step(x: Pose6, step) -> Pose6:
    dp = step[:3]
    dw = step[3:]
    angle = float(np.linalg.norm(dw))
    q = x.q if angle == 0.0 else quat_mul(quat_from_axis_angle(dw, angle), x.q)
    return Pose6(x.p + dp, q)


def _raw_residual(p, rot, q: JointVector, g: TriarmGeometry) -> np.ndarray:
    _, d, theta = _leg_scalar(p, rot, g)
    if np.any(d < 1e-6):
        raise DegenerateLeg("residual at degenerate leg")
    out = np.empty(6)
    out[:3] = wrap_deg(theta - q.th)
    out[3:] = d - q.d
    return out


def _residual(x: Pose6, q: JointVector, g: TriarmGeometry) -> np.ndarray:
    return _raw_residual(x.p, x.matrix, q, g)


def triarm_fk(q: JointVector, x_guess: Pose6, g: TriarmGeometry,
              tol: float = 1e-11, max_iter: int = 50,
              jac0: Jacobian | None = None) -> Pose6:
    """Forward kinematics by damped Newton on the IK residual.

    ``x_guess`` must be in the basin of convergence (in closed loop, the
    previous pose).  ``jac0`` lets a caller reuse a recent Jacobian for the
    first steps; it is rebuilt whenever progress stalls.  The default
    residual tolerance is two orders below the 1e-9 pose-space contract so
    the Jacobian's amplification (cond 10-20) cannot eat the margin.
    """
    p = x_guess.p
    qq = x_guess.q
    rot = quat_to_matrix(qq)
    r = _raw_residual(p, rot, q, g)
    res = float(np.linalg.norm(r))
    jac = jac0
    jac_is_fresh = False
    for _ in range(max_iter):
        if res < tol:
            return Pose6(p, qq)
        if jac is None:
            jac = triarm_jacobian(Pose6(p, qq), g)
            jac_is_fresh = True
        if jac.singular:
            raise NoConvergence(f"singular Jacobian step (cond={jac.cond:.3e})")
        step = np.linalg.solve(jac.matrix, -r)
        lam = 1.0
        while True:
            p_new = p + lam * step[:3]
            dw = lam * step[3:]
            angle = math.sqrt(float(dw @ dw))
            q_new = qq if angle == 0.0 else quat_normalize(
                quat_mul(quat_from_axis_angle(dw, angle), qq))
            rot_new = quat_to_matrix(q_new)
            r_new = _raw_residual(p_new, rot_new, q, g)
            res_new = float(np.linalg.norm(r_new))
            if res_new < res or lam <= 1.0 / 16.0:
                break
            lam *= 0.5
        if res_new >= res:
            if jac_is_fresh:
                raise NoConvergence(f"stalled at residual {res:.3e} (tol {tol:g})")
            jac, jac_is_fresh = None, False   # borrowed Jacobian failed, rebuild
            continue
        keep = res_new < 1e-2 * res and lam == 1.0
        p, qq, rot, r, res = p_new, q_new, rot_new, r_new, res_new
        if keep:
            jac_is_fresh = False   # kept Jacobian is stale w.r.t. the new iterate
        else:
            jac, jac_is_fresh = None, False
    if res < tol:
        return Pose6(p, qq)
    raise NoConvergence(f"no convergence after {max_iter} iterations "
                        f"(residual {res:.3e})")
