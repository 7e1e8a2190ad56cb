"""Workspace-limit haptic rendering on the leader side.

The mapped follower pose carries two probe clouds: points on a sphere of
radius ``rho_t`` probing translation headroom, and a set of orientation
probes tilted ``rho_r`` degrees about directions on the unit sphere.  Every
probe is scored against the follower's nine signed workspace margins; any
negative margin marks the probe "outside".

Outside probes contribute a penalty force along the inward gradient of
their most-violated margin, with the first-order penetration distance
``-margin / |grad margin|`` as depth.  Contributions are averaged over the
whole cloud (so stiffness does not depend on the point count), scaled by
the ramp stiffness, saturated at the hard caps, and finally smoothed by a
5-tap linearly-weighted moving average.  In free space only a viscous drag
proportional to the hand twist is rendered.
"""
from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose6, Twist, Wrench
from .triarm import TriarmGeometry, margins_batch

_GRAD_STEP = 1e-3   # mm / deg, central differences for margin gradients


def fibonacci_sphere(n: int) -> np.ndarray:
    """Deterministic, roughly uniform unit directions (n, 3)."""
    if n < 1:
        raise ValueError("need at least one point")
    k = np.arange(n, dtype=float)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * k
    z = 1.0 - (2.0 * k + 1.0) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def axis_angle_matrices(axes: np.ndarray, angle_deg: float) -> np.ndarray:
    """Rodrigues rotation matrices (n, 3, 3) about unit ``axes``."""
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    x, y, z = axes[:, 0], axes[:, 1], axes[:, 2]
    zero = np.zeros_like(x)
    K = np.stack([
        np.stack([zero, -z, y], axis=-1),
        np.stack([z, zero, -x], axis=-1),
        np.stack([-y, x, zero], axis=-1),
    ], axis=-2)
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


@dataclass(frozen=True)
class HapticConfig:
    """Caps, ramp shape, viscous drag and filter of the rendered wrench.

    The stiffnesses default to reaching the cap exactly at ``ramp_mm`` /
    ``ramp_deg`` of penetration.
    """

    f_max: float = 15.0          # N
    tau_max: float = 0.3         # N*m
    ramp_mm: float = 5.0
    ramp_deg: float = 5.0
    k_f: float | None = None     # N/mm, default f_max / ramp_mm
    k_tau: float | None = None   # N*m/deg, default tau_max / ramp_deg
    b_v: float = 0.02            # N*s/mm viscous drag
    b_w: float = 0.005           # N*m*s/deg
    n_points: int = 500
    rho_t: float = 2.0           # mm translation probe radius
    rho_r: float = 2.0           # deg rotation probe tilt
    ma_window: int = 5
    budget_us: float = 1000.0

    def __post_init__(self):
        if min(self.f_max, self.tau_max, self.ramp_mm, self.ramp_deg) <= 0:
            raise ValueError("caps and ramp depths must be positive")
        if self.n_points < 16:
            raise ValueError("need at least 16 probe points")

    @property
    def stiffness_f(self) -> float:
        return self.k_f if self.k_f is not None else self.f_max / self.ramp_mm

    @property
    def stiffness_tau(self) -> float:
        return self.k_tau if self.k_tau is not None else self.tau_max / self.ramp_deg

    @property
    def ma_weights(self) -> np.ndarray:
        w = np.arange(1, self.ma_window + 1, dtype=float)
        return w / w.sum()


@dataclass(frozen=True, eq=False)
class ProxyClouds:
    """Probe clouds rigidly attached to a mapped follower pose.

    ``tilt_mats`` are the body-frame tilt rotations of the orientation
    probes; since Rod(R u, a) = R Rod(u, a) R^T, the world probe
    orientation is simply ``pose.matrix @ tilt_mats[j]``.
    """

    pose: Pose6
    points: np.ndarray      # (N, 3) world positions of translation probes
    axes: np.ndarray        # (N, 3) world tilt axes of rotation probes
    tilt_mats: np.ndarray   # (N, 3, 3) body-frame tilt rotations
    rho_t: float
    rho_r: float


def build_clouds(pose: Pose6, cfg: HapticConfig,
                 dirs: np.ndarray | None = None,
                 tilt_mats: np.ndarray | None = None) -> ProxyClouds:
    """Attach both probe clouds to ``pose``.

    ``dirs`` / ``tilt_mats`` let a caller reuse cached probe templates;
    otherwise they are regenerated (deterministically) from the config.
    """
    if dirs is None:
        dirs = fibonacci_sphere(cfg.n_points)
    if tilt_mats is None:
        tilt_mats = axis_angle_matrices(dirs, cfg.rho_r)
    rot = pose.matrix
    world_dirs = dirs @ rot.T
    return ProxyClouds(pose, pose.p + cfg.rho_t * world_dirs,
                       world_dirs, tilt_mats, cfg.rho_t, cfg.rho_r)


def evaluate_violation(clouds: ProxyClouds, g: TriarmGeometry):
    """Margins of every probe: translation cloud then rotation cloud,
    each (N, 9).  The evaluation is one vectorized batch per cloud, which
    is the parallel implementation of the per-point check."""
    rot = clouds.pose.matrix
    t_margins = margins_batch(clouds.points, rot, g)
    probe_rots = np.matmul(rot, clouds.tilt_mats)
    r_margins = margins_batch(clouds.pose.p, probe_rots, g)
    return t_margins, r_margins


def _translation_penalty(clouds: ProxyClouds, margins: np.ndarray,
                         g: TriarmGeometry):
    """Sum of depth-weighted inward normals over outside translation
    probes, normalized by the total point count."""
    worst = margins.min(axis=1)
    outside = worst < 0.0
    n_out = int(outside.sum())
    if n_out == 0:
        return np.zeros(3), 0
    pts = clouds.points[outside]
    cons = margins[outside].argmin(axis=1)
    h = _GRAD_STEP
    offsets = np.zeros((6, 3))
    for k in range(3):
        offsets[2 * k, k] = h
        offsets[2 * k + 1, k] = -h
    pert = pts[:, None, :] + offsets[None, :, :]
    m = margins_batch(pert.reshape(-1, 3), clouds.pose.matrix, g)
    m = m.reshape(n_out, 6, 9)[np.arange(n_out)[:, None],
                               np.arange(6)[None, :], cons[:, None]]
    grad = (m[:, 0::2] - m[:, 1::2]) / (2.0 * h)
    gn = np.linalg.norm(grad, axis=1)
    ok = gn > 1e-9
    depth = np.where(ok, -worst[outside] / np.maximum(gn, 1e-9), 0.0)
    normals = np.where(ok[:, None], grad / np.maximum(gn, 1e-9)[:, None], 0.0)
    return (depth[:, None] * normals).sum(axis=0) / len(clouds.points), n_out


def _rotation_penalty(clouds: ProxyClouds, margins: np.ndarray,
                      g: TriarmGeometry):
    """Rotation-cloud analog of :func:`_translation_penalty`; gradients are
    taken with respect to small world-axis tilts (deg)."""
    worst = margins.min(axis=1)
    outside = worst < 0.0
    n_out = int(outside.sum())
    if n_out == 0:
        return np.zeros(3), 0
    rot = clouds.pose.matrix
    probe_rots = np.matmul(rot, clouds.tilt_mats[outside])
    cons = margins[outside].argmin(axis=1)
    h = _GRAD_STEP
    inc = np.empty((6, 3, 3))
    for k in range(3):
        ax = np.zeros((1, 3))
        ax[0, k] = 1.0
        inc[2 * k] = axis_angle_matrices(ax, h)[0]
        inc[2 * k + 1] = axis_angle_matrices(ax, -h)[0]
    pert = np.einsum("sij,njk->nsik", inc, probe_rots)
    m = margins_batch(clouds.pose.p, pert.reshape(-1, 3, 3), g)
    m = m.reshape(n_out, 6, 9)[np.arange(n_out)[:, None],
                               np.arange(6)[None, :], cons[:, None]]
    grad = (m[:, 0::2] - m[:, 1::2]) / (2.0 * h)
    gn = np.linalg.norm(grad, axis=1)
    ok = gn > 1e-9
    depth = np.where(ok, -worst[outside] / np.maximum(gn, 1e-9), 0.0)
    normals = np.where(ok[:, None], grad / np.maximum(gn, 1e-9)[:, None], 0.0)
    return (depth[:, None] * normals).sum(axis=0) / len(clouds.axes), n_out


def _saturate(vec: np.ndarray, cap: float) -> np.ndarray:
    n = float(np.linalg.norm(vec))
    while n > cap and n > 0.0:   # repeat to kill fp overshoot of the cap
        vec = vec * (cap / n)
        n = float(np.linalg.norm(vec))
    return vec


_DEG = math.pi / 180.0


def _cross_rows(a, b):
    out = np.empty_like(a)
    out[:, 0] = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
    out[:, 1] = a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]
    out[:, 2] = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return out


def _sum_depth_normals(grad, worst_out, n_total):
    gn = np.linalg.norm(grad, axis=1)
    gn = np.maximum(gn, 1e-9)
    depth = -worst_out / gn
    return (depth[:, None] * grad / gn[:, None]).sum(axis=0) / n_total


def _translation_penalty_analytic(clouds: ProxyClouds, margins: np.ndarray,
                                  g: TriarmGeometry,
                                  legs_all: np.ndarray | None = None):
    """Closed-form gradients of the most-violated margin per outside
    translation probe; equal to the finite-difference reference within
    discretization error (pinned in tests)."""
    worst = margins.min(axis=1)
    outside = worst < 0.0
    n_out = int(outside.sum())
    if n_out == 0:
        return np.zeros(3), 0
    rot = clouds.pose.matrix
    cons = margins[outside].argmin(axis=1)
    arm = cons // 3
    typ = cons % 3
    if legs_all is None:
        rb = (rot @ g.anchors_moving.T).T      # (3 arms, 3)
        legs = clouds.points[outside] + rb[arm] - g.anchors_fixed[arm]
    else:
        legs = legs_all[np.flatnonzero(outside), arm]
    d = np.linalg.norm(legs, axis=1)
    l_hat = legs / d[:, None]
    grad = np.empty_like(l_hat)
    lo = typ == 0
    hi = typ == 1
    co = typ == 2
    grad[lo] = l_hat[lo]
    grad[hi] = -l_hat[hi]
    if co.any():
        normal = rot[:, 2]
        u = l_hat[co] @ normal
        s = np.sqrt(np.maximum(1.0 - u * u, 1e-12))
        grad[co] = (normal[None, :] - u[:, None] * l_hat[co]) \
            / (s * d[co] * _DEG)[:, None]
    return _sum_depth_normals(grad, worst[outside], len(clouds.points)), n_out


def _rotation_penalty_analytic(clouds: ProxyClouds, margins: np.ndarray,
                               g: TriarmGeometry,
                               legs_all: np.ndarray | None = None,
                               normals_all: np.ndarray | None = None):
    """Closed-form world-axis tilt gradients (per degree) of the
    most-violated margin per outside orientation probe.

    ``legs_all`` (N, 3, 3) and ``normals_all`` (N, 3) let the renderer
    reuse quantities already computed during margin evaluation.
    """
    worst = margins.min(axis=1)
    outside = worst < 0.0
    n_out = int(outside.sum())
    if n_out == 0:
        return np.zeros(3), 0
    rot = clouds.pose.matrix
    cons = margins[outside].argmin(axis=1)
    arm = cons // 3
    typ = cons % 3
    if legs_all is None or normals_all is None:
        probe_rots = np.matmul(rot, clouds.tilt_mats[outside])
        rb = np.matmul(probe_rots, g.anchors_moving.T) \
            .swapaxes(-1, -2)[np.arange(n_out), arm]
        legs = clouds.pose.p + rb - g.anchors_fixed[arm]
        normal = probe_rots[:, :, 2]
    else:
        legs = legs_all[np.flatnonzero(outside), arm]
        rb = legs + g.anchors_fixed[arm] - clouds.pose.p
        normal = normals_all[outside]
    d = np.linalg.norm(legs, axis=1)
    l_hat = legs / d[:, None]
    grad = np.empty_like(l_hat)
    lo = typ == 0
    hi = typ == 1
    co = typ == 2
    if lo.any():
        grad[lo] = _cross_rows(rb[lo], l_hat[lo]) * _DEG
    if hi.any():
        grad[hi] = -_cross_rows(rb[hi], l_hat[hi]) * _DEG
    if co.any():
        # d/dw of cos(cone): ((R b) x n + n x l - u ((R b) x l_hat)) / d
        u = (l_hat[co] * normal[co]).sum(axis=1)
        s = np.sqrt(np.maximum(1.0 - u * u, 1e-12))
        du = (_cross_rows(rb[co], normal[co]) + _cross_rows(normal[co], legs[co])
              - u[:, None] * _cross_rows(rb[co], l_hat[co])) / d[co, None]
        grad[co] = du / s[:, None]
    return _sum_depth_normals(grad, worst[outside], len(clouds.axes)), n_out


@dataclass(frozen=True, eq=False)
class HapticFrame:
    """One rendered haptic update."""

    wrench: Wrench                 # filtered, saturated output
    raw: Wrench                    # saturated pre-filter wrench
    violating: bool
    depths: np.ndarray             # (9,) deepest violation per constraint
    outside_points: int
    compute_us: float = 0.0

    @property
    def budget_exceeded(self) -> bool:
        return self.compute_us > 1000.0


def render_wrench(clouds: ProxyClouds, t_margins: np.ndarray,
                  r_margins: np.ndarray, velocity: Twist, cfg: HapticConfig,
                  g: TriarmGeometry, history: deque,
                  analytic: bool = False, cache=None) -> HapticFrame:
    """Turn probe margins into the filtered output wrench.

    ``history`` is the caller-owned deque of previous saturated wrenches;
    the newest frame is appended before filtering.  ``analytic`` switches
    the margin gradients from the central-difference reference to the
    closed-form fast path (identical within discretization error), and
    ``cache`` optionally carries (legs, normals) arrays reused from a
    fused margin evaluation.
    """
    violating = bool((t_margins.min() < 0.0) or (r_margins.min() < 0.0))
    if violating:
        if analytic:
            n = len(clouds.points)
            legs_t = cache[0][:n] if cache is not None else None
            legs_r = cache[0][n:] if cache is not None else None
            norm_r = cache[1][n:] if cache is not None else None
            f_dir, n_out_t = _translation_penalty_analytic(
                clouds, t_margins, g, legs_all=legs_t)
            tau_dir, n_out_r = _rotation_penalty_analytic(
                clouds, r_margins, g, legs_all=legs_r, normals_all=norm_r)
        else:
            f_dir, n_out_t = _translation_penalty(clouds, t_margins, g)
            tau_dir, n_out_r = _rotation_penalty(clouds, r_margins, g)
        F = _saturate(cfg.stiffness_f * f_dir, cfg.f_max)
        tau = _saturate(cfg.stiffness_tau * tau_dir, cfg.tau_max)
        outside = n_out_t + n_out_r
    else:
        F = _saturate(-cfg.b_v * velocity.v, cfg.f_max)
        tau = _saturate(-cfg.b_w * velocity.w, cfg.tau_max)
        outside = 0
    raw = Wrench(F, tau)

    history.append(raw)
    while len(history) > cfg.ma_window:
        history.popleft()
    w = cfg.ma_weights[-len(history):]
    w = w / w.sum()
    F_f = np.zeros(3)
    tau_f = np.zeros(3)
    for wi, wr in zip(w, history):
        F_f += wi * wr.F
        tau_f += wi * wr.tau

    depths = np.minimum(np.minimum(t_margins.min(axis=0), r_margins.min(axis=0)),
                        0.0)
    return HapticFrame(Wrench(F_f, tau_f), raw, violating, -depths, outside)


class HapticRenderer:
    """Stateful 1 kHz renderer: cached probe templates plus filter history.

    The per-tick margin evaluation is a fused equivalent of
    :func:`evaluate_violation` working on precomputed body-frame probe
    anchors, so a tick costs one batched matmul and a handful of array
    passes; the test suite pins it to the reference implementation.
    """

    def __init__(self, cfg: HapticConfig, g: TriarmGeometry):
        self.cfg = cfg
        self.g = g
        self.dirs = fibonacci_sphere(cfg.n_points)
        self.tilt_mats = axis_angle_matrices(self.dirs, cfg.rho_r)
        # body-frame anchor positions of every orientation probe: (N, 3, 3)
        self._probe_anchors = np.matmul(self.tilt_mats, g.anchors_moving.T)
        self._probe_z = self.tilt_mats[:, :, 2].copy()
        self.history: deque = deque()
        self.budget_violations = 0

    def _margins_fused(self, clouds: ProxyClouds):
        g = self.g
        rot = clouds.pose.matrix
        n = len(clouds.points)
        legs = np.empty((2 * n, 3, 3))
        rb = (rot @ g.anchors_moving.T).T
        legs[:n] = clouds.points[:, None, :] + rb - g.anchors_fixed
        legs[n:] = clouds.pose.p \
            + np.matmul(rot, self._probe_anchors).swapaxes(-1, -2) \
            - g.anchors_fixed
        d = np.sqrt((legs * legs).sum(axis=-1))
        normals = np.empty((2 * n, 3))
        normals[:n] = rot[:, 2]
        normals[n:] = self._probe_z @ rot.T
        cosc = (legs * normals[:, None, :]).sum(axis=-1) / np.maximum(d, 1e-300)
        cone = np.degrees(np.arccos(np.clip(cosc, -1.0, 1.0)))
        m = np.empty((2 * n, 9))
        m[:, 0::3] = d - g.d_min
        m[:, 1::3] = g.d_max - d
        m[:, 2::3] = g.cone_limit_deg - cone
        return m[:n], m[n:], (legs, normals)

    def tick(self, pose: Pose6, velocity: Twist) -> HapticFrame:
        t0 = time.perf_counter()
        clouds = build_clouds(pose, self.cfg, self.dirs, self.tilt_mats)
        t_margins, r_margins, cache = self._margins_fused(clouds)
        frame = render_wrench(clouds, t_margins, r_margins, velocity,
                              self.cfg, self.g, self.history, analytic=True,
                              cache=cache)
        us = (time.perf_counter() - t0) * 1e6
        if us > self.cfg.budget_us:
            self.budget_violations += 1
        return HapticFrame(frame.wrench, frame.raw, frame.violating,
                           frame.depths, frame.outside_points, us)

    def reset(self) -> None:
        self.history.clear()
