"""Leader-side motion transfer: timed move profiles, velocity scaling,
incremental mapping, smoothing, Kalman prediction, output rate limiting,
packets, the leader->follower channel and the follower-side upsampler.

Stage order in :class:`LeaderPipeline` (one pass per 1 kHz input sample):

1. moving-average smoother over the raw leader poses
2. per-period twist estimate and dynamic velocity scale
3. incremental map onto the follower target pose (optionally clamped at
   the follower workspace boundary)
4. per-axis constant-acceleration Kalman bank (filtered position plus
   hidden velocity/acceleration states)
5. velocity/acceleration limiter: the hard guarantee that emitted motion
   never exceeds the configured caps, whatever the stages above did
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .geometry import (Pose6, TimedSample, Twist, lerp_pose, quat_conj,
                       quat_from_axis_angle, quat_mul, quat_normalize,
                       quat_slerp, quat_to_rotvec_deg, wrap_deg)
from .triarm import TriarmGeometry, margins_batch


class InvalidDuration(ValueError):
    """Timed move with non-positive duration."""


# ---------------------------------------------------------------------------
# timed move profile (GUI manual motion)
# ---------------------------------------------------------------------------

def timed_move(x0: float, dx: float, t0: float, dt: float, t: float) -> float:
    """Sine-eased move of one DOF from ``x0`` to ``x0 + dx`` over [t0, t0+dt].

    Before the window the value holds at ``x0``, after it at ``x0 + dx``;
    inside it follows ``(dx/2) * sin((180/dt)*(t-t0) - 90 deg) + x0 + dx/2``
    (sine argument in degrees), which is C1-continuous at both ends.
    """
    if dt <= 0:
        raise InvalidDuration(f"dt={dt} must be positive")
    if t < t0:
        return x0
    if t > t0 + dt:
        return x0 + dx
    arg = math.radians((180.0 / dt) * (t - t0) - 90.0)
    return (dx / 2.0) * math.sin(arg) + x0 + dx / 2.0


# ---------------------------------------------------------------------------
# dynamic velocity scaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScaleConfig:
    """Maximum commanded linear (mm/s) and angular (deg/s) speeds.

    Defaults are the conservative surgical settings; demos typically run
    10 mm/s and 1 deg/s.
    """

    max_v: float = 2.0
    max_w: float = 0.2

    def __post_init__(self):
        if self.max_v <= 0 or self.max_w <= 0:
            raise ValueError("speed limits must be positive")


def dynamic_scale(twist: Twist, cfg: ScaleConfig):
    """Attenuation pair (s_v, s_w) keeping speeds at or below the limits.

    The raw ratio limit/speed is clamped to 1 so slow motion is never
    amplified, and zero speed maps to scale 1.
    """
    v, w = twist.v_norm, twist.w_norm
    s_v = 1.0 if v <= cfg.max_v else cfg.max_v / v
    s_w = 1.0 if w <= cfg.max_w else cfg.max_w / w
    return s_v, s_w


def incremental_map(prev_follower: Pose6, leader_now: Pose6,
                    leader_prev: Pose6, scale) -> Pose6:
    """Compose the follower target with the scaled leader increment.

    Translation increments scale linearly; the rotation increment is the
    world-frame relative quaternion, scaled by slerp from identity so the
    operation stays well defined at large angles.
    """
    s_v, s_w = scale
    p = prev_follower.p + s_v * (leader_now.p - leader_prev.p)
    dq = quat_mul(leader_now.q, quat_conj(leader_prev.q))
    if s_w != 1.0:
        dq = quat_slerp(np.array([1.0, 0.0, 0.0, 0.0]), dq, s_w)
    return Pose6(p, quat_mul(dq, prev_follower.q))


# ---------------------------------------------------------------------------
# constant-acceleration Kalman filtering
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KalmanAxisState:
    """One axis of the constant-acceleration filter: state [pos, vel, acc],
    covariance, step size and noise intensities."""

    x: np.ndarray
    P: np.ndarray
    dt: float = 1e-3
    q_a: float = 1e2
    r_m: float = 1e-2

    @classmethod
    def initial(cls, z: float, dt: float = 1e-3, q_a: float = 1e2,
                r_m: float = 1e-2) -> "KalmanAxisState":
        return cls(np.array([z, 0.0, 0.0]),
                   np.diag([r_m, 1e4, 1e6]), dt, q_a, r_m)


def _fq(dt: float, q_a: float):
    F = np.array([[1.0, dt, 0.5 * dt * dt],
                  [0.0, 1.0, dt],
                  [0.0, 0.0, 1.0]])
    Q = q_a * np.array([
        [dt ** 4 / 4.0, dt ** 3 / 2.0, dt ** 2 / 2.0],
        [dt ** 3 / 2.0, dt ** 2, dt],
        [dt ** 2 / 2.0, dt, 1.0],
    ])
    return F, Q


def kalman_step(state: KalmanAxisState, z: float) -> KalmanAxisState:
    """One predict-update cycle against an observed position."""
    F, Q = _fq(state.dt, state.q_a)
    x = F @ state.x
    P = F @ state.P @ F.T + Q
    S = P[0, 0] + state.r_m
    K = P[:, 0] / S
    x = x + K * (z - x[0])
    A = np.eye(3)
    A[:, 0] -= K
    P = A @ P @ A.T + state.r_m * np.outer(K, K)   # Joseph form
    return KalmanAxisState(x, P, state.dt, state.q_a, state.r_m)


class PoseKalman:
    """Bank of six independent constant-acceleration filters over
    [x, y, z, alpha, beta, gamma], matching :func:`kalman_step` per axis.

    ``reset_innovation`` (6,) optionally re-anchors an axis whose
    innovation exceeds the threshold: position snaps to the observation
    and the acceleration estimate clears, avoiding the large transient
    overshoot a constant-acceleration filter produces on genuine jumps.
    Disabled (None) by default.
    """

    def __init__(self, q_a: float = 1e2, r_m: float = 1e-2,
                 reset_innovation=None):
        self.q_a = q_a
        self.r_m = r_m
        self.reset_innovation = (None if reset_innovation is None
                                 else np.asarray(reset_innovation, dtype=float))
        self.x = None          # (6, 3)
        self.P = None          # (6, 3, 3)
        self._fq_cache = (None, None, None)

    def step(self, z, dt: float):
        """Filter a 6-vector observation; returns (pos, vel, acc) rows."""
        z = np.asarray(z, dtype=float)
        if self.x is None:
            self.x = np.column_stack([z, np.zeros(6), np.zeros(6)])
            self.P = np.tile(np.diag([self.r_m, 1e4, 1e6]), (6, 1, 1))
            return self.x[:, 0].copy(), self.x[:, 1].copy(), self.x[:, 2].copy()
        if self._fq_cache[0] != dt:
            F, Q = _fq(dt, self.q_a)
            self._fq_cache = (dt, F, Q)
        _, F, Q = self._fq_cache
        x = self.x @ F.T
        P = np.einsum("ij,ajk,lk->ail", F, self.P, F) + Q
        innov = z - x[:, 0]
        S = P[:, 0, 0] + self.r_m
        K = P[:, :, 0] / S[:, None]
        x = x + K * innov[:, None]
        A = np.tile(np.eye(3), (6, 1, 1))
        A[:, :, 0] -= K
        P = np.einsum("aij,ajk,alk->ail", A, P, A) \
            + self.r_m * np.einsum("ai,aj->aij", K, K)
        if self.reset_innovation is not None:
            hot = np.abs(innov) > self.reset_innovation
            if hot.any():
                x[hot, 0] = z[hot]
                x[hot, 2] = 0.0
                P[hot] = np.diag([self.r_m, 1e4, 1e6])
        self.x, self.P = x, P
        return x[:, 0].copy(), x[:, 1].copy(), x[:, 2].copy()


# ---------------------------------------------------------------------------
# moving-average pose smoother
# ---------------------------------------------------------------------------

class PoseSmoother:
    """Unweighted moving average over the last ``window`` poses: arithmetic
    mean on translation, normalized (sign-aligned) quaternion mean on
    orientation."""

    def __init__(self, window: int = 10):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.buf: deque = deque(maxlen=window)

    def push(self, pose: Pose6) -> Pose6:
        self.buf.append(pose)
        return self.value()

    def value(self) -> Pose6:
        if not self.buf:
            raise ValueError("smoother window is empty")
        p = np.mean([s.p for s in self.buf], axis=0)
        ref = self.buf[-1].q
        qs = np.array([s.q if float(np.dot(s.q, ref)) >= 0.0 else -s.q
                       for s in self.buf])
        return Pose6(p, quat_normalize(qs.mean(axis=0)))


# ---------------------------------------------------------------------------
# output velocity / acceleration limiter
# ---------------------------------------------------------------------------

def _clip_norm(vec, limit):
    n = float(np.linalg.norm(vec))
    if n > limit and n > 0.0:
        return vec * (limit / n)
    return vec


class RateLimiter:
    """Tracks a target pose under hard speed and acceleration caps.

    Works in velocity space so variable sample intervals (input gaps) keep
    the guarantees: per interval dt the emitted translation satisfies
    |dp| <= max_v*dt and |dv| <= a_max*dt, with the rotational analog on
    rotation-vector rates.
    """

    def __init__(self, scale: ScaleConfig, a_max: float, alpha_max: float):
        self.scale = scale
        self.a_max = a_max
        self.alpha_max = alpha_max
        self.pose: Pose6 | None = None
        self.v = np.zeros(3)
        self.w = np.zeros(3)

    def step(self, target: Pose6, dt: float) -> Pose6:
        if self.pose is None:
            self.pose = target
            return target
        gap = target.p - self.pose.p
        v_des = self._braked(gap, dt, self.a_max)
        self.v = _clip_norm(self.v + _clip_norm(v_des - self.v, self.a_max * dt),
                            self.scale.max_v)
        p = self.pose.p + self.v * dt

        rv = quat_to_rotvec_deg(quat_mul(target.q, quat_conj(self.pose.q)))
        w_des = self._braked(rv, dt, self.alpha_max)
        self.w = _clip_norm(self.w + _clip_norm(w_des - self.w, self.alpha_max * dt),
                            self.scale.max_w)
        ang = float(np.linalg.norm(self.w)) * dt
        q = self.pose.q if ang == 0.0 else quat_mul(
            quat_from_axis_angle(self.w, ang), self.pose.q)
        self.pose = Pose6(p, q)
        return self.pose

    @staticmethod
    def _braked(gap, dt: float, a_max: float):
        """Desired velocity toward the target under the braking envelope
        v <= sqrt(2 a |gap|), so step targets are approached without the
        bang-bang limit cycle of a naive gap/dt tracker."""
        n = float(np.linalg.norm(gap))
        if n == 0.0:
            return np.zeros(3)
        speed = min(n / dt, math.sqrt(2.0 * a_max * n))
        return gap * (speed / n)


# ---------------------------------------------------------------------------
# packets and channel
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TrajectoryPacket:
    """One leader-loop output sample heading for the follower."""

    seq: int
    t: float
    pose: Pose6
    scale: tuple

    def to_json(self) -> str:
        return json.dumps({
            "seq": self.seq,
            "t": self.t,
            "pose": self.pose.as_vec7(),
            "scale": [self.scale[0], self.scale[1]],
        })

    @classmethod
    def from_json(cls, line: str) -> "TrajectoryPacket":
        d = json.loads(line)
        return cls(int(d["seq"]), float(d["t"]),
                   Pose6.from_vec7(d["pose"]),
                   (float(d["scale"][0]), float(d["scale"][1])))


class Channel:
    """Bounded FIFO between the leader and follower loops.  The producer
    never blocks: on overflow the oldest packet is dropped and counted."""

    def __init__(self, capacity: int = 1024):
        self.buf: deque = deque()
        self.capacity = capacity
        self.dropped = 0
        self.last_seq = None

    def send(self, pkt: TrajectoryPacket) -> None:
        if self.last_seq is not None and pkt.seq != self.last_seq + 1:
            raise ValueError(f"packet seq gap: {self.last_seq} -> {pkt.seq}")
        self.last_seq = pkt.seq
        if len(self.buf) >= self.capacity:
            self.buf.popleft()
            self.dropped += 1
        self.buf.append(pkt)

    def drain(self):
        out = list(self.buf)
        self.buf.clear()
        return out


# ---------------------------------------------------------------------------
# follower-side upsampler
# ---------------------------------------------------------------------------

class Upsampler:
    """Re-times a 1 kHz packet stream onto the follower's output grid by
    linear/slerp interpolation with one input period of playback delay.

    When the input starves (a gap), the playback position freezes and the
    last pose is held, so the backlog later plays out at its original
    speed and the emitted stream stays continuous.  A gap beyond
    ``stale_gap`` seconds sets the stale flag and re-anchors playback just
    behind the newest input (a flagged discontinuity).
    """

    def __init__(self, period: float = 1e-3, stale_gap: float = 0.1):
        self.period = period
        self.stale_gap = stale_gap
        self.samples: deque = deque()
        self.t_play: float | None = None
        self.last_pose: Pose6 | None = None
        self.stale = False
        self.stale_count = 0

    def push(self, sample: TimedSample) -> None:
        if self.samples and sample.t <= self.samples[-1].t:
            raise ValueError("input timestamps must be strictly increasing")
        self.samples.append(sample)

    def sample_at(self, now: float, dt_out: float) -> Pose6 | None:
        """Advance playback by one output tick and return the pose, or None
        before the first input arrives."""
        if not self.samples:
            return None
        newest = self.samples[-1]
        if self.t_play is None:
            self.t_play = newest.t
        self.stale = (now - newest.t) > self.stale_gap
        if newest.t - self.t_play > self.stale_gap + self.period:
            # input resumed after a stale gap: drop the unplayable backlog
            # (a flagged discontinuity, bounding accumulated lag)
            self.t_play = newest.t
            self.stale_count += 1
        t_next = min(self.t_play + dt_out, now - self.period)
        t_next = max(t_next, self.t_play)
        while len(self.samples) >= 2 and self.samples[1].t <= t_next:
            self.samples.popleft()
        a = self.samples[0]
        if t_next <= a.t:
            self.t_play = t_next
            self.last_pose = a.pose
        elif len(self.samples) >= 2:
            self.t_play = t_next
            self.last_pose = lerp_pose(a, self.samples[1], t_next)
        # else: starved beyond the newest input, hold last pose and freeze
        # the playback position so the backlog replays at original speed
        return self.last_pose


# ---------------------------------------------------------------------------
# the leader pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    """Knobs of the leader-side processing chain."""

    smoothing_window: int = 10
    kalman_q: float = 1e2       # process noise, (mm/s^2)^2
    kalman_r: float = 1e-2      # measurement noise, mm^2
    kalman_reset_mm: float | None = None    # innovation re-anchor thresholds
    kalman_reset_deg: float | None = None
    a_max: float = 5000.0       # emitted acceleration cap, mm/s^2
    alpha_max: float = 2000.0   # emitted angular acceleration cap, deg/s^2
    workspace_guard: bool = True

    def __post_init__(self):
        if self.smoothing_window < 1:
            raise ValueError("smoothing window must be >= 1")
        if self.a_max <= 0 or self.alpha_max <= 0:
            raise ValueError("acceleration caps must be positive")


@dataclass
class PipelineStats:
    samples: int = 0
    limit_rejects: int = 0
    last_scale: tuple = (1.0, 1.0)
    vel_estimate: float = 0.0
    ang_estimate: float = 0.0


class LeaderPipeline:
    """Maps raw leader samples to follower trajectory packets.

    One producer (the 1 kHz leader loop) owns this object; the emitted
    packets are immutable and may cross threads freely.
    """

    def __init__(self, scale: ScaleConfig, cfg: PipelineConfig,
                 start_pose: Pose6, geometry: TriarmGeometry | None = None):
        self.scale = scale
        self.cfg = cfg
        self.geometry = geometry if cfg.workspace_guard else None
        self.smoother = PoseSmoother(cfg.smoothing_window)
        reset = None
        if cfg.kalman_reset_mm is not None or cfg.kalman_reset_deg is not None:
            reset = np.array([cfg.kalman_reset_mm or np.inf] * 3
                             + [cfg.kalman_reset_deg or np.inf] * 3)
        self.kalman = PoseKalman(cfg.kalman_q, cfg.kalman_r, reset)
        self.limiter = RateLimiter(scale, cfg.a_max, cfg.alpha_max)
        self.follower_target = start_pose
        # the unclamped image of the hand in follower coordinates: haptic
        # rendering happens here, so pushing past the boundary builds force
        # while the clamped follower_target halts at the wall
        self.mapped_free = start_pose
        self.prev_smoothed: Pose6 | None = None
        self.prev_t: float | None = None
        self.prev_euler: np.ndarray | None = None
        self.seq = 0
        self.stats = PipelineStats()

    def process(self, sample: TimedSample,
                scale_override: tuple | None = None) -> TrajectoryPacket:
        """Run one leader sample through the chain and emit a packet."""
        smoothed = self.smoother.push(sample.pose)
        if self.prev_smoothed is None:
            scale = (1.0, 1.0)
            target = self.follower_target
        else:
            dt = sample.t - self.prev_t
            if dt <= 0:
                raise ValueError("leader sample timestamps must increase")
            dp = (smoothed.p - self.prev_smoothed.p) / dt
            drot = quat_to_rotvec_deg(
                quat_mul(smoothed.q, quat_conj(self.prev_smoothed.q))) / dt
            twist = Twist(dp, drot)
            scale = (dynamic_scale(twist, self.scale)
                     if scale_override is None else scale_override)
            self.stats.vel_estimate = twist.v_norm
            self.stats.ang_estimate = twist.w_norm
            self.mapped_free = incremental_map(self.mapped_free, smoothed,
                                               self.prev_smoothed, scale)
            candidate = incremental_map(self.follower_target, smoothed,
                                        self.prev_smoothed, scale)
            if self.geometry is not None and \
                    float(margins_batch(candidate.p, candidate.matrix,
                                        self.geometry).min()) < 0.0:
                self.stats.limit_rejects += 1
            else:
                self.follower_target = candidate
            target = self.follower_target

        dt_k = (sample.t - self.prev_t) if self.prev_t is not None else 1e-3
        e_raw = target.euler
        if self.prev_euler is None:
            e = e_raw
        else:
            e = self.prev_euler + wrap_deg(e_raw - self.prev_euler)
        self.prev_euler = e
        pos, _, _ = self.kalman.step(np.concatenate([target.p, e]), dt_k)
        filtered = Pose6.from_euler(pos[:3], pos[3:])
        emitted = self.limiter.step(filtered, dt_k)

        self.prev_smoothed = smoothed
        self.prev_t = sample.t
        self.stats.samples += 1
        self.stats.last_scale = scale
        pkt = TrajectoryPacket(self.seq, sample.t, emitted, scale)
        self.seq += 1
        return pkt
