"""Closed-loop orchestration: trajectory sources, the virtual-clock loop
through pipeline -> channel -> joint rates -> pulses -> plant -> forward
kinematics, error metrics and all file I/O.

Runs under the virtual clock are strictly single threaded and fully
deterministic: a fixed seed reproduces every output file byte for byte.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .actuation import FollowerActuation, MotorBank, joint_rates
from .config import RunConfig
from .geometry import (Pose6, TimedSample, Twist, lerp_pose, pose_delta,
                       quat_angle_deg, quat_conj, quat_mul,
                       quat_to_rotvec_deg, wrap_deg)
from .haptics import HapticRenderer
from .pipeline import Channel, LeaderPipeline, TrajectoryPacket, Upsampler
from .triarm import triarm_jacobian, workspace_margin

TRAJECTORY_HEADER = "t_sec,x_mm,y_mm,z_mm,alpha_deg,beta_deg,gamma_deg"


class EmptyTrajectory(ValueError):
    """Error metrics over an empty or non-overlapping trajectory pair."""


# ---------------------------------------------------------------------------
# trajectory sources (leader-frame relative motion)
# ---------------------------------------------------------------------------

class SinusoidSource:
    """Per-axis sinusoids with independent periods on all six DOF."""

    def __init__(self, amp_mm, period_s, rot_amp_deg, rot_period_s):
        self.amp = np.asarray(amp_mm, dtype=float)
        self.per = np.asarray(period_s, dtype=float)
        self.ramp = np.asarray(rot_amp_deg, dtype=float)
        self.rper = np.asarray(rot_period_s, dtype=float)

    def pose_at(self, t: float) -> Pose6:
        p = self.amp * np.sin(2.0 * math.pi * t / self.per)
        e = self.ramp * np.sin(2.0 * math.pi * t / self.rper)
        return Pose6.from_euler(p, e)

    def samples(self, duration: float, rate: int):
        n = int(round(duration * rate))
        return [TimedSample(k / rate, self.pose_at(k / rate))
                for k in range(n)]


class HandMotionSource:
    """Synthetic hand motion: seeded sum of sinusoids normalized to a peak
    speed, with optional dropouts (sample gaps) and position jumps."""

    def __init__(self, seed: int, duration: float, rate: int,
                 peak_v: float = 20.0, peak_w: float = 2.0,
                 gaps: int = 0, gap_ms: float = 50.0,
                 jumps: int = 0, jump_mm: float = 5.0):
        rng = np.random.default_rng(seed)
        self.duration = duration
        self.rate = rate
        n = int(round(duration * rate))
        t = np.arange(n) / rate

        def sum_of_sines(n_axes, n_comp, t_arr):
            out = np.zeros((len(t_arr), n_axes))
            for a in range(n_axes):
                for _ in range(n_comp):
                    amp = rng.uniform(0.5, 1.0)
                    per = rng.uniform(1.5, 6.0)
                    ph = rng.uniform(0, 2 * math.pi)
                    out[:, a] += amp * np.sin(2 * math.pi * t_arr / per + ph)
            return out

        pos = sum_of_sines(3, 3, t)
        ang = sum_of_sines(3, 3, t)
        # normalize so the peak twist norms match the requested profile
        v = np.linalg.norm(np.diff(pos, axis=0), axis=1) * rate
        w = np.linalg.norm(np.diff(ang, axis=0), axis=1) * rate
        pos *= peak_v / max(v.max(), 1e-12)
        ang *= peak_w / max(w.max(), 1e-12)

        drop = np.zeros(n, dtype=bool)
        gap_n = max(1, int(round(gap_ms * rate / 1000.0)))
        self.gap_windows = []
        for _ in range(gaps):
            start = int(rng.integers(n // 10, n - n // 10 - gap_n))
            drop[start:start + gap_n] = True
            self.gap_windows.append((t[start], t[min(start + gap_n, n - 1)]))
        offset = np.zeros((n, 3))
        for _ in range(jumps):
            at = int(rng.integers(n // 10, n - n // 10))
            step = rng.normal(size=3)
            step *= jump_mm / np.linalg.norm(step)
            offset[at:] += step
        pos = pos + offset

        self._samples = [TimedSample(t[k], Pose6.from_euler(pos[k], ang[k]))
                         for k in range(n) if not drop[k]]

    def samples(self, duration=None, rate=None):
        return self._samples


def synth_hand(seed: int, duration: float, profile: str = "smooth",
               rate: int = 1000, peak_v: float = 20.0, peak_w: float = 2.0,
               gaps: int = 2, gap_ms: float = 50.0, jumps: int = 2,
               jump_mm: float = 5.0) -> HandMotionSource:
    """1 kHz synthetic hand-motion stream, reproducible from its seed.

    ``smooth`` produces an uninterrupted stream; ``breakage`` injects the
    configured dropouts and jumps.
    """
    if profile == "smooth":
        gaps = jumps = 0
    return HandMotionSource(seed, duration, rate, peak_v, peak_w,
                            gaps, gap_ms, jumps, jump_mm)


# ---------------------------------------------------------------------------
# error metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ErrorReport:
    """Per-axis and aggregate deviation between two pose trajectories."""

    axis_mean_mm: np.ndarray
    axis_max_mm: np.ndarray
    axis_mean_deg: np.ndarray
    axis_max_deg: np.ndarray
    max_norm_mm: float
    mean_norm_mm: float
    max_angle_deg: float
    mean_angle_deg: float
    delay_s: float
    t: np.ndarray
    trans_err_mm: np.ndarray
    rot_err_deg: np.ndarray

    def to_dict(self) -> dict:
        return {
            "axis_mean_mm": self.axis_mean_mm.tolist(),
            "axis_max_mm": self.axis_max_mm.tolist(),
            "axis_mean_deg": self.axis_mean_deg.tolist(),
            "axis_max_deg": self.axis_max_deg.tolist(),
            "max_norm_mm": self.max_norm_mm,
            "mean_norm_mm": self.mean_norm_mm,
            "max_angle_deg": self.max_angle_deg,
            "mean_angle_deg": self.mean_angle_deg,
            "delay_s": self.delay_s,
            "series": {
                "t": self.t.tolist(),
                "trans_err_mm": self.trans_err_mm.tolist(),
                "rot_err_deg": self.rot_err_deg.tolist(),
            },
        }


def _resample(traj, grid):
    """Linear/slerp resampling of a TimedSample list onto a time grid that
    must lie inside the trajectory's span."""
    out = []
    j = 0
    for t in grid:
        while j + 1 < len(traj) - 1 and traj[j + 1].t <= t:
            j += 1
        out.append(lerp_pose(traj[j], traj[j + 1], t))
    return out


def error_metrics(desired, actual, max_delay_scan_s: float = 0.2) -> ErrorReport:
    """Absolute per-axis deviations on the common time grid.

    Both trajectories are resampled (linear translation, slerp rotation)
    onto the portion of the desired grid covered by both; rotational error
    per axis is the minimal-angle Euler difference.  ``delay_s`` is the
    grid shift minimizing the mean translational error, a proxy for the
    end-to-end trajectory delay.
    """
    if len(desired) < 2 or len(actual) < 2:
        raise EmptyTrajectory("need at least two samples per trajectory")
    t0 = max(desired[0].t, actual[0].t)
    t1 = min(desired[-1].t, actual[-1].t)
    if t1 <= t0:
        raise EmptyTrajectory("trajectories do not overlap in time")
    grid = np.array([s.t for s in desired if t0 <= s.t <= t1])
    if len(grid) < 2:
        raise EmptyTrajectory("overlap contains fewer than two samples")
    des = _resample(desired, grid)
    act = _resample(actual, grid)

    dp = np.empty((len(grid), 3))
    de = np.empty((len(grid), 3))
    ang = np.empty(len(grid))
    for i, (a, b) in enumerate(zip(des, act)):
        dpi, dei = pose_delta(a, b)
        dp[i] = np.abs(dpi)
        de[i] = np.abs(dei)
        ang[i] = quat_angle_deg(quat_mul(b.q, quat_conj(a.q)))
    norms = np.linalg.norm(dp, axis=1)

    # delay estimate: the shift aligning the lagging actual onto desired
    dt_grid = float(np.median(np.diff(grid)))
    max_k = min(len(grid) // 2, int(round(max_delay_scan_s / dt_grid)))
    p_des = np.array([s.p for s in des])
    p_act = np.array([s.p for s in act])
    best_k, best_e = 0, math.inf
    for k in range(max_k + 1):
        a = p_des[:len(p_des) - k] if k else p_des
        e = float(np.linalg.norm(a - p_act[k:], axis=1).mean())
        if e < best_e:
            best_k, best_e = k, e
    return ErrorReport(
        axis_mean_mm=dp.mean(axis=0), axis_max_mm=dp.max(axis=0),
        axis_mean_deg=de.mean(axis=0), axis_max_deg=de.max(axis=0),
        max_norm_mm=float(norms.max()), mean_norm_mm=float(norms.mean()),
        max_angle_deg=float(ang.max()), mean_angle_deg=float(ang.mean()),
        delay_s=best_k * dt_grid, t=grid,
        trans_err_mm=norms, rot_err_deg=ang)


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_trajectory_csv(path, samples) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(TRAJECTORY_HEADER + "\n")
        for s in samples:
            e = s.pose.euler
            f.write(",".join([_fmt(s.t), _fmt(s.pose.p[0]), _fmt(s.pose.p[1]),
                              _fmt(s.pose.p[2]), _fmt(e[0]), _fmt(e[1]),
                              _fmt(e[2])]) + "\n")


def read_trajectory_csv(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != TRAJECTORY_HEADER:
        raise ValueError(f"{path}: expected header {TRAJECTORY_HEADER!r}")
    out = []
    for ln in lines[1:]:
        if not ln.strip():
            continue
        vals = [float(v) for v in ln.split(",")]
        if len(vals) != 7:
            raise ValueError(f"{path}: malformed row {ln!r}")
        out.append(TimedSample(vals[0], Pose6.from_euler(vals[1:4], vals[4:7])))
    return out


def write_packets_jsonl(path, packets) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        for pkt in packets:
            f.write(pkt.to_json() + "\n")


def read_packets_jsonl(path):
    return [TrajectoryPacket.from_json(ln)
            for ln in Path(path).read_text(encoding="utf-8").splitlines()
            if ln.strip()]


# ---------------------------------------------------------------------------
# the closed loop
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RunResult:
    report: ErrorReport
    command_report: ErrorReport
    packets: list
    files: dict
    stats: dict


def _make_source(cfg: RunConfig):
    sc = cfg.scenario
    if sc.kind == "sinusoid":
        return SinusoidSource(sc.amp_mm, sc.period_s, sc.rot_amp_deg,
                              sc.rot_period_s).samples(cfg.duration_s,
                                                       cfg.leader_rate_hz)
    if sc.kind == "hand":
        return synth_hand(cfg.seed, cfg.duration_s, sc.profile,
                          cfg.leader_rate_hz, sc.peak_v_mm_s, sc.peak_w_deg_s,
                          sc.gaps, sc.gap_ms, sc.jumps, sc.jump_mm).samples()
    if not sc.path:
        raise ValueError("replay scenario requires scenario.path")
    return read_trajectory_csv(sc.path)


def run_closed_loop(cfg: RunConfig, output_dir=None) -> RunResult:
    """Drive source -> pipeline -> channel -> rates -> pulses -> plant ->
    FK under the virtual clock and report desired-vs-actual deviations."""
    g = cfg.follower_geometry
    home = g.home_pose
    source = _make_source(cfg)
    if not source:
        raise EmptyTrajectory("scenario produced no leader samples")

    pipeline = LeaderPipeline(cfg.scale, cfg.pipeline, home, g)
    channel = Channel()
    upsampler = Upsampler(period=1.0 / cfg.leader_rate_hz)
    bank = MotorBank(cfg.motors.bank_list())
    actuation = FollowerActuation(g, bank, home)
    renderer = HapticRenderer(cfg.haptics, g) if cfg.haptics_enabled else None

    ratio = cfg.follower_rate_hz // cfg.leader_rate_hz
    dt_f = 1.0 / cfg.follower_rate_hz
    n_ticks = int(round(cfg.duration_s * cfg.follower_rate_hz))

    src_by_tick = {}
    for s in source:
        src_by_tick[int(round(s.t * cfg.leader_rate_hz))] = s
    leader0 = source[0].pose

    packets = []
    desired = []        # mapped source reference at leader ticks
    command = []        # emitted packet trajectory
    actual = []         # plant pose at leader ticks
    wrench_rows = []
    pulse_rows = []

    jac = triarm_jacobian(home, g)
    pose_cmd_prev = None
    t_prev = None
    emitted_latency = 0.0

    for n in range(n_ticks):
        t = n / cfg.follower_rate_hz
        if n % ratio == 0:
            k = n // ratio
            sample = src_by_tick.get(k)
            if sample is not None:
                pkt = pipeline.process(sample)
                channel.send(pkt)
                packets.append(pkt)
                dq = quat_mul(sample.pose.q, quat_conj(leader0.q))
                desired.append(TimedSample(sample.t, Pose6(
                    home.p + (sample.pose.p - leader0.p),
                    quat_mul(dq, home.q))))
                command.append(TimedSample(pkt.t, pkt.pose))
                if renderer is not None:
                    vel = Twist(np.full(3, pipeline.stats.vel_estimate / math.sqrt(3.0)),
                                np.full(3, pipeline.stats.ang_estimate / math.sqrt(3.0)))
                    frame = renderer.tick(pipeline.mapped_free, vel)
                    wrench_rows.append((k, frame))
            actual.append(TimedSample(t, actuation.state.pose))

        for s in channel.drain():
            upsampler.push(TimedSample(s.t, s.pose))
        pose_cmd = upsampler.sample_at(t, dt_f)
        if pose_cmd is None:
            continue
        if pose_cmd_prev is None:
            twist = Twist.zero()
        else:
            dts = t - t_prev
            dv = (pose_cmd.p - pose_cmd_prev.p) / dts
            dw = quat_to_rotvec_deg(quat_mul(pose_cmd.q,
                                             quat_conj(pose_cmd_prev.q))) / dts
            twist = Twist(dv, dw)
        if n % ratio == 0:
            jac = triarm_jacobian(pose_cmd, g)
        qdot = joint_rates(twist, pose_cmd, g, jac=jac)
        frame = actuation.step(qdot, dt_f, n, jac0=jac)
        if cfg.outputs.pulse_trace:
            pulse_rows.append((n, frame))
        pose_cmd_prev, t_prev = pose_cmd, t

    report = error_metrics(desired, actual)
    command_report = error_metrics(command, actual)
    # wall-clock derived counters are zeroed under the virtual clock so
    # logs stay byte-deterministic; timing belongs to the benchmark
    budget_violations = (renderer.budget_violations
                         if renderer and cfg.clock == "real" else 0)
    stats = {
        "packets": len(packets),
        "channel_dropped": channel.dropped,
        "limit_rejects": pipeline.stats.limit_rejects,
        "upsampler_stale": upsampler.stale_count,
        "pulse_overspeed": actuation.commander.overspeed,
        "plant_limit_hit": bool(actuation.state.limit_hit),
        "plant_stalled_steps": int(actuation.state.stalled_steps),
        "haptic_budget_violations": budget_violations,
        "structural_latency_s": 1.0 / cfg.leader_rate_hz,
    }

    files = {}
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_packets_jsonl(out / "packets.jsonl", packets)
        write_trajectory_csv(out / "desired.csv", desired)
        write_trajectory_csv(out / "command.csv", command)
        write_trajectory_csv(out / "actual.csv", actual)
        files = {"packets": out / "packets.jsonl", "desired": out / "desired.csv",
                 "command": out / "command.csv", "actual": out / "actual.csv"}
        if cfg.haptics_enabled and cfg.outputs.wrench_trace:
            write_wrench_csv(out / "wrench.csv", wrench_rows,
                             virtual=(cfg.clock == "virtual"))
            files["wrench"] = out / "wrench.csv"
        if cfg.outputs.pulse_trace:
            write_pulse_csv(out / "pulses.csv", pulse_rows)
            files["pulses"] = out / "pulses.csv"
        report_doc = {"source_vs_plant": report.to_dict(),
                      "command_vs_plant": command_report.to_dict(),
                      "stats": stats}
        (out / "report.json").write_text(
            json.dumps(report_doc, indent=1) + "\n", encoding="utf-8")
        files["report"] = out / "report.json"

    return RunResult(report, command_report, packets, files, stats)


def write_wrench_csv(path, rows, virtual: bool = True) -> None:
    """Wrench trace; compute_us is zeroed under the virtual clock so logs
    stay byte-deterministic (wall timings belong to the benchmark)."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("tick,Fx,Fy,Fz,Tx,Ty,Tz,violating,compute_us\n")
        for tick, fr in rows:
            us = 0.0 if virtual else fr.compute_us
            vals = [str(tick)] + [_fmt(v) for v in fr.wrench.F] \
                + [_fmt(v) for v in fr.wrench.tau] \
                + [str(int(fr.violating)), _fmt(us)]
            f.write(",".join(vals) + "\n")


def write_pulse_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("tick,motor,level,dir\n")
        for tick, frame in rows:
            for m in range(6):
                f.write(f"{tick},{m},{int(frame.level[m])},"
                        f"{int(frame.direction[m])}\n")


def replay_packets(packets, cfg: RunConfig, output_dir=None) -> RunResult:
    """Feed a recorded packet log through the follower side only and
    compare the plant trajectory against the packet trajectory."""
    if not packets:
        raise EmptyTrajectory("no packets to replay")
    g = cfg.follower_geometry
    home = g.home_pose
    upsampler = Upsampler(period=1.0 / cfg.leader_rate_hz)
    bank = MotorBank(cfg.motors.bank_list())
    actuation = FollowerActuation(g, bank, home)
    ratio = cfg.follower_rate_hz // cfg.leader_rate_hz
    dt_f = 1.0 / cfg.follower_rate_hz
    t_end = packets[-1].t + 2.0 / cfg.leader_rate_hz
    n_ticks = int(round(t_end * cfg.follower_rate_hz))

    pk_by_tick = {int(round(p.t * cfg.leader_rate_hz)): p for p in packets}
    jac = triarm_jacobian(home, g)
    pose_cmd_prev = None
    t_prev = None
    actual = []
    command = [TimedSample(p.t, p.pose) for p in packets]

    for n in range(n_ticks):
        t = n / cfg.follower_rate_hz
        if n % ratio == 0:
            pkt = pk_by_tick.get(n // ratio)
            if pkt is not None:
                upsampler.push(TimedSample(pkt.t, pkt.pose))
            actual.append(TimedSample(t, actuation.state.pose))
        pose_cmd = upsampler.sample_at(t, dt_f)
        if pose_cmd is None:
            continue
        if pose_cmd_prev is None:
            twist = Twist.zero()
        else:
            dts = t - t_prev
            twist = Twist((pose_cmd.p - pose_cmd_prev.p) / dts,
                          quat_to_rotvec_deg(quat_mul(
                              pose_cmd.q, quat_conj(pose_cmd_prev.q))) / dts)
        if n % ratio == 0:
            jac = triarm_jacobian(pose_cmd, g)
        qdot = joint_rates(twist, pose_cmd, g, jac=jac)
        actuation.step(qdot, dt_f, n, jac0=jac)
        pose_cmd_prev, t_prev = pose_cmd, t

    report = error_metrics(command, actual)
    files = {}
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_trajectory_csv(out / "actual.csv", actual)
        (out / "report.json").write_text(
            json.dumps({"command_vs_plant": report.to_dict()}, indent=1) + "\n",
            encoding="utf-8")
        files = {"actual": out / "actual.csv", "report": out / "report.json"}
    return RunResult(report, report, packets, files,
                     {"packets": len(packets)})
