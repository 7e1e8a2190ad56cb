"""Live session server: ingest leader motion events, run the loop in real
time, stream state snapshots and wrenches over WebSocket.

The engine is a deterministic, manually-ticked object (tested that way);
the FastAPI layer wraps it with a wall-clock ticker per connection.  Every
connection owns an isolated session.

Wire protocol (JSON text frames):

* client -> server::

    {"type": "leader_delta", "seq": n, "t": s, "dp": [mm,mm,mm], "dr": [deg,deg,deg]}
    {"type": "gui_move", "dof": "x|y|z|alpha|beta|gamma", "dx": mm_or_deg, "dt": s}
    {"type": "set_scale", "max_v": mm_s, "max_w": deg_s}
    {"type": "mode", "value": "teleop" | "idle"}

* server -> client::

    {"type": "state", "version": n, "t": s, "leader": pose7,
     "follower": pose7, "joints": [6], "margins": [9], "wrench": [6],
     "flags": {...}}                         (at the stream rate)
    {"type": "ack", "seq": n, ...}           (per leader_delta)
    {"type": "ok" | "error" | "event", ...}  (command results, completions)

pose7 is [x, y, z, qw, qx, qy, qz].
"""
from __future__ import annotations

import asyncio
import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .actuation import FollowerActuation, MotorBank, joint_rates
from .config import RunConfig
from .geometry import (Pose6, TimedSample, Twist, quat_conj,
                       quat_from_axis_angle, quat_mul, quat_to_rotvec_deg)
from .haptics import HapticRenderer
from .pipeline import (LeaderPipeline, ScaleConfig, Upsampler, timed_move)
from .triarm import triarm_jacobian, workspace_margin

DOFS = ("x", "y", "z", "alpha", "beta", "gamma")


class WrongMode(Exception):
    pass


class MalformedEvent(Exception):
    pass


class Busy(Exception):
    pass


class LimitWouldBeViolated(Exception):
    pass


@dataclass
class GuiMove:
    dof: int
    x0: float
    dx: float
    t0: float
    dt: float


@dataclass
class SessionStats:
    events: int = 0
    stale_dropped: int = 0
    queue_dropped: int = 0
    snapshots_dropped: int = 0
    ticks: int = 0


class SessionEngine:
    """One teleoperation session: virtual leader device, motion pipeline,
    follower actuation and haptic rendering, advanced in leader-period
    ticks.  Deterministic: no wall-clock reads."""

    STALE_EVENT_S = 0.1

    def __init__(self, cfg: RunConfig, queue_capacity: int = 1024):
        self.cfg = cfg
        g = cfg.follower_geometry
        self.g = g
        self.mode = "idle"
        self.version = 0
        self.t = 0.0
        self.leader_pose = Pose6.identity()
        self.pipeline = LeaderPipeline(cfg.scale, cfg.pipeline, g.home_pose, g)
        self.upsampler = Upsampler(period=1.0 / cfg.leader_rate_hz)
        self.actuation = FollowerActuation(g, MotorBank(cfg.motors.bank_list()),
                                           g.home_pose)
        self.renderer = (HapticRenderer(cfg.haptics, g)
                         if cfg.haptics_enabled else None)
        self.wrench = np.zeros(6)
        self.events: deque = deque()
        self.queue_capacity = queue_capacity
        self.gui_move: GuiMove | None = None
        self.outbox: list = []
        self.stats = SessionStats()
        self._ratio = cfg.follower_rate_hz // cfg.leader_rate_hz
        self._dt_leader = 1.0 / cfg.leader_rate_hz
        self._dt_follower = 1.0 / cfg.follower_rate_hz
        self._jac = triarm_jacobian(g.home_pose, g)
        self._pose_cmd_prev: Pose6 | None = None
        self._follower_tick = 0
        self._base_scale = cfg.scale
        # anchor the pipeline on the pre-event leader pose so the first
        # motion event is an increment, not part of the baseline
        pkt = self.pipeline.process(TimedSample(0.0, self.leader_pose))
        self.upsampler.push(TimedSample(pkt.t, pkt.pose))
        self.t = self._dt_leader

    # -- command handling --------------------------------------------------

    def set_mode(self, value: str) -> None:
        if value not in ("idle", "teleop"):
            raise MalformedEvent(f"unknown mode {value!r}")
        if self.gui_move is not None:
            raise Busy("a gui move is in progress")
        self.mode = value

    def set_scale(self, max_v: float, max_w: float) -> None:
        scale = ScaleConfig(max_v, max_w)
        self._base_scale = scale
        self.pipeline.scale = scale
        if self.gui_move is None:
            self.pipeline.limiter.scale = scale

    def handle_leader_event(self, ev: dict, now: float | None = None) -> dict:
        """Queue a leader motion event; returns the ack (with a stale flag
        when the event was too old to act on)."""
        self.stats.events += 1
        if self.mode != "teleop":
            raise WrongMode(f"leader events need teleop mode, not {self.mode}")
        try:
            seq = int(ev["seq"])
            t_ev = float(ev.get("t", self.t))
            if "pose" in ev:
                payload = ("abs", Pose6.from_vec7(ev["pose"]))
            else:
                dp = np.asarray(ev["dp"], dtype=float).reshape(3)
                dr = np.asarray(ev["dr"], dtype=float).reshape(3)
                payload = ("delta", (dp, dr))
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedEvent(str(e)) from e
        now = self.t if now is None else now
        if now - t_ev > self.STALE_EVENT_S:
            self.stats.stale_dropped += 1
            return {"type": "ack", "seq": seq, "stale": True}
        if len(self.events) >= self.queue_capacity:
            self.events.popleft()
            self.stats.queue_dropped += 1
        self.events.append(payload)
        return {"type": "ack", "seq": seq, "stale": False}

    def start_gui_move(self, dof: str, dx: float, dt: float) -> dict:
        if self.mode != "idle":
            raise Busy(f"gui moves start from idle, not {self.mode}")
        if dof not in DOFS:
            raise MalformedEvent(f"unknown dof {dof!r}")
        if dt <= 0:
            raise MalformedEvent("dt must be positive")
        idx = DOFS.index(dof)
        target = self.pipeline.follower_target.as_vec6()
        target[idx] += dx
        pose = Pose6.from_euler(target[:3], target[3:])
        if float(workspace_margin(pose, self.g).min()) < 0.0:
            raise LimitWouldBeViolated(
                f"target {dof}{dx:+g} leaves the follower workspace")
        x0 = float(self.leader_pose.as_vec6()[idx])
        if dx == 0.0:
            self.outbox.append({"type": "event", "event": "move_done",
                                "dof": dof, "t": self.t})
            return {"type": "ok", "move": {"dof": dof, "dx": 0.0, "dt": dt,
                                           "t0": self.t, "done": True}}
        self.gui_move = GuiMove(idx, x0, dx, self.t, dt)
        self.mode = "gui-move"
        # the move profile defines its own peak speed (user-imposed time
        # interval); widen the limiter to honor it, restored on completion
        peak = abs(dx) * math.pi / (2.0 * dt) * 1.05
        base = self._base_scale
        if idx < 3:
            self.pipeline.limiter.scale = ScaleConfig(max(base.max_v, peak),
                                                      base.max_w)
        else:
            self.pipeline.limiter.scale = ScaleConfig(base.max_v,
                                                      max(base.max_w, peak))
        return {"type": "ok", "move": {"dof": dof, "dx": dx, "dt": dt,
                                       "t0": self.t}}

    # -- the loop ----------------------------------------------------------

    def _leader_sample(self):
        scale_override = None
        if self.mode == "teleop":
            dp = np.zeros(3)
            dq = np.array([1.0, 0.0, 0.0, 0.0])
            while self.events:
                kind, payload = self.events.popleft()
                if kind == "abs":
                    self.leader_pose = payload
                    dp = np.zeros(3)
                    dq = np.array([1.0, 0.0, 0.0, 0.0])
                else:
                    edp, edr = payload
                    dp = dp + edp
                    ang = float(np.linalg.norm(edr))
                    if ang > 0.0:
                        dq = quat_mul(quat_from_axis_angle(edr, ang), dq)
            if np.any(dp != 0.0) or dq[0] != 1.0:
                self.leader_pose = Pose6(self.leader_pose.p + dp,
                                         quat_mul(dq, self.leader_pose.q))
        elif self.gui_move is not None:
            mv = self.gui_move
            vec = self.leader_pose.as_vec6()
            vec[mv.dof] = timed_move(mv.x0, mv.dx, mv.t0, mv.dt, self.t)
            self.leader_pose = Pose6.from_euler(vec[:3], vec[3:])
            scale_override = (1.0, 1.0)
            if self.t >= mv.t0 + mv.dt:
                self.outbox.append({"type": "event", "event": "move_done",
                                    "dof": DOFS[mv.dof], "t": self.t})
                self.gui_move = None
                self.mode = "idle"
                self.pipeline.limiter.scale = self._base_scale
        return TimedSample(self.t, self.leader_pose), scale_override

    def tick(self) -> None:
        """Advance one leader period: leader stage plus the follower
        sub-ticks and one haptic update."""
        sample, scale_override = self._leader_sample()
        pkt = self.pipeline.process(sample, scale_override)
        self.upsampler.push(TimedSample(pkt.t, pkt.pose))
        for _ in range(self._ratio):
            self._follower_tick += 1
            t = self._follower_tick * self._dt_follower
            pose_cmd = self.upsampler.sample_at(t, self._dt_follower)
            if pose_cmd is None:
                continue
            if self._pose_cmd_prev is None:
                twist = Twist.zero()
            else:
                dv = (pose_cmd.p - self._pose_cmd_prev.p) / self._dt_follower
                dw = quat_to_rotvec_deg(quat_mul(
                    pose_cmd.q, quat_conj(self._pose_cmd_prev.q))) / self._dt_follower
                twist = Twist(dv, dw)
            qdot = joint_rates(twist, pose_cmd, self.g, jac=self._jac)
            self.actuation.step(qdot, self._dt_follower, self._follower_tick,
                                jac0=self._jac)
            self._pose_cmd_prev = pose_cmd
        if self._pose_cmd_prev is not None:
            self._jac = triarm_jacobian(self._pose_cmd_prev, self.g)
        if self.renderer is not None:
            vel = Twist(np.full(3, self.pipeline.stats.vel_estimate / math.sqrt(3.0)),
                        np.full(3, self.pipeline.stats.ang_estimate / math.sqrt(3.0)))
            frame = self.renderer.tick(self.pipeline.mapped_free, vel)
            self.wrench = frame.wrench.as_vec6()
        self.t += self._dt_leader
        self.version += 1
        self.stats.ticks += 1

    def advance_to(self, t_target: float, max_catchup_s: float = 0.25) -> None:
        """Run due ticks up to ``t_target`` seconds of session time,
        shedding backlog beyond the catch-up horizon."""
        if t_target - self.t > max_catchup_s:
            self.t = t_target - max_catchup_s
        while self.t + self._dt_leader <= t_target:
            self.tick()

    # -- state -------------------------------------------------------------

    def snapshot(self) -> dict:
        margins = workspace_margin(self.actuation.state.pose, self.g)
        return {
            "type": "state",
            "version": self.version,
            "t": self.t,
            "leader": self.leader_pose.as_vec7(),
            "follower": self.actuation.state.pose.as_vec7(),
            "joints": self.actuation.state.q.as_vec6().tolist(),
            "margins": margins.tolist(),
            "wrench": self.wrench.tolist(),
            "flags": {
                "mode": self.mode,
                "moving": self.gui_move is not None,
                "limit_rejects": self.pipeline.stats.limit_rejects,
                "plant_limit": bool(self.actuation.state.limit_hit),
                "stale_input": self.upsampler.stale,
                "events_stale_dropped": self.stats.stale_dropped,
                "events_queue_dropped": self.stats.queue_dropped,
                "snapshots_dropped": self.stats.snapshots_dropped,
                "scale": [self.pipeline.scale.max_v, self.pipeline.scale.max_w],
            },
        }

    def handle_message(self, msg: dict) -> dict:
        """Dispatch one wire message; returns the reply frame."""
        try:
            if not isinstance(msg, dict) or "type" not in msg:
                raise MalformedEvent("message must be an object with a type")
            kind = msg["type"]
            if kind == "leader_delta":
                return self.handle_leader_event(msg)
            if kind == "gui_move":
                return self.start_gui_move(str(msg.get("dof", "")),
                                           float(msg.get("dx", 0.0)),
                                           float(msg.get("dt", 0.0)))
            if kind == "set_scale":
                self.set_scale(float(msg["max_v"]), float(msg["max_w"]))
                return {"type": "ok"}
            if kind == "mode":
                self.set_mode(str(msg.get("value", "")))
                return {"type": "ok", "mode": self.mode}
            raise MalformedEvent(f"unknown message type {kind!r}")
        except (WrongMode, MalformedEvent, Busy, LimitWouldBeViolated) as e:
            return {"type": "error", "error": type(e).__name__, "detail": str(e),
                    **({"seq": msg["seq"]} if isinstance(msg, dict)
                       and "seq" in msg else {})}
        except (KeyError, TypeError, ValueError) as e:
            return {"type": "error", "error": "MalformedEvent", "detail": str(e)}


def create_app(cfg: RunConfig, stream_hz: float = 60.0,
               static_dir=None):
    """FastAPI application: one isolated SessionEngine per WebSocket."""
    app = FastAPI(title="triteleop")

    @app.get("/healthz")
    async def healthz():
        return {"ok": True}

    @app.websocket("/ws")
    async def ws(websocket: WebSocket):
        await websocket.accept()
        engine = SessionEngine(cfg)
        send_lock = asyncio.Lock()
        stop = asyncio.Event()
        t0 = time.perf_counter()

        async def ticker():
            period = engine._dt_leader
            while not stop.is_set():
                engine.advance_to(time.perf_counter() - t0)
                for ev in engine.outbox:
                    async with send_lock:
                        await websocket.send_json(ev)
                engine.outbox.clear()
                await asyncio.sleep(max(period, 2e-3))

        async def streamer():
            period = 1.0 / stream_hz
            next_at = time.perf_counter()
            while not stop.is_set():
                snap = engine.snapshot()
                async with send_lock:
                    await websocket.send_json(snap)
                next_at += period
                behind = time.perf_counter() - next_at
                if behind > period:   # consumer slower than the stream rate
                    skipped = int(behind / period)
                    engine.stats.snapshots_dropped += skipped
                    next_at += skipped * period
                await asyncio.sleep(max(0.0, next_at - time.perf_counter()))

        tasks = [asyncio.create_task(ticker()), asyncio.create_task(streamer())]
        try:
            while True:
                msg = await websocket.receive_json()
                reply = engine.handle_message(msg)
                async with send_lock:
                    await websocket.send_json(reply)
        except WebSocketDisconnect:
            pass
        finally:
            stop.set()
            for task in tasks:
                task.cancel()

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="cockpit")
    return app
