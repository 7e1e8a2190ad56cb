"""Follower-side actuation: joint-rate computation, pulse/direction
generation and a simulated stepper plant closing the loop.

Pulse generation integrates a per-motor phase with backward Euler,
``phase += K * dt * qdot``, and emits level 1 while ``sin(phase) > 0``.
One rising edge advances the mechanism by one step, so consistency between
pulse frequency and step size requires ``K = 2*pi / step_size``; that is
the default gain and the constructor accepts an override for modelling a
miscalibrated drive.

The sampled pulse train aliases once ``|K * dt * qdot| >= pi`` (more than
half a pulse period per tick); the commander raises an overspeed flag and
the plant simply loses steps, as real hardware would.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose6, Twist
from .triarm import (Jacobian, JointVector, NoConvergence, TriarmGeometry,
                     triarm_fk, triarm_jacobian)

TWO_PI = 2.0 * math.pi


class SingularPose(ValueError):
    """Joint rates requested at a singular Jacobian."""


@dataclass(frozen=True)
class MotorConfig:
    """One stepper axis.

    ``lead`` is mm per revolution for linear axes and degrees per step for
    rotary axes (where ``steps_per_rev`` is informational).  ``gain`` is
    the phase gain K of the pulse integrator; by default it is derived
    from the step size so pulse counts and mechanical steps agree.
    """

    kind: str = "linear"
    steps_per_rev: int = 200
    lead: float = 2.0
    gain: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "rotary"):
            raise ValueError(f"unknown motor kind {self.kind!r}")
        if self.steps_per_rev <= 0 or self.lead <= 0:
            raise ValueError("steps_per_rev and lead must be positive")
        if self.gain is not None and self.gain <= 0:
            raise ValueError("gain must be positive")

    @property
    def step_size(self) -> float:
        """Joint motion per mechanical step (mm or deg)."""
        if self.kind == "rotary":
            return self.lead
        return self.lead / self.steps_per_rev

    @property
    def K(self) -> float:
        """Phase gain (rad per joint unit)."""
        return self.gain if self.gain is not None else TWO_PI / self.step_size


def default_motors() -> list:
    """Three rotary then three linear axes, matching JointVector order.

    The rotary axes default to 1/256 microstepping of a 200-step motor
    (driver-standard); full 1.8 deg steps cannot resolve the sub-degree
    joint motion that millimeter-scale platform commands require.
    """
    rot = MotorConfig(kind="rotary", steps_per_rev=51200, lead=1.8 / 256.0)
    lin = MotorConfig(kind="linear", steps_per_rev=200, lead=2.0)
    return [rot, rot, rot, lin, lin, lin]


class MotorBank:
    """Vectorized view over six motor configs (3 rotary + 3 linear)."""

    def __init__(self, motors=None):
        motors = list(motors) if motors is not None else default_motors()
        if len(motors) != 6:
            raise ValueError("exactly six motors required")
        self.motors = motors
        self.step_sizes = np.array([m.step_size for m in motors])
        self.gains = np.array([m.K for m in motors])


@dataclass(frozen=True, eq=False)
class PulseFrame:
    """Per-motor pulse level and direction bit for one follower tick."""

    tick: int
    level: np.ndarray        # (6,) 0/1
    direction: np.ndarray    # (6,) -1/+1


def pulse_step(phase: float, qdot: float, dt: float, K: float):
    """Single-motor phase integration: returns (new_phase, level).

    Level is 1 while sin(phase) is strictly positive; the measure-zero
    sin(phase) == 0 case is level 0.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    phase = phase + K * dt * qdot
    return phase, 1 if math.sin(phase) > 0.0 else 0


def joint_rates(twist: Twist, x: Pose6, g: TriarmGeometry,
                jac: Jacobian | None = None) -> np.ndarray:
    """Joint rates [theta_dot (deg/s) x3, d_dot (mm/s) x3] for a twist.

    A caller in a tight loop may pass a recently computed Jacobian.
    """
    if jac is None:
        jac = triarm_jacobian(x, g)
    if jac.singular:
        raise SingularPose(f"Jacobian condition number {jac.cond:.3e}")
    return jac.matrix @ twist.as_vec6()


class PulseCommander:
    """Drives the six phase accumulators and emits pulse frames.

    The direction bit follows the sign of the commanded rate; on the frame
    where it flips, the pulse level is blanked so the direction line never
    changes while a pulse is high.
    """

    def __init__(self, bank: MotorBank):
        self.bank = bank
        self.phase = np.zeros(6)
        self.direction = np.ones(6, dtype=np.int8)
        self.overspeed = 0

    def step(self, qdot, dt: float, tick: int) -> PulseFrame:
        if dt <= 0:
            raise ValueError("dt must be positive")
        qdot = np.asarray(qdot, dtype=float)
        dphase = self.bank.gains * dt * qdot
        if np.any(np.abs(dphase) >= math.pi):
            self.overspeed += 1
        self.phase = self.phase + dphase
        direction = np.where(qdot > 0, 1, np.where(qdot < 0, -1,
                                                   self.direction)).astype(np.int8)
        changed = direction != self.direction
        level = ((np.sin(self.phase) > 0.0) & ~changed).astype(np.int8)
        self.direction = direction
        return PulseFrame(tick, level, direction)


@dataclass(frozen=True, eq=False)
class PlantState:
    """Simulated mechanism state: accumulated joints, pose estimate, the
    previous pulse levels (for edge detection), a sticky limit flag and a
    count of steps lost against the structure."""

    q: JointVector
    pose: Pose6
    level: np.ndarray
    limit_hit: bool = False
    stalled_steps: int = 0


def plant_apply(state: PlantState, frame: PulseFrame, bank: MotorBank,
                g: TriarmGeometry, jac0: Jacobian | None = None) -> PlantState:
    """Advance the plant by one pulse frame.

    Each rising edge moves the joint one step in the direction-bit sense;
    joints clamp at their travel limits (raising the sticky flag) and the
    pose estimate is refreshed by warm-started forward kinematics.  A step
    that leaves the joint vector without a nearby consistent pose (which a
    rigid mechanism cannot follow) is treated as the motor losing the step:
    the joint reverts and the stall counter increments.
    """
    rising = (frame.level == 1) & (state.level == 0)
    if not rising.any():
        return PlantState(state.q, state.pose, frame.level.copy(),
                          state.limit_hit, state.stalled_steps)
    dq = np.where(rising, frame.direction * bank.step_sizes, 0.0)
    q6 = state.q.as_vec6() + dq
    lo = np.array([g.theta_min_deg] * 3 + [g.d_min] * 3)
    hi = np.array([g.theta_max_deg] * 3 + [g.d_max] * 3)
    clipped = np.clip(q6, lo, hi)
    limit = bool(state.limit_hit or np.any(clipped != q6))
    q = JointVector.from_vec6(clipped)
    try:
        pose = triarm_fk(q, state.pose, g, tol=1e-9, jac0=jac0)
        stalls = state.stalled_steps
    except NoConvergence:
        q = state.q
        pose = state.pose
        stalls = state.stalled_steps + int(rising.sum())
    return PlantState(q, pose, frame.level.copy(), limit, stalls)


class FollowerActuation:
    """Pulse commander plus plant, stepped by the follower loop."""

    def __init__(self, g: TriarmGeometry, bank: MotorBank | None = None,
                 start_pose: Pose6 | None = None):
        from .triarm import triarm_ik
        self.g = g
        self.bank = bank if bank is not None else MotorBank()
        pose = start_pose if start_pose is not None else g.home_pose
        self.commander = PulseCommander(self.bank)
        self.state = PlantState(triarm_ik(pose, g), pose, np.zeros(6, dtype=np.int8))

    def step(self, qdot, dt: float, tick: int,
             jac0: Jacobian | None = None) -> PulseFrame:
        frame = self.commander.step(qdot, dt, tick)
        self.state = plant_apply(self.state, frame, self.bank, self.g, jac0=jac0)
        return frame
