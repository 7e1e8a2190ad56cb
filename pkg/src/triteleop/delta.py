"""Inverse kinematics of the leader device's delta translation stage.

The translation stage is three identical kinematic chains between a fixed
base and the moving handle platform.  Each chain i has its own coordinate
frame reached by a z-rotation (chain angle ``phi_i``) composed with a fixed
y-tilt ``theta``, plus a constant offset.  Inside that frame the chain is a
planar two-link arm (links ``a`` and the projection of ``b``) with the third
angle setting the projection length.

The serial wrist that carries orientation is three independent revolute
axes; it needs no IK beyond per-axis limit bookkeeping.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import wrap_deg


class Unreachable(ValueError):
    """No real chain solution exists for the requested point."""

    def __init__(self, msg, chain=None):
        super().__init__(msg)
        self.chain = chain


class BranchViolation(ValueError):
    """Only solutions outside the physical branch constraints exist."""

    def __init__(self, msg, chain=None):
        super().__init__(msg)
        self.chain = chain


@dataclass(frozen=True)
class DeltaGeometry:
    """Link lengths (mm) and chain placement of the delta stage.

    ``s`` is the second component of the per-chain frame offset; it is kept
    configurable because it is a property of the physical device and the
    default (equal to ``f``) is only a documented placeholder.
    """

    a: float = 84.0
    b: float = 175.0
    r: float = 79.0
    c: float = 42.0
    f: float = 37.0
    s: float = 37.0
    theta_deg: float = 45.0
    phi_deg: tuple = (-17.0, -137.0, 103.0)

    def __post_init__(self):
        if min(self.a, self.b, self.r, self.c, self.f) <= 0:
            raise ValueError("link lengths must be positive")
        if len(self.phi_deg) != 3:
            raise ValueError("exactly three chains required")

    def chain_rotation(self, i: int) -> np.ndarray:
        """Rotation of Eq-form ``Mz(phi_i) @ My(theta)`` taking base
        coordinates into chain-i coordinates."""
        phi = math.radians(self.phi_deg[i])
        th = math.radians(self.theta_deg)
        mz = np.array([
            [math.cos(phi), math.sin(phi), 0.0],
            [-math.sin(phi), math.cos(phi), 0.0],
            [0.0, 0.0, 1.0],
        ])
        my = np.array([
            [math.cos(th), 0.0, math.sin(th)],
            [0.0, 1.0, 0.0],
            [-math.sin(th), 0.0, math.cos(th)],
        ])
        return mz @ my

    def chain_offset(self) -> np.ndarray:
        return np.array([-self.r, -self.s, 0.0])


@dataclass(frozen=True)
class ChainAngles:
    """Joint angles of one chain, degrees.  th3 > 0 and th1 in the first
    quadrant are the physical branch."""

    th1: float
    th2: float
    th3: float


@dataclass(frozen=True)
class WristLimits:
    """Per-axis travel limits (deg) of the serial wrist."""

    lo: tuple = (-135.0, -135.0, -135.0)
    hi: tuple = (135.0, 135.0, 135.0)

    def margins(self, euler_deg) -> np.ndarray:
        e = np.asarray(euler_deg, dtype=float)
        return np.concatenate([e - np.asarray(self.lo), np.asarray(self.hi) - e])

    def inside(self, euler_deg) -> bool:
        return bool(np.all(self.margins(euler_deg) >= 0.0))


def to_chain_frame(point, i: int, g: DeltaGeometry) -> np.ndarray:
    """Express a base-frame point in chain i's coordinate frame."""
    return g.chain_rotation(i) @ np.asarray(point, dtype=float) + g.chain_offset()


def from_chain_frame(uvw, i: int, g: DeltaGeometry) -> np.ndarray:
    """Inverse of :func:`to_chain_frame` (used by tests and target synthesis)."""
    return g.chain_rotation(i).T @ (np.asarray(uvw, dtype=float) - g.chain_offset())


def chain_forward(angles: ChainAngles, g: DeltaGeometry) -> np.ndarray:
    """Chain-frame position produced by a set of chain angles."""
    t1, t2, t3 = (math.radians(v) for v in (angles.th1, angles.th2, angles.th3))
    rho = g.b * math.sin(t3)
    return np.array([
        g.a * math.cos(t1) - g.c + rho * math.cos(t2),
        g.b * math.cos(t3) - g.f,
        g.a * math.sin(t1) + rho * math.sin(t2),
    ])


def solve_chain_ik(point, i: int, g: DeltaGeometry) -> ChainAngles:
    """Closed-form IK of one chain for a base-frame point.

    th3 comes from the v-coordinate alone (positive branch); the remaining
    (th1, th2) system is a planar two-link arm solved in closed form, with
    th1 restricted to the open first quadrant.
    """
    u, v, w = to_chain_frame(point, i, g)

    cos_t3 = (v + g.f) / g.b
    if abs(cos_t3) > 1.0 + 1e-12:
        raise Unreachable(f"chain {i}: v-coordinate {v:.3f} mm out of range", chain=i)
    cos_t3 = max(-1.0, min(1.0, cos_t3))
    t3 = math.acos(cos_t3)
    rho = g.b * math.sin(t3)
    if rho < 1e-9:
        raise BranchViolation(f"chain {i}: th3 at branch boundary", chain=i)

    x = u + g.c
    y = w
    L = math.hypot(x, y)
    if L > g.a + rho + 1e-9 or L < abs(g.a - rho) - 1e-9:
        raise Unreachable(f"chain {i}: planar target {L:.3f} mm outside annulus", chain=i)
    cos_k = (L * L + g.a * g.a - rho * rho) / (2.0 * g.a * L)
    cos_k = max(-1.0, min(1.0, cos_k))
    k = math.acos(cos_k)
    base = math.atan2(y, x)

    candidates = []
    for t1 in (base - k, base + k):
        t1d = wrap_deg(math.degrees(t1))
        if 0.0 < t1d < 90.0:
            t2 = math.atan2(y - g.a * math.sin(math.radians(t1d)),
                            x - g.a * math.cos(math.radians(t1d)))
            candidates.append(ChainAngles(t1d, math.degrees(t2), math.degrees(t3)))
    if not candidates:
        raise BranchViolation(f"chain {i}: no solution with th1 in (0, 90) deg", chain=i)
    # ties are possible only deep in the elbow-fold region; smallest th1 is
    # the stable deterministic pick
    return min(candidates, key=lambda ca: ca.th1)


def solve_delta_ik(point, g: DeltaGeometry):
    """IK of all three chains; errors carry the first failing chain index."""
    return tuple(solve_chain_ik(point, i, g) for i in range(3))


def chain_residual(point, angles: ChainAngles, i: int, g: DeltaGeometry) -> float:
    """Back-substitution residual (mm) of a chain solution."""
    return float(np.linalg.norm(chain_forward(angles, g) - to_chain_frame(point, i, g)))


def delta_home(g: DeltaGeometry, k: float = 150.0) -> np.ndarray:
    """A point on the symmetry axis of the three chains, a convenient
    interior reference for workspace sampling.

    Points with ``My(theta) @ P`` on the +z axis look identical to every
    chain, so the workspace center lies along that ray.
    """
    th = math.radians(g.theta_deg)
    return k * np.array([-math.sin(th), 0.0, math.cos(th)])
