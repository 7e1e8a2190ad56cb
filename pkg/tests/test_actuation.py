import math

import numpy as np
import pytest

from triteleop.actuation import (FollowerActuation, MotorBank, MotorConfig,
                                 PlantState, PulseCommander, PulseFrame,
                                 SingularPose, default_motors, joint_rates,
                                 plant_apply, pulse_step)
from triteleop.geometry import Pose6, Twist
from triteleop.triarm import (JointVector, TriarmGeometry, triarm_ik,
                              triarm_jacobian)


def test_motor_config_defaults_and_validation():
    m = MotorConfig(kind="linear", steps_per_rev=200, lead=2.0)
    assert m.step_size == 0.01
    assert abs(m.K - 2 * math.pi / 0.01) < 1e-12
    r = MotorConfig(kind="rotary", steps_per_rev=200, lead=1.8)
    assert r.step_size == 1.8
    with pytest.raises(ValueError):
        MotorConfig(kind="hydraulic")
    with pytest.raises(ValueError):
        MotorConfig(lead=-1.0)
    explicit = MotorConfig(kind="linear", gain=123.0)
    assert explicit.K == 123.0


def test_pulse_step_contract():
    phase, level = pulse_step(0.0, 0.0, 1e-4, 100.0)
    assert phase == 0.0 and level == 0        # sin(0) == 0 resolves to 0
    phase, level = pulse_step(0.0, 1.0, 1e-2, 100.0)
    assert phase == 1.0 and level == 1
    with pytest.raises(ValueError):
        pulse_step(0.0, 1.0, 0.0, 100.0)


@pytest.mark.parametrize("rate", [0.01, 0.1, 1.0, 10.0])
def test_edge_count_matches_analytic_frequency(rate):
    bank = MotorBank()
    cm = PulseCommander(bank)
    prev = np.zeros(6, dtype=np.int8)
    edges = np.zeros(6)
    T, dt = 2.0, 1e-4
    qdot = np.full(6, rate)
    for tick in range(int(T / dt)):
        fr = cm.step(qdot, dt, tick)
        edges += ((fr.level == 1) & (prev == 0))
        prev = fr.level
    expected = bank.gains * rate * T / (2 * math.pi)
    assert np.abs(edges - expected).max() <= 1.0
    assert cm.overspeed == 0


def test_direction_bit_semantics():
    bank = MotorBank()
    cm = PulseCommander(bank)
    rng = np.random.default_rng(0)
    prev_frame = None
    rate = np.full(6, 0.5)
    for tick in range(4000):
        if rng.uniform() < 0.01:
            rate = -rate
        fr = cm.step(rate, 1e-4, tick)
        assert np.all(fr.direction == np.sign(rate))
        if prev_frame is not None:
            flipped = fr.direction != prev_frame.direction
            # the level is blanked on the flip frame: the direction line
            # never changes while a pulse is high
            assert not np.any(flipped & (fr.level == 1) & (prev_frame.level == 1))
            assert np.all(fr.level[flipped] == 0)
        prev_frame = fr


def test_direction_holds_at_zero_rate():
    bank = MotorBank()
    cm = PulseCommander(bank)
    fr = cm.step(np.full(6, 1.0), 1e-4, 0)
    assert np.all(fr.direction == 1)
    fr = cm.step(np.zeros(6), 1e-4, 1)
    assert np.all(fr.direction == 1)
    phase_before = cm.phase.copy()
    fr2 = cm.step(np.zeros(6), 1e-4, 2)
    assert np.all(cm.phase == phase_before)
    assert np.all(fr2.level == fr.level)


def test_overspeed_flag():
    bank = MotorBank()
    cm = PulseCommander(bank)
    huge = np.full(6, 1e7)
    cm.step(huge, 1e-4, 0)
    assert cm.overspeed == 1


def test_joint_rates(triarm_geometry):
    g = triarm_geometry
    home = g.home_pose
    assert np.all(joint_rates(Twist.zero(), home, g) == 0.0)
    qdot = joint_rates(Twist([0, 0, 1.0], [0, 0, 0]), home, g)
    assert np.ptp(qdot[3:]) < 1e-9 and qdot[3:].min() > 0
    # oracle: explicit matrix multiply with an independently computed J
    tw = Twist([1.0, -2.0, 0.5], [0.1, 0.2, -0.3])
    ref = triarm_jacobian(home, g).matrix @ tw.as_vec6()
    assert np.abs(joint_rates(tw, home, g) - ref).max() < 1e-12


def test_joint_rates_singular():
    gs = TriarmGeometry(fixed_radius=180.0, moving_radius=180.0,
                        moving_anchor_deg=(0.0, 120.0, 240.0))
    with pytest.raises(SingularPose):
        joint_rates(Twist([0, 0, 1.0], [0, 0, 0]), gs.home_pose, gs)


def test_plant_no_edges_is_identity(triarm_geometry):
    g = triarm_geometry
    bank = MotorBank()
    home = g.home_pose
    state = PlantState(triarm_ik(home, g), home, np.zeros(6, dtype=np.int8))
    frame = PulseFrame(0, np.zeros(6, dtype=np.int8), np.ones(6, dtype=np.int8))
    out = plant_apply(state, frame, bank, g)
    assert out.q is state.q and out.pose is state.pose


def test_plant_step_arithmetic(triarm_geometry):
    g = triarm_geometry
    bank = MotorBank()
    home = g.home_pose
    state = PlantState(triarm_ik(home, g), home, np.zeros(6, dtype=np.int8))
    d0 = state.q.d.copy()
    level = np.array([0, 0, 0, 1, 1, 1], dtype=np.int8)
    direction = np.ones(6, dtype=np.int8)
    edges = 0
    for k in range(8):
        frame = PulseFrame(k, level if k % 2 == 0 else np.zeros(6, dtype=np.int8),
                           direction)
        before = state.q.d.copy()
        state = plant_apply(state, frame, bank, g)
        if k % 2 == 0:
            edges += 1
            assert np.allclose(state.q.d - before, bank.step_sizes[3:])
    assert np.allclose(state.q.d - d0, edges * bank.step_sizes[3:])


def test_plant_quantization_bound(triarm_geometry):
    """Joint value never deviates from the continuous integral of the
    commanded rate by more than one step."""
    g = triarm_geometry
    act = FollowerActuation(g)
    q0 = act.state.q.as_vec6().copy()
    rate = np.array([0.05, -0.03, 0.02, 0.7, -0.4, 0.9])
    dt = 1e-4
    worst = np.zeros(6)
    for tick in range(5000):
        act.step(rate, dt, tick)
        integral = q0 + rate * dt * (tick + 1)
        worst = np.maximum(worst,
                           np.abs(act.state.q.as_vec6() - integral))
    assert np.all(worst <= act.bank.step_sizes + 1e-12)
    assert act.state.stalled_steps == 0


def test_plant_determinism(triarm_geometry):
    g = triarm_geometry
    rng = np.random.default_rng(5)
    rates = rng.normal(size=(800, 6)) * np.array([0.05] * 3 + [0.8] * 3)
    seqs = []
    for _ in range(2):
        act = FollowerActuation(g)
        trace = []
        for tick, r in enumerate(rates):
            act.step(r, 1e-4, tick)
            trace.append((act.state.q.as_vec6().tobytes(),
                          act.state.pose.p.tobytes(),
                          act.state.pose.q.tobytes()))
        seqs.append(trace)
    assert seqs[0] == seqs[1]


def test_plant_joint_limit_clamp():
    g = TriarmGeometry(d_max=296.0)   # barely above home length
    act = FollowerActuation(g)
    for tick in range(4000):
        act.step(np.array([0, 0, 0, 5.0, 5.0, 5.0]), 1e-4, tick)
    assert act.state.limit_hit
    assert np.all(act.state.q.d <= 296.0 + 1e-12)


def test_plant_survives_inconsistent_coarse_steps(triarm_geometry):
    """Full-step rotary motors push the joint vector off the reachable
    manifold; the plant must model the lost step instead of raising."""
    g = triarm_geometry
    coarse = [MotorConfig(kind="rotary", steps_per_rev=200, lead=1.8)] * 3 \
        + [MotorConfig(kind="linear", steps_per_rev=200, lead=2.0)] * 3
    act = FollowerActuation(g, MotorBank(coarse))
    rate = np.array([3.0, 0.0, 0.0, 4.0, 4.0, 4.0])
    for tick in range(3000):
        act.step(rate, 1e-4, tick)   # must not raise
    assert act.state.pose is not None


def test_default_motors_resolution():
    motors = default_motors()
    assert motors[0].kind == "rotary"
    assert motors[0].step_size < 0.01      # microstepped rotary
    assert motors[3].step_size == 0.01     # 10 um linear steps
