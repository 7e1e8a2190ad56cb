import numpy as np
import pytest
from fastapi.testclient import TestClient

from triteleop.config import config_from_dict
from triteleop.pipeline import timed_move
from triteleop.service import SessionEngine, create_app
from triteleop.triarm import workspace_margin
from triteleop.geometry import Pose6


def engine(**over):
    # responsive teleop tuning, mirroring the bundled service config
    doc = {"scale": {"max_v": 500.0, "max_w": 50.0},
           "pipeline": {"smoothing_window": 4, "kalman_q": 1e4,
                        "kalman_reset_mm": 0.2, "kalman_reset_deg": 0.2,
                        "a_max": 5000.0, "alpha_max": 2000.0},
           "haptics_enabled": False}
    doc.update(over)
    return SessionEngine(config_from_dict(doc))


def test_initial_state():
    eng = engine()
    s = eng.snapshot()
    assert s["flags"]["mode"] == "idle"
    assert s["follower"][2] == 284.0
    assert len(s["joints"]) == 6 and len(s["margins"]) == 9
    assert len(s["wrench"]) == 6


def test_leader_event_requires_teleop_mode():
    eng = engine()
    reply = eng.handle_message({"type": "leader_delta", "seq": 1, "t": 0.0,
                                "dp": [1, 0, 0], "dr": [0, 0, 0]})
    assert reply["type"] == "error" and reply["error"] == "WrongMode"
    assert reply["seq"] == 1


def test_zero_delta_leaves_follower_unchanged():
    eng = engine()
    eng.handle_message({"type": "mode", "value": "teleop"})
    before = eng.snapshot()["follower"]
    eng.handle_message({"type": "leader_delta", "seq": 1, "t": 0.001,
                        "dp": [0, 0, 0], "dr": [0, 0, 0]})
    for _ in range(50):
        eng.tick()
    after = eng.snapshot()["follower"]
    assert np.abs(np.array(after) - np.array(before)).max() < 1e-9


def test_one_mm_delta_reaches_follower():
    eng = engine()
    eng.handle_message({"type": "mode", "value": "teleop"})
    ack = eng.handle_message({"type": "leader_delta", "seq": 7, "t": 0.001,
                              "dp": [1, 0, 0], "dr": [0, 0, 0]})
    assert ack == {"type": "ack", "seq": 7, "stale": False}
    # two 60 Hz stream frames of engine time
    for _ in range(34):
        eng.tick()
    x = eng.snapshot()["follower"][0]
    assert abs(x - 1.0) < 0.1


def test_stale_event_dropped_and_flagged():
    eng = engine()
    eng.handle_message({"type": "mode", "value": "teleop"})
    for _ in range(300):
        eng.tick()
    ack = eng.handle_message({"type": "leader_delta", "seq": 2, "t": 0.0,
                              "dp": [1, 0, 0], "dr": [0, 0, 0]})
    assert ack["stale"] is True
    assert eng.stats.stale_dropped == 1


def test_malformed_event():
    eng = engine()
    eng.handle_message({"type": "mode", "value": "teleop"})
    reply = eng.handle_message({"type": "leader_delta", "seq": "x",
                                "dp": [1, 0]})
    assert reply["type"] == "error" and reply["error"] == "MalformedEvent"


def test_gui_move_profile_and_completion():
    eng = engine()
    r = eng.handle_message({"type": "gui_move", "dof": "z", "dx": 10.0,
                            "dt": 0.5})
    assert r["type"] == "ok"
    t0 = r["move"]["t0"]
    zs = []
    while eng.mode == "gui-move":
        eng.tick()
        zs.append((eng.t, eng.snapshot()["follower"][2]))
    for _ in range(200):      # let the tail settle
        eng.tick()
    final = eng.snapshot()["follower"][2]
    assert abs(final - 294.0) < 0.05
    assert eng.mode == "idle"
    assert any(ev["event"] == "move_done" for ev in eng.outbox)
    # the z series matches the analytic profile within a small lag
    arr = np.array(zs)
    lag_errs = []
    for lag_ms in range(0, 17):
        ref = np.array([timed_move(284.0, 10.0, t0 + lag_ms * 1e-3, 0.5, t)
                        for t, _ in arr])
        lag_errs.append(np.abs(ref - arr[:, 1]).max())
    assert min(lag_errs) < 0.15


def test_gui_move_zero_dx_completes_immediately():
    eng = engine()
    before = eng.snapshot()["follower"]
    r = eng.handle_message({"type": "gui_move", "dof": "x", "dx": 0.0,
                            "dt": 2.0})
    assert r["type"] == "ok" and r["move"].get("done")
    assert eng.mode == "idle"
    assert eng.outbox and eng.outbox[0]["event"] == "move_done"
    eng.tick()
    assert np.abs(np.array(eng.snapshot()["follower"]) -
                  np.array(before)).max() < 1e-9


def test_gui_move_limit_would_be_violated():
    eng = engine()
    before = eng.pipeline.follower_target
    r = eng.handle_message({"type": "gui_move", "dof": "z", "dx": 500.0,
                            "dt": 1.0})
    assert r["type"] == "error"
    assert r["error"] == "LimitWouldBeViolated"
    assert eng.mode == "idle"
    eng.tick()
    assert np.all(eng.pipeline.follower_target.p == before.p)


def test_busy_during_gui_move():
    eng = engine()
    eng.handle_message({"type": "gui_move", "dof": "z", "dx": 5.0, "dt": 1.0})
    r = eng.handle_message({"type": "mode", "value": "teleop"})
    assert r["type"] == "error" and r["error"] == "Busy"
    r2 = eng.handle_message({"type": "gui_move", "dof": "x", "dx": 1.0,
                             "dt": 1.0})
    assert r2["type"] == "error" and r2["error"] == "Busy"


def test_set_scale():
    eng = engine()
    r = eng.handle_message({"type": "set_scale", "max_v": 3.0, "max_w": 0.5})
    assert r["type"] == "ok"
    assert eng.pipeline.scale.max_v == 3.0
    assert eng.snapshot()["flags"]["scale"] == [3.0, 0.5]
    r = eng.handle_message({"type": "set_scale", "max_v": -1.0, "max_w": 0.5})
    assert r["type"] == "error"


def test_version_strictly_increasing_and_idle_snapshots_static():
    eng = engine()
    prev = eng.snapshot()
    for _ in range(20):
        eng.tick()
        snap = eng.snapshot()
        assert snap["version"] > prev["version"]
        for key in ("leader", "follower", "joints", "margins", "wrench"):
            assert snap[key] == prev[key]
        prev = snap


def test_snapshots_never_expose_deep_violations():
    """The safety clamp: even when the leader rams the boundary, exposed
    poses never violate the workspace by more than one plant step."""
    eng = engine()
    eng.handle_message({"type": "mode", "value": "teleop"})
    seq = 0
    worst = 0.0
    for k in range(1200):
        seq += 1
        eng.handle_message({"type": "leader_delta", "seq": seq, "t": eng.t,
                            "dp": [0, 0, 0.4], "dr": [0, 0, 0]})
        eng.tick()
        worst = min(worst, min(eng.snapshot()["margins"]))
    assert eng.pipeline.stats.limit_rejects > 0
    assert worst >= -0.05     # within one plant step of the boundary


def test_event_queue_bounded():
    eng = engine()
    eng.queue_capacity = 64
    eng.handle_message({"type": "mode", "value": "teleop"})
    for k in range(1000):
        eng.handle_leader_event({"seq": k, "t": eng.t,
                                 "dp": [0.001, 0, 0], "dr": [0, 0, 0]})
    assert len(eng.events) <= 64
    assert eng.stats.queue_dropped == 1000 - 64
    eng.tick()
    assert len(eng.events) == 0


def test_determinism_same_script_same_state():
    def run():
        eng = engine()
        eng.handle_message({"type": "mode", "value": "teleop"})
        for k in range(200):
            eng.handle_message({"type": "leader_delta", "seq": k, "t": eng.t,
                                "dp": [0.01, -0.02, 0.03],
                                "dr": [0.001, 0, -0.002]})
            eng.tick()
        return eng.snapshot()
    a, b = run(), run()
    a.pop("t"), b.pop("t")
    assert a == b


def test_websocket_protocol():
    cfg = config_from_dict({"leader_rate_hz": 200, "follower_rate_hz": 2000,
                            "scale": {"max_v": 500.0, "max_w": 50.0},
                            "haptics_enabled": False})
    app = create_app(cfg, stream_hz=30.0)
    with TestClient(app) as client:
        assert client.get("/healthz").json() == {"ok": True}
        with client.websocket_connect("/ws") as ws:
            msg = ws.receive_json()
            while msg["type"] != "state":
                msg = ws.receive_json()
            assert set(msg) == {"type", "version", "t", "leader", "follower",
                                "joints", "margins", "wrench", "flags"}
            ws.send_json({"type": "mode", "value": "teleop"})
            seen_ok = False
            for _ in range(50):
                r = ws.receive_json()
                if r["type"] == "ok":
                    seen_ok = True
                    break
            assert seen_ok
            ws.send_json({"type": "leader_delta", "seq": 5, "t": 1e9,
                          "dp": [0, 0, 0], "dr": [0, 0, 0]})
            acked = False
            for _ in range(80):
                r = ws.receive_json()
                if r["type"] == "ack":
                    assert r["seq"] == 5
                    acked = True
                    break
            assert acked
            ws.send_json({"type": "bogus"})
            for _ in range(80):
                r = ws.receive_json()
                if r["type"] == "error":
                    assert r["error"] == "MalformedEvent"
                    break
            else:
                pytest.fail("no error frame for malformed message")
