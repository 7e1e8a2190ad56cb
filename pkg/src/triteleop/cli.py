"""Operator entry points.

Subcommands: simulate, replay, ik, fk, bench-haptic, serve.  Every
subcommand accepts --config, --seed and --output-dir; all outputs land
under the output directory.  Exit codes: 0 success, 1 configured error
limit exceeded, 2 configuration problem, 3 runtime failure, 4 kinematics
unreachable / no convergence.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_LIMITS = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_KINEMATICS = 4


def _load_cfg(args):
    from .config import ConfigError, RunConfig, apply_overrides, load_config
    if args.config:
        path = Path(args.config)
        if not path.exists():
            bundled = resources.files("triteleop").joinpath(
                "data", args.config if args.config.endswith(".json")
                else args.config + ".json")
            if bundled.is_file():
                path = bundled
        cfg = load_config(path)
    else:
        cfg = RunConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        overrides[key] = value
    return apply_overrides(cfg, overrides) if overrides else cfg


def _out_dir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    from .config import ConfigError
    from .simulate import run_closed_loop
    try:
        cfg = _load_cfg(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(args)
    t0 = time.perf_counter()
    try:
        result = run_closed_loop(cfg, output_dir=out)
    except Exception as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    r = result.report
    print(f"run complete in {time.perf_counter() - t0:.1f}s: "
          f"max translational deviation {r.max_norm_mm:.4f} mm, "
          f"max rotational deviation {r.max_angle_deg:.4f} deg, "
          f"delay {r.delay_s * 1e3:.1f} ms")
    print(f"report: {result.files.get('report')}")
    lim = cfg.limits
    failed = []
    if lim.max_translation_err_mm is not None \
            and r.max_norm_mm > lim.max_translation_err_mm:
        failed.append(f"translation {r.max_norm_mm:.4f} > "
                      f"{lim.max_translation_err_mm} mm")
    if lim.max_rotation_err_deg is not None \
            and r.max_angle_deg > lim.max_rotation_err_deg:
        failed.append(f"rotation {r.max_angle_deg:.4f} > "
                      f"{lim.max_rotation_err_deg} deg")
    if failed:
        print("limit exceeded: " + "; ".join(failed), file=sys.stderr)
        return EXIT_LIMITS
    return EXIT_OK


def cmd_replay(args) -> int:
    from .config import ConfigError
    from .simulate import read_packets_jsonl, replay_packets
    try:
        cfg = _load_cfg(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    path = Path(args.packets)
    if not path.exists():
        print(f"config error: packet log not found: {path}", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(args)
    try:
        result = replay_packets(read_packets_jsonl(path), cfg, output_dir=out)
    except Exception as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    r = result.report
    print(f"replayed {len(result.packets)} packets: plant tracked the "
          f"commanded trajectory within {r.max_norm_mm:.4f} mm / "
          f"{r.max_angle_deg:.4f} deg")
    return EXIT_OK


def _parse_vec(text: str, n: int):
    vals = [float(v) for v in text.split(",")]
    if len(vals) != n:
        raise ValueError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def cmd_ik(args) -> int:
    from .config import ConfigError
    from .delta import BranchViolation, Unreachable, chain_residual, solve_delta_ik
    from .geometry import Pose6
    from .triarm import DegenerateLeg, triarm_ik, workspace_margin
    try:
        cfg = _load_cfg(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.leader_point:
            point = _parse_vec(args.leader_point, 3)
            sols = solve_delta_ik(point, cfg.leader_geometry)
            doc = {"chains": [{"th1": s.th1, "th2": s.th2, "th3": s.th3}
                              for s in sols]}
            if args.check:
                doc["residual_mm"] = max(
                    chain_residual(point, s, i, cfg.leader_geometry)
                    for i, s in enumerate(sols))
            print(json.dumps(doc))
            return EXIT_OK
        vals = _parse_vec(args.pose, 6)
        pose = Pose6.from_euler(vals[:3], vals[3:])
        q = triarm_ik(pose, cfg.follower_geometry)
        doc = {"theta_deg": q.th.tolist(), "d_mm": q.d.tolist()}
        margins = workspace_margin(pose, cfg.follower_geometry)
        doc["margins"] = margins.tolist()
        doc["admissible"] = bool(margins.min() >= 0.0)
        print(json.dumps(doc))
        if args.check and not doc["admissible"]:
            print(f"pose outside workspace: min margin {margins.min():.3f}",
                  file=sys.stderr)
            return EXIT_KINEMATICS
        return EXIT_OK
    except (Unreachable, BranchViolation, DegenerateLeg, ValueError) as e:
        print(f"kinematics error: {e}", file=sys.stderr)
        return EXIT_KINEMATICS


def cmd_fk(args) -> int:
    from .config import ConfigError
    from .geometry import Pose6
    from .triarm import JointVector, NoConvergence, triarm_fk, triarm_ik
    try:
        cfg = _load_cfg(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        vals = _parse_vec(args.joints, 6)
        q = JointVector(vals[:3], vals[3:])
        g = cfg.follower_geometry
        if args.guess:
            gv = _parse_vec(args.guess, 6)
            guess = Pose6.from_euler(gv[:3], gv[3:])
        else:
            guess = g.home_pose
        pose = triarm_fk(q, guess, g)
        doc = {"p_mm": pose.p.tolist(), "euler_deg": pose.euler.tolist(),
               "pose7": pose.as_vec7()}
        if args.check:
            q2 = triarm_ik(pose, g)
            doc["roundtrip_residual"] = float(
                np.abs(q2.as_vec6() - q.as_vec6()).max())
        print(json.dumps(doc))
        return EXIT_OK
    except (NoConvergence, ValueError) as e:
        print(f"kinematics error: {e}", file=sys.stderr)
        return EXIT_KINEMATICS


def cmd_bench_haptic(args) -> int:
    from .config import ConfigError
    from .geometry import Pose6, Twist
    from .haptics import HapticConfig, HapticRenderer
    import dataclasses
    try:
        cfg = _load_cfg(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(args)
    hcfg = dataclasses.replace(cfg.haptics, n_points=args.points)
    g = cfg.follower_geometry
    renderer = HapticRenderer(hcfg, g)
    home = g.home_pose
    # representative duty cycle: interior dwell, then a boundary crossing
    times = []
    vel = Twist(np.array([5.0, 0.0, 0.0]), np.array([0.2, 0.0, 0.0]))
    for k in range(args.ticks):
        phase = k / max(args.ticks, 1)
        dz = 70.0 * max(0.0, (phase - 0.5) * 2.0)   # second half pushes out
        pose = Pose6(home.p + np.array([0.0, 0.0, dz]), home.q)
        frame = renderer.tick(pose, vel)
        times.append(frame.compute_us)
    hist_path = out / "haptic-latency.csv"
    with open(hist_path, "w", encoding="utf-8", newline="") as f:
        f.write("tick,compute_us\n")
        for k, us in enumerate(times):
            f.write(f"{k},{us:.1f}\n")
    if times:
        arr = np.array(times)
        p50, p95, p99 = (np.percentile(arr, q) for q in (50, 95, 99))
        print(f"p50 {p50:.0f} us, p95 {p95:.0f} us, p99 {p99:.0f} us "
              f"({args.points}+{args.points} points, {len(arr)} ticks)")
    else:
        print("p50 - us, p95 - us, p99 - us (0 ticks)")
    print(f"histogram: {hist_path}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn
    from .config import ConfigError
    from .service import create_app
    try:
        cfg = _load_cfg(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    static = Path(args.static_dir) if args.static_dir else None
    if static is not None and not static.is_dir():
        print(f"config error: static dir not found: {static}", file=sys.stderr)
        return EXIT_CONFIG
    app = create_app(cfg, stream_hz=args.stream_hz, static_dir=static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def _add_common(p):
    p.add_argument("--config", help="run config JSON (path or bundled name)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--output-dir", default="out", help="directory for outputs")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="dotted config override, e.g. scale.max_v=10")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="triteleop",
        description="leader-follower teleoperation stack: simulation, "
                    "kinematics tools, haptic benchmark and live server")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the closed loop and report errors")
    _add_common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("replay", help="replay a packet log through the follower")
    _add_common(p)
    p.add_argument("--packets", required=True, help="packets.jsonl to replay")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("ik", help="inverse kinematics (follower pose or "
                                  "leader point)")
    _add_common(p)
    p.add_argument("--pose", help="follower pose x,y,z,alpha,beta,gamma")
    p.add_argument("--leader-point", help="leader stage point x,y,z")
    p.add_argument("--check", action="store_true",
                   help="verify residuals / workspace margins")
    p.set_defaults(fn=cmd_ik)

    p = sub.add_parser("fk", help="follower forward kinematics")
    _add_common(p)
    p.add_argument("--joints", required=True,
                   help="joint vector th1,th2,th3,d1,d2,d3")
    p.add_argument("--guess", help="initial pose guess x,y,z,alpha,beta,gamma")
    p.add_argument("--check", action="store_true", help="print the IK roundtrip")
    p.set_defaults(fn=cmd_fk)

    p = sub.add_parser("bench-haptic", help="haptic tick latency benchmark")
    _add_common(p)
    p.add_argument("--points", type=int, default=500,
                   help="probe points per cloud")
    p.add_argument("--ticks", type=int, default=2000, help="ticks to run")
    p.set_defaults(fn=cmd_bench_haptic)

    p = sub.add_parser("serve", help="run the live WebSocket session server")
    _add_common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--stream-hz", type=float, default=60.0)
    p.add_argument("--static-dir", help="serve a built cockpit from this dir")
    p.set_defaults(fn=cmd_serve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "ik" and not (args.pose or args.leader_point):
        print("config error: ik needs --pose or --leader-point", file=sys.stderr)
        return EXIT_CONFIG
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
