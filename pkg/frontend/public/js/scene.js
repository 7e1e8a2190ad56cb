// Wireframe scene: fixed ring, moving ring at the follower pose, one leg
// line per arm, the force arrow (full length at the 15 N cap) and red
// highlights on violated margins.  Rendered with a fixed orthographic
// projection on a 2D canvas; geometry constants mirror the server
// defaults (visual only).
import { add, rotate } from "./vec.js";
export const DEFAULT_GEOMETRY = {
    fixedRadius: 180,
    movingRadius: 120,
    anchorDeg: [0, 120, 240],
    movingAnchorDeg: [20, 140, 260],
};
export function project(p, cam) {
    const az = (cam.azimuthDeg * Math.PI) / 180;
    const el = (cam.elevationDeg * Math.PI) / 180;
    const x1 = p[0] * Math.cos(az) + p[1] * Math.sin(az);
    const y1 = -p[0] * Math.sin(az) + p[1] * Math.cos(az);
    const zc = p[2] - cam.czWorld;
    const u = x1;
    const v = zc * Math.cos(el) - y1 * Math.sin(el);
    return [cam.cx + u * cam.scale, cam.cy - v * cam.scale];
}
function posePoint(pose, body) {
    const q = [pose[3], pose[4], pose[5], pose[6]];
    return add([pose[0], pose[1], pose[2]], rotate(q, body));
}
export function ringPoints(radius, n, pose) {
    const pts = [];
    for (let k = 0; k < n; k++) {
        const a = (2 * Math.PI * k) / n;
        const body = [radius * Math.cos(a), radius * Math.sin(a), 0];
        pts.push(pose ? posePoint(pose, body) : body);
    }
    return pts;
}
export function legSegments(state, geom) {
    const segs = [];
    for (let i = 0; i < 3; i++) {
        const af = (geom.anchorDeg[i] * Math.PI) / 180;
        const am = (geom.movingAnchorDeg[i] * Math.PI) / 180;
        const from = [geom.fixedRadius * Math.cos(af), geom.fixedRadius * Math.sin(af), 0];
        const to = posePoint(state.follower, [
            geom.movingRadius * Math.cos(am), geom.movingRadius * Math.sin(am), 0
        ]);
        const margins = state.margins.slice(3 * i, 3 * i + 3);
        segs.push({ from, to, violated: Math.min(...margins) < 0 });
    }
    return segs;
}
// Arrow length in mm of world space: the cap maps to maxLenMm exactly,
// anything stronger is clipped (the saturation anchor of the display).
export function wrenchArrowTip(origin, F, cap, maxLenMm) {
    const n = Math.hypot(F[0], F[1], F[2]);
    if (n === 0)
        return origin;
    const len = Math.min(n / cap, 1) * maxLenMm;
    return [
        origin[0] + (F[0] / n) * len,
        origin[1] + (F[1] / n) * len,
        origin[2] + (F[2] / n) * len,
    ];
}
function poly(ctx, pts, close) {
    ctx.beginPath();
    ctx.moveTo(pts[0][0], pts[0][1]);
    for (const p of pts.slice(1))
        ctx.lineTo(p[0], p[1]);
    if (close)
        ctx.closePath();
    ctx.stroke();
}
export function drawScene(ctx, state, cam, geom) {
    ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
    ctx.strokeStyle = "#5a6b7a";
    ctx.lineWidth = 2;
    poly(ctx, ringPoints(geom.fixedRadius, 48).map((p) => project(p, cam)), true);
    ctx.strokeStyle = "#8fd0ff";
    poly(ctx, ringPoints(geom.movingRadius, 48, state.follower).map((p) => project(p, cam)), true);
    for (const seg of legSegments(state, geom)) {
        ctx.strokeStyle = seg.violated ? "#ff5252" : "#9fe0a0";
        ctx.lineWidth = seg.violated ? 4 : 2.5;
        poly(ctx, [project(seg.from, cam), project(seg.to, cam)], false);
    }
    const center = [state.follower[0], state.follower[1], state.follower[2]];
    const tip = wrenchArrowTip(center, state.wrench, 15, 120);
    const fNorm = Math.hypot(state.wrench[0], state.wrench[1], state.wrench[2]);
    if (fNorm > 1e-6) {
        ctx.strokeStyle = "#ffb347";
        ctx.lineWidth = 3;
        const a = project(center, cam);
        const b = project(tip, cam);
        poly(ctx, [a, b], false);
        ctx.beginPath();
        ctx.arc(b[0], b[1], 4, 0, 2 * Math.PI);
        ctx.fillStyle = "#ffb347";
        ctx.fill();
    }
    // leader ghost marker (desk-frame hand, drawn near the follower origin)
    const leader = [state.leader[0], state.leader[1], state.leader[2] + 284];
    const lp = project(leader, cam);
    ctx.strokeStyle = "#e0c3ff";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.arc(lp[0], lp[1], 6, 0, 2 * Math.PI);
    ctx.stroke();
}
