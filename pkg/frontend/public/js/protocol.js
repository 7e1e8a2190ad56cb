// Wire protocol shared with the session server (JSON text frames).
// pose7 is [x, y, z, qw, qx, qy, qz]; mm / deg / N / N*m / seconds.
function isNumArray(v, n) {
    return Array.isArray(v) && v.length === n && v.every((x) => typeof x === "number" && Number.isFinite(x));
}
// A snapshot is rendered only if every field is complete and well-formed.
export function isCompleteState(m) {
    if (typeof m !== "object" || m === null)
        return false;
    const s = m;
    return s.type === "state"
        && typeof s.version === "number"
        && typeof s.t === "number"
        && isNumArray(s.leader, 7)
        && isNumArray(s.follower, 7)
        && isNumArray(s.joints, 6)
        && isNumArray(s.margins, 9)
        && isNumArray(s.wrench, 6)
        && typeof s.flags === "object" && s.flags !== null;
}
export function parseServerMsg(raw) {
    let doc;
    try {
        doc = JSON.parse(raw);
    }
    catch {
        return null;
    }
    if (typeof doc !== "object" || doc === null)
        return null;
    const t = doc.type;
    if (t === "state")
        return isCompleteState(doc) ? doc : null;
    if (t === "ack" || t === "ok" || t === "error" || t === "event") {
        return doc;
    }
    return null;
}
// Mirror of the server's sine-eased timed move: hold, ease, hold.
export function timedMove(x0, dx, t0, dt, t) {
    if (t < t0)
        return x0;
    if (t > t0 + dt)
        return x0 + dx;
    const arg = ((180 / dt) * (t - t0) - 90) * Math.PI / 180;
    return (dx / 2) * Math.sin(arg) + x0 + dx / 2;
}
