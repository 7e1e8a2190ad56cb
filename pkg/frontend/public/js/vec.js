// Minimal 3-vector / quaternion helpers (scalar-first quaternions).
export function add(a, b) {
    return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}
export function scale(a, s) {
    return [a[0] * s, a[1] * s, a[2] * s];
}
export function norm(a) {
    return Math.hypot(a[0], a[1], a[2]);
}
// rotate v by unit quaternion q
export function rotate(q, v) {
    const [w, x, y, z] = q;
    const u = [x, y, z];
    const uv = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    const uuv = [
        u[1] * uv[2] - u[2] * uv[1],
        u[2] * uv[0] - u[0] * uv[2],
        u[0] * uv[1] - u[1] * uv[0],
    ];
    return [
        v[0] + 2 * (w * uv[0] + uuv[0]),
        v[1] + 2 * (w * uv[1] + uuv[1]),
        v[2] + 2 * (w * uv[2] + uuv[2]),
    ];
}
