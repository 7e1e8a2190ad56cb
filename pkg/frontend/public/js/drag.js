// Pointer-drag to leader-motion mapping with client-side coalescing.
// The pointer is the desk-scale stand-in for the hand controller: px are
// mapped to mm/deg by configurable gains, accumulated between flushes and
// sent at most at the configured rate.
export const DEFAULT_DRAG = { mmPerPx: 0.1, degPerPx: 0.05, minSendMs: 16 };
export class DragAccumulator {
    constructor(cfg = DEFAULT_DRAG) {
        this.cfg = cfg;
        this.dp = [0, 0, 0];
        this.dr = [0, 0, 0];
        this.seq = 0;
        this.lastSendMs = -Infinity;
    }
    // screen x grows right -> world +x; screen y grows DOWN -> world -y / -z
    add(dxPx, dyPx, mode) {
        if (mode === "translate-xy") {
            this.dp[0] += dxPx * this.cfg.mmPerPx;
            this.dp[1] -= dyPx * this.cfg.mmPerPx;
        }
        else if (mode === "translate-z") {
            this.dp[2] -= dyPx * this.cfg.mmPerPx;
        }
        else {
            this.dr[2] += dxPx * this.cfg.degPerPx;
            this.dr[0] -= dyPx * this.cfg.degPerPx;
        }
    }
    pending() {
        return this.dp.some((v) => v !== 0) || this.dr.some((v) => v !== 0);
    }
    // Emit the coalesced delta if anything accumulated and the rate limit
    // allows; engineT stamps the message on the server's clock estimate.
    flush(nowMs, engineT) {
        if (!this.pending() || nowMs - this.lastSendMs < this.cfg.minSendMs) {
            return null;
        }
        const msg = {
            type: "leader_delta",
            seq: this.seq++,
            t: engineT,
            dp: [...this.dp],
            dr: [...this.dr],
        };
        this.dp = [0, 0, 0];
        this.dr = [0, 0, 0];
        this.lastSendMs = nowMs;
        return msg;
    }
}
