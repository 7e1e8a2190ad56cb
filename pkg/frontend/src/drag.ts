// Pointer-drag to leader-motion mapping with client-side coalescing.
// The pointer is the desk-scale stand-in for the hand controller: px are
// mapped to mm/deg by configurable gains, accumulated between flushes and
// sent at most at the configured rate.

import { LeaderDelta } from "./protocol.js";

export type DragMode = "translate-xy" | "translate-z" | "rotate";

export interface DragConfig {
  mmPerPx: number;    // translation gain
  degPerPx: number;   // rotation gain
  minSendMs: number;  // coalescing interval (<= 1 kHz)
}

export const DEFAULT_DRAG: DragConfig = { mmPerPx: 0.1, degPerPx: 0.05, minSendMs: 16 };

export class DragAccumulator {
  private dp: [number, number, number] = [0, 0, 0];
  private dr: [number, number, number] = [0, 0, 0];
  private seq = 0;
  private lastSendMs = -Infinity;

  constructor(readonly cfg: DragConfig = DEFAULT_DRAG) {}

  // screen x grows right -> world +x; screen y grows DOWN -> world -y / -z
  add(dxPx: number, dyPx: number, mode: DragMode): void {
    if (mode === "translate-xy") {
      this.dp[0] += dxPx * this.cfg.mmPerPx;
      this.dp[1] -= dyPx * this.cfg.mmPerPx;
    } else if (mode === "translate-z") {
      this.dp[2] -= dyPx * this.cfg.mmPerPx;
    } else {
      this.dr[2] += dxPx * this.cfg.degPerPx;
      this.dr[0] -= dyPx * this.cfg.degPerPx;
    }
  }

  pending(): boolean {
    return this.dp.some((v) => v !== 0) || this.dr.some((v) => v !== 0);
  }

  // Emit the coalesced delta if anything accumulated and the rate limit
  // allows; engineT stamps the message on the server's clock estimate.
  flush(nowMs: number, engineT: number): LeaderDelta | null {
    if (!this.pending() || nowMs - this.lastSendMs < this.cfg.minSendMs) {
      return null;
    }
    const msg: LeaderDelta = {
      type: "leader_delta",
      seq: this.seq++,
      t: engineT,
      dp: [...this.dp] as [number, number, number],
      dr: [...this.dr] as [number, number, number],
    };
    this.dp = [0, 0, 0];
    this.dr = [0, 0, 0];
    this.lastSendMs = nowMs;
    return msg;
  }
}
