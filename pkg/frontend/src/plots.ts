// Strip-chart painters for the cockpit's time-series panels.

import { RingBuffer } from "./viewmodel.js";

export interface StripStyle {
  color: string;
  yMin: number;
  yMax: number;
  refLine?: number;    // dashed horizontal marker (e.g. a cap)
}

export function polylinePoints(values: readonly number[], w: number, h: number,
                               yMin: number, yMax: number, capacity: number): [number, number][] {
  const pts: [number, number][] = [];
  const n = values.length;
  for (let i = 0; i < n; i++) {
    const x = (w * (capacity - n + i)) / Math.max(capacity - 1, 1);
    const frac = (values[i] - yMin) / (yMax - yMin || 1);
    const y = h - Math.min(Math.max(frac, 0), 1) * h;
    pts.push([x, y]);
  }
  return pts;
}

export function drawStrip(ctx: CanvasRenderingContext2D, buf: RingBuffer,
                          style: StripStyle, label: string): void {
  const { width: w, height: h } = ctx.canvas;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#37474f";
  ctx.strokeRect(0.5, 0.5, w - 1, h - 1);
  if (style.refLine !== undefined) {
    const frac = (style.refLine - style.yMin) / (style.yMax - style.yMin || 1);
    const y = h - Math.min(Math.max(frac, 0), 1) * h;
    ctx.setLineDash([4, 4]);
    ctx.strokeStyle = "#78909c";
    ctx.beginPath();
    ctx.moveTo(0, y);
    ctx.lineTo(w, y);
    ctx.stroke();
    ctx.setLineDash([]);
  }
  const pts = polylinePoints(buf.values(), w, h, style.yMin, style.yMax, buf.capacity);
  if (pts.length > 1) {
    ctx.strokeStyle = style.color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(pts[0][0], pts[0][1]);
    for (const p of pts.slice(1)) ctx.lineTo(p[0], p[1]);
    ctx.stroke();
  }
  ctx.fillStyle = "#b0bec5";
  ctx.font = "11px system-ui";
  const last = buf.last();
  ctx.fillText(`${label}${last === undefined ? "" : ": " + last.toFixed(2)}`, 6, 13);
}
