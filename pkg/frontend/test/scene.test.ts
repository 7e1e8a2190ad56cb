import { describe, expect, it } from "vitest";
import { StateMsg } from "../src/protocol.js";
import { Camera, DEFAULT_GEOMETRY, legSegments, project, ringPoints,
         wrenchArrowTip } from "../src/scene.js";
import { norm, rotate } from "../src/vec.js";

const cam: Camera = { azimuthDeg: 0, elevationDeg: 0, scale: 1, cx: 100, cy: 100, czWorld: 0 };

function homeState(): StateMsg {
  return {
    type: "state", version: 1, t: 0,
    leader: [0, 0, 0, 1, 0, 0, 0],
    follower: [0, 0, 284, 1, 0, 0, 0],
    joints: [76.7, 76.7, 76.7, 294.7, 294.7, 294.7],
    margins: [80, 59, 9, 80, 59, 9, 80, 59, 9],
    wrench: [0, 0, 0, 0, 0, 0],
    flags: {},
  };
}

describe("project", () => {
  it("maps +z up and +x right at the neutral camera", () => {
    const [x0, y0] = project([0, 0, 0], cam);
    const [x1, y1] = project([10, 0, 0], cam);
    const [x2, y2] = project([0, 0, 10], cam);
    expect(x1 - x0).toBeCloseTo(10);
    expect(y1 - y0).toBeCloseTo(0);
    expect(y2 - y0).toBeCloseTo(-10);   // canvas y grows down
    expect(x2 - x0).toBeCloseTo(0);
  });
});

describe("ringPoints", () => {
  it("places points on the ring radius", () => {
    for (const p of ringPoints(180, 16)) {
      expect(norm(p)).toBeCloseTo(180, 9);
      expect(p[2]).toBe(0);
    }
  });

  it("rigidly follows the pose", () => {
    const pts = ringPoints(120, 8, [5, -3, 284, 1, 0, 0, 0]);
    for (const p of pts) {
      expect(p[2]).toBeCloseTo(284, 9);
      expect(Math.hypot(p[0] - 5, p[1] + 3)).toBeCloseTo(120, 9);
    }
  });
});

describe("legSegments", () => {
  it("is threefold symmetric at home and unhighlighted", () => {
    const segs = legSegments(homeState(), DEFAULT_GEOMETRY);
    expect(segs).toHaveLength(3);
    const lengths = segs.map((s) => Math.hypot(
      s.to[0] - s.from[0], s.to[1] - s.from[1], s.to[2] - s.from[2]));
    expect(Math.max(...lengths) - Math.min(...lengths)).toBeLessThan(1e-9);
    expect(lengths[0]).toBeCloseTo(294.72, 1);
    expect(segs.every((s) => !s.violated)).toBe(true);
  });

  it("highlights the arm whose margin went negative", () => {
    const s = homeState();
    s.margins = [80, -1, 9, 80, 59, 9, 80, 59, 9];
    const segs = legSegments(s, DEFAULT_GEOMETRY);
    expect(segs[0].violated).toBe(true);
    expect(segs[1].violated).toBe(false);
  });
});

describe("wrenchArrowTip", () => {
  it("anchors the cap to the full arrow length", () => {
    const tip = wrenchArrowTip([0, 0, 0], [15, 0, 0, 0, 0, 0], 15, 120);
    expect(tip[0]).toBeCloseTo(120, 9);
    const over = wrenchArrowTip([0, 0, 0], [150, 0, 0, 0, 0, 0], 15, 120);
    expect(over[0]).toBeCloseTo(120, 9);   // clipped at the anchor
    const half = wrenchArrowTip([0, 0, 0], [0, 7.5, 0, 0, 0, 0], 15, 120);
    expect(half[1]).toBeCloseTo(60, 9);
    const zero = wrenchArrowTip([1, 2, 3], [0, 0, 0], 15, 120);
    expect(zero).toEqual([1, 2, 3]);
  });
});

describe("vec.rotate", () => {
  it("rotates by a quaternion (90 deg about z)", () => {
    const q: [number, number, number, number] =
      [Math.SQRT1_2, 0, 0, Math.SQRT1_2];
    const v = rotate(q, [1, 0, 0]);
    expect(v[0]).toBeCloseTo(0, 12);
    expect(v[1]).toBeCloseTo(1, 12);
  });
});
