// Wire protocol shared with the session server (JSON text frames).
// pose7 is [x, y, z, qw, qx, qy, qz]; mm / deg / N / N*m / seconds.

export type Pose7 = [number, number, number, number, number, number, number];

export interface StateMsg {
  type: "state";
  version: number;
  t: number;
  leader: Pose7;
  follower: Pose7;
  joints: number[];
  margins: number[];
  wrench: number[];
  flags: Record<string, unknown>;
}

export interface AckMsg { type: "ack"; seq: number; stale?: boolean; }
export interface OkMsg { type: "ok"; [k: string]: unknown; }
export interface ErrorMsg { type: "error"; error: string; detail?: string; seq?: number; }
export interface EventMsg { type: "event"; event: string; [k: string]: unknown; }
export type ServerMsg = StateMsg | AckMsg | OkMsg | ErrorMsg | EventMsg;

export interface LeaderDelta {
  type: "leader_delta";
  seq: number;
  t: number;
  dp: [number, number, number];
  dr: [number, number, number];
}
export interface GuiMove { type: "gui_move"; dof: string; dx: number; dt: number; }
export interface SetScale { type: "set_scale"; max_v: number; max_w: number; }
export interface ModeMsg { type: "mode"; value: "teleop" | "idle"; }
export type ClientMsg = LeaderDelta | GuiMove | SetScale | ModeMsg;

function isNumArray(v: unknown, n: number): v is number[] {
  return Array.isArray(v) && v.length === n && v.every((x) => typeof x === "number" && Number.isFinite(x));
}

// A snapshot is rendered only if every field is complete and well-formed.
export function isCompleteState(m: unknown): m is StateMsg {
  if (typeof m !== "object" || m === null) return false;
  const s = m as Record<string, unknown>;
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

export function parseServerMsg(raw: string): ServerMsg | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const t = (doc as Record<string, unknown>).type;
  if (t === "state") return isCompleteState(doc) ? (doc as StateMsg) : null;
  if (t === "ack" || t === "ok" || t === "error" || t === "event") {
    return doc as ServerMsg;
  }
  return null;
}

// Mirror of the server's sine-eased timed move: hold, ease, hold.
export function timedMove(x0: number, dx: number, t0: number, dt: number, t: number): number {
  if (t < t0) return x0;
  if (t > t0 + dt) return x0 + dx;
  const arg = ((180 / dt) * (t - t0) - 90) * Math.PI / 180;
  return (dx / 2) * Math.sin(arg) + x0 + dx / 2;
}
