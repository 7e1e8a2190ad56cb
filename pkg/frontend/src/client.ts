// WebSocket wrapper: parse/validate frames, estimate the server's session
// clock for event timestamps, auto-reconnect with backoff.

import { ClientMsg, ServerMsg, StateMsg, parseServerMsg } from "./protocol.js";

export class CockpitClient {
  private ws: WebSocket | null = null;
  private lastStateT = 0;
  private lastStateWallMs = 0;
  private backoffMs = 250;
  onState: (s: StateMsg) => void = () => {};
  onMessage: (m: ServerMsg) => void = () => {};
  onStatus: (s: "connecting" | "open" | "closed") => void = () => {};

  constructor(readonly url: string) {}

  connect(): void {
    this.onStatus("connecting");
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.backoffMs = 250;
      this.onStatus("open");
    };
    ws.onmessage = (ev: MessageEvent) => {
      const msg = parseServerMsg(String(ev.data));
      if (msg === null) return;
      if (msg.type === "state") {
        this.lastStateT = msg.t;
        this.lastStateWallMs = performance.now();
        this.onState(msg);
      } else {
        this.onMessage(msg);
      }
    };
    ws.onclose = () => {
      this.onStatus("closed");
      this.ws = null;
      setTimeout(() => this.connect(), this.backoffMs);
      this.backoffMs = Math.min(this.backoffMs * 2, 5000);
    };
    ws.onerror = () => ws.close();
  }

  // server session-clock estimate, for leader_delta staleness stamps
  engineTime(): number {
    if (this.lastStateWallMs === 0) return 0;
    return this.lastStateT + (performance.now() - this.lastStateWallMs) / 1000;
  }

  send(msg: ClientMsg): boolean {
    if (this.ws === null || this.ws.readyState !== WebSocket.OPEN) return false;
    this.ws.send(JSON.stringify(msg));
    return true;
  }
}
