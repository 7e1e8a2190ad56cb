// WebSocket wrapper: parse/validate frames, estimate the server's session
// clock for event timestamps, auto-reconnect with backoff.
import { parseServerMsg } from "./protocol.js";
export class CockpitClient {
    constructor(url) {
        this.url = url;
        this.ws = null;
        this.lastStateT = 0;
        this.lastStateWallMs = 0;
        this.backoffMs = 250;
        this.onState = () => { };
        this.onMessage = () => { };
        this.onStatus = () => { };
    }
    connect() {
        this.onStatus("connecting");
        const ws = new WebSocket(this.url);
        this.ws = ws;
        ws.onopen = () => {
            this.backoffMs = 250;
            this.onStatus("open");
        };
        ws.onmessage = (ev) => {
            const msg = parseServerMsg(String(ev.data));
            if (msg === null)
                return;
            if (msg.type === "state") {
                this.lastStateT = msg.t;
                this.lastStateWallMs = performance.now();
                this.onState(msg);
            }
            else {
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
    engineTime() {
        if (this.lastStateWallMs === 0)
            return 0;
        return this.lastStateT + (performance.now() - this.lastStateWallMs) / 1000;
    }
    send(msg) {
        if (this.ws === null || this.ws.readyState !== WebSocket.OPEN)
            return false;
        this.ws.send(JSON.stringify(msg));
        return true;
    }
}
