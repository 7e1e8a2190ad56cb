// Client-side state store.  The UI never mutates authoritative state:
// every displayed pose comes from a complete server snapshot, versions
// are enforced monotone, and the plot history is a bounded ring buffer.
export class RingBuffer {
    constructor(capacity) {
        this.capacity = capacity;
        this.buf = [];
    }
    push(v) {
        this.buf.push(v);
        if (this.buf.length > this.capacity)
            this.buf.shift();
    }
    values() {
        return this.buf;
    }
    get length() {
        return this.buf.length;
    }
    last() {
        return this.buf[this.buf.length - 1];
    }
}
export class ViewModel {
    constructor(capacity = 600) {
        this.latest = null;
        this.versionRejects = 0;
        this.connection = "connecting";
        this.lastError = "";
        this.series = {
            t: new RingBuffer(capacity),
            speed: new RingBuffer(capacity),
            force: new RingBuffer(capacity),
            minMargin: new RingBuffer(capacity),
        };
    }
    accept(state) {
        if (this.latest !== null && state.version <= this.latest.version) {
            this.versionRejects += 1;
            return false;
        }
        if (this.latest !== null && state.t > this.latest.t) {
            const dt = state.t - this.latest.t;
            const dx = Math.hypot(state.follower[0] - this.latest.follower[0], state.follower[1] - this.latest.follower[1], state.follower[2] - this.latest.follower[2]);
            this.series.speed.push(dx / dt);
        }
        else {
            this.series.speed.push(0);
        }
        this.series.t.push(state.t);
        this.series.force.push(Math.hypot(state.wrench[0], state.wrench[1], state.wrench[2]));
        this.series.minMargin.push(Math.min(...state.margins));
        this.latest = state;
        return true;
    }
}
