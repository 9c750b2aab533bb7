/**
 * Connection manager for the console protocol.
 *
 * Works over any WebSocket-shaped transport (browser native, node's
 * global WebSocket) supplied as a factory, which keeps this module free
 * of DOM types and lets tests drive it with a scripted fake. Frames
 * ingested while the link is down are buffered for up to one second and
 * then discarded with a warning, so a brief reconnect does not kill the
 * stream but stale pose data is never delivered late.
 */
import { helloMessage, ingestMessage, parseServerMessage, subscribeMessage, } from "./protocol.js";
const BACKOFF_START_MS = 250;
const BACKOFF_MAX_MS = 4000;
export class ConsoleSocket {
    constructor(url, opts) {
        this.onAck = null;
        this.onEvent = null;
        this.onServerError = null;
        this.onStatus = null;
        this.socket = null;
        this.ready = false;
        this.closed = false;
        this.backoffMs = BACKOFF_START_MS;
        this.retryTimer = null;
        this.buffer = [];
        this.discardedTotal = 0;
        this.url = url;
        this.opts = opts;
        this.now = opts.now ?? (() => Date.now());
    }
    get isReady() {
        return this.ready;
    }
    get discarded() {
        return this.discardedTotal;
    }
    get bufferedCount() {
        return this.buffer.length;
    }
    connect() {
        if (this.closed) {
            return;
        }
        const socket = this.opts.factory(this.url);
        this.socket = socket;
        socket.onopen = () => {
            socket.send(JSON.stringify(helloMessage()));
        };
        socket.onmessage = (ev) => {
            this.handleMessage(String(ev.data));
        };
        socket.onerror = () => {
            // close follows; reconnect is handled there
        };
        socket.onclose = () => {
            const wasReady = this.ready;
            this.ready = false;
            this.socket = null;
            if (this.closed) {
                return;
            }
            if (wasReady) {
                this.status("connection lost");
            }
            if (this.opts.reconnect !== false) {
                this.scheduleReconnect();
            }
        };
    }
    /** Send one frame now, or hold it briefly while the link is down. */
    ingest(frame) {
        if (this.ready && this.socket !== null) {
            this.socket.send(JSON.stringify(ingestMessage(frame)));
            return true;
        }
        this.buffer.push({ frame, at: this.now() });
        this.pruneBuffer();
        return false;
    }
    close() {
        this.closed = true;
        if (this.retryTimer !== null) {
            clearTimeout(this.retryTimer);
            this.retryTimer = null;
        }
        this.ready = false;
        if (this.socket !== null) {
            this.socket.close();
            this.socket = null;
        }
    }
    handleMessage(raw) {
        let msg;
        try {
            msg = parseServerMessage(raw);
        }
        catch (err) {
            this.status(`unreadable server message: ${String(err)}`);
            return;
        }
        if (msg.kind === "hello_ack") {
            this.ready = true;
            this.backoffMs = BACKOFF_START_MS;
            if (this.opts.subscribe) {
                this.socket?.send(JSON.stringify(subscribeMessage(this.opts.session)));
            }
            this.flushBuffer();
            this.status("connected");
            this.onAck?.(msg);
            return;
        }
        if (msg.kind === "event") {
            this.onEvent?.(msg.event);
            return;
        }
        this.onServerError?.(msg.code, msg.text);
    }
    pruneBuffer() {
        const windowMs = this.opts.bufferWindowMs ?? 1000;
        const cutoff = this.now() - windowMs;
        let dropped = 0;
        while (this.buffer.length > 0 && this.buffer[0].at < cutoff) {
            this.buffer.shift();
            dropped += 1;
        }
        if (dropped > 0) {
            this.discardedTotal += dropped;
            this.status(`discarded ${dropped} stale buffered frame(s)`);
        }
    }
    flushBuffer() {
        this.pruneBuffer();
        const pending = this.buffer;
        this.buffer = [];
        for (const item of pending) {
            this.socket?.send(JSON.stringify(ingestMessage(item.frame)));
        }
        if (pending.length > 0) {
            this.status(`flushed ${pending.length} buffered frame(s)`);
        }
    }
    scheduleReconnect() {
        if (this.retryTimer !== null) {
            return;
        }
        const delay = this.backoffMs;
        this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
        this.status(`reconnecting in ${delay} ms`);
        this.retryTimer = setTimeout(() => {
            this.retryTimer = null;
            this.connect();
        }, delay);
    }
    status(text) {
        this.onStatus?.(text);
    }
}
