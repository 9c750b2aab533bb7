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

import {
  FrameMessage,
  helloMessage,
  HelloAck,
  ingestMessage,
  parseServerMessage,
  subscribeMessage,
  WireEvent,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ConsoleSocketOptions {
  factory: SocketFactory;
  session: string;
  subscribe?: boolean;
  reconnect?: boolean;
  bufferWindowMs?: number;
  now?: () => number;
}

const BACKOFF_START_MS = 250;
const BACKOFF_MAX_MS = 4000;

interface BufferedFrame {
  frame: FrameMessage;
  at: number;
}

export class ConsoleSocket {
  onAck: ((ack: HelloAck) => void) | null = null;
  onEvent: ((event: WireEvent) => void) | null = null;
  onServerError: ((code: string, text: string) => void) | null = null;
  onStatus: ((status: string) => void) | null = null;

  private readonly url: string;
  private readonly opts: ConsoleSocketOptions;
  private readonly now: () => number;
  private socket: SocketLike | null = null;
  private ready = false;
  private closed = false;
  private backoffMs = BACKOFF_START_MS;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private buffer: BufferedFrame[] = [];
  private discardedTotal = 0;

  constructor(url: string, opts: ConsoleSocketOptions) {
    this.url = url;
    this.opts = opts;
    this.now = opts.now ?? (() => Date.now());
  }

  get isReady(): boolean {
    return this.ready;
  }

  get discarded(): number {
    return this.discardedTotal;
  }

  get bufferedCount(): number {
    return this.buffer.length;
  }

  connect(): void {
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
  ingest(frame: FrameMessage): boolean {
    if (this.ready && this.socket !== null) {
      this.socket.send(JSON.stringify(ingestMessage(frame)));
      return true;
    }
    this.buffer.push({ frame, at: this.now() });
    this.pruneBuffer();
    return false;
  }

  close(): void {
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

  private handleMessage(raw: string): void {
    let msg;
    try {
      msg = parseServerMessage(raw);
    } catch (err) {
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

  private pruneBuffer(): void {
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

  private flushBuffer(): void {
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

  private scheduleReconnect(): void {
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

  private status(text: string): void {
    this.onStatus?.(text);
  }
}
