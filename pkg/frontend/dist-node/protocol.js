/**
 * Wire protocol shared by the browser console and the round-trip driver.
 *
 * Mirrors the Python service: one WebSocket endpoint, client messages
 * `hello` / `ingest` / `subscribe`, server messages `hello_ack` /
 * `event` / `error`. Frames use the JSONL stream schema with the
 * session name and protocol version carried as extra top-level fields.
 */
export const PROTOCOL_VERSION = 1;
export const POSE_LANDMARK_IDS = [11, 12, 14, 16, 18, 20, 22];
export const ANCHOR_LANDMARK = 11;
// estimated points may stray slightly off-frame
export const COORD_SLACK_MIN = -0.25;
export const COORD_SLACK_MAX = 1.25;
export const ACTION_NAMES = ["cut", "stab", "flip", "push"];
export function helloMessage() {
    return { kind: "hello", v: PROTOCOL_VERSION };
}
export function ingestMessage(frame) {
    return { kind: "ingest", frame };
}
export function subscribeMessage(session) {
    return { kind: "subscribe", session };
}
function isPoint(value) {
    return (Array.isArray(value) &&
        value.length === 2 &&
        value.every((v) => typeof v === "number" && Number.isFinite(v)));
}
function pointInRange(p) {
    return p.every((v) => v >= COORD_SLACK_MIN && v <= COORD_SLACK_MAX);
}
/**
 * Check a frame against the stream schema the service enforces.
 * Returns a list of problems; an empty list means the frame is valid.
 */
export function frameProblems(frame) {
    const problems = [];
    if (!Number.isInteger(frame.i) || frame.i < 0) {
        problems.push(`i must be a non-negative integer, got ${frame.i}`);
    }
    if (typeof frame.t !== "number" || !Number.isFinite(frame.t)) {
        problems.push(`t must be a finite number, got ${frame.t}`);
    }
    const known = new Set(POSE_LANDMARK_IDS.map(String));
    for (const [key, value] of Object.entries(frame.lm)) {
        if (!known.has(key)) {
            problems.push(`unknown landmark id ${key}`);
            continue;
        }
        if (!isPoint(value)) {
            problems.push(`landmark ${key}: expected [x, y], got ${JSON.stringify(value)}`);
        }
        else if (!pointInRange(value)) {
            problems.push(`landmark ${key}: coordinate out of range`);
        }
    }
    if (frame.obj !== null) {
        if (!isPoint(frame.obj)) {
            problems.push(`object: expected [x, y] or null`);
        }
        else if (!pointInRange(frame.obj)) {
            problems.push(`object: coordinate out of range`);
        }
    }
    if (frame.v !== PROTOCOL_VERSION) {
        problems.push(`v must be ${PROTOCOL_VERSION}, got ${frame.v}`);
    }
    return problems;
}
/** Parse one raw server payload; throws on shapes the protocol forbids. */
export function parseServerMessage(raw) {
    const obj = JSON.parse(raw);
    if (typeof obj !== "object" || obj === null) {
        throw new Error("server message must be an object");
    }
    const kind = obj["kind"];
    if (kind === "hello_ack") {
        const config = obj["config"];
        if (!config || typeof config.window_size !== "number") {
            throw new Error("hello_ack missing config");
        }
        return obj;
    }
    if (kind === "event") {
        const event = obj["event"];
        if (!event || typeof event.kind !== "string" || typeof event.i !== "number") {
            throw new Error("event frame missing event body");
        }
        return obj;
    }
    if (kind === "error") {
        if (typeof obj["code"] !== "string") {
            throw new Error("error frame missing code");
        }
        return obj;
    }
    throw new Error(`unknown server message kind ${String(kind)}`);
}
