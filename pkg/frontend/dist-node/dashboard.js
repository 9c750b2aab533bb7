/**
 * Dashboard state as a pure reducer over service events.
 *
 * `applyEvent` never mutates its input and touches no globals, so a
 * recorded event log replays to exactly the view the live session built.
 * Rendering (DOM, canvas) lives elsewhere.
 */
import { ACTION_NAMES } from "./protocol.js";
export const TRACE_CAPACITY = 900;
export function initialDashboard() {
    return {
        events: 0,
        lastFrameIndex: -1,
        probs: ACTION_NAMES.map(() => 0),
        lastAction: null,
        lastRecognitionT: null,
        fsm: { mode: "idle", executing: null, candidate: null, count: 0, pending: null },
        trace: [],
        commands: [],
        metrics: null,
        errors: 0,
        lastError: null,
    };
}
function asNumber(v, fallback) {
    return typeof v === "number" && Number.isFinite(v) ? v : fallback;
}
function asNullableString(v) {
    return typeof v === "string" ? v : null;
}
export function applyEvent(state, event) {
    const next = {
        ...state,
        events: state.events + 1,
        lastFrameIndex: Math.max(state.lastFrameIndex, event.i),
    };
    const p = event.payload ?? {};
    switch (event.kind) {
        case "recognition": {
            const probs = p["probs"];
            if (Array.isArray(probs) && probs.length === state.probs.length) {
                next.probs = probs.map((v) => asNumber(v, 0));
            }
            next.lastAction = asNullableString(p["action"]);
            next.lastRecognitionT = asNumber(p["t"], NaN);
            break;
        }
        case "fsm_transition": {
            next.fsm = {
                mode: asNullableString(p["mode"]) ?? state.fsm.mode,
                executing: asNullableString(p["executing"]),
                candidate: asNullableString(p["candidate"]),
                count: asNumber(p["count"], 0),
                pending: asNullableString(p["pending"]),
            };
            break;
        }
        case "robot_state": {
            const endpoint = p["endpoint"];
            if (Array.isArray(endpoint) && endpoint.length === 3) {
                const point = {
                    t: asNumber(p["t"], NaN),
                    endpoint: [
                        asNumber(endpoint[0], 0),
                        asNumber(endpoint[1], 0),
                        asNumber(endpoint[2], 0),
                    ],
                    action: asNullableString(p["action"]),
                    progress: asNumber(p["progress"], 0),
                };
                const trace = state.trace.concat([point]);
                next.trace =
                    trace.length > TRACE_CAPACITY ? trace.slice(trace.length - TRACE_CAPACITY) : trace;
            }
            break;
        }
        case "robot_command": {
            const action = asNullableString(p["action"]);
            if (action !== null) {
                next.commands = state.commands.concat([
                    { i: event.i, action, t: asNumber(p["t"], NaN) },
                ]);
            }
            break;
        }
        case "metrics": {
            next.metrics = { ...p };
            break;
        }
        case "error": {
            next.errors = state.errors + 1;
            const code = asNullableString(p["code"]) ?? "error";
            const text = asNullableString(p["text"]) ?? "";
            next.lastError = `${code}: ${text}`;
            break;
        }
        default:
            // forward-compatible: unknown event kinds only bump the counter
            break;
    }
    return next;
}
export function replayLog(events) {
    return events.reduce(applyEvent, initialDashboard());
}
