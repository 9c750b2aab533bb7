/**
 * Pointer-driven landmark emulator.
 *
 * The console has no camera, so the operator's pointer stands in for the
 * right fingertip (landmark 20) and the remaining upper-body points hang
 * off it at fixed kinematic offsets. The manipulated object tracks the
 * pointer while grabbed and otherwise stays where it was last released.
 * Every emitted frame satisfies the stream schema by construction.
 */
import { ANCHOR_LANDMARK, POSE_LANDMARK_IDS, PROTOCOL_VERSION, } from "./protocol.js";
export const POINTER_LANDMARK = 20;
// Rest-pose geometry relative to the right fingertip. Shoulders sit up
// and to the left, elbow/wrist/pinky trail the fingertip closely.
export const LANDMARK_OFFSETS = {
    11: [-0.275, -0.41],
    12: [-0.035, -0.41],
    14: [0.045, -0.23],
    16: [0.005, -0.09],
    18: [0.015, -0.01],
    22: [-0.02, -0.03],
};
export function initialEmulator() {
    return { pointer: [0.655, 0.71], grabbing: false, object: [0.64, 0.8] };
}
function clamp01(v) {
    return Math.min(1, Math.max(0, v));
}
function clampPoint(p) {
    return [clamp01(p[0]), clamp01(p[1])];
}
/** Move the pointer; while grabbing, the object rides along. */
export function movePointer(state, pointer) {
    const clamped = clampPoint(pointer);
    return {
        pointer: clamped,
        grabbing: state.grabbing,
        object: state.grabbing ? clamped : state.object,
    };
}
export function setGrab(state, grabbing) {
    return {
        pointer: state.pointer,
        grabbing,
        object: grabbing ? state.pointer : state.object,
    };
}
/**
 * Render the current pose as one schema-valid stream frame.
 * Offsets are clamped to the unit square so edge poses stay in range.
 */
export function pointerToFrame(state, frameIndex, timestamp, session) {
    const lm = {};
    for (const lid of POSE_LANDMARK_IDS) {
        if (lid === POINTER_LANDMARK) {
            lm[String(lid)] = clampPoint(state.pointer);
            continue;
        }
        const [dx, dy] = LANDMARK_OFFSETS[lid];
        lm[String(lid)] = clampPoint([state.pointer[0] + dx, state.pointer[1] + dy]);
    }
    return {
        i: frameIndex,
        t: timestamp,
        lm,
        obj: clampPoint(state.grabbing ? state.pointer : state.object),
        session,
        v: PROTOCOL_VERSION,
    };
}
/** Anchor position (left shoulder) for drawing the stick figure. */
export function anchorOf(frame) {
    return frame.lm[String(ANCHOR_LANDMARK)];
}
