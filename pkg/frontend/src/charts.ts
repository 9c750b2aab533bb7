/**
 * Canvas drawing for the dashboard: class probability bars and the
 * robot endpoint trace. No chart library; both plots are small and
 * redraw fully on every update.
 */

import { TracePoint } from "./dashboard.js";

const BAR_COLORS = ["#4e79a7", "#e15759", "#76b7b2", "#f28e2b"];
const AXIS_COLOR = "#888";
const TRACE_COLORS: Record<string, string> = {
  x: "#4e79a7",
  y: "#e15759",
  z: "#59a14f",
};

export function drawProbBars(
  canvas: HTMLCanvasElement,
  probs: number[],
  labels: readonly string[],
  highlight: string | null,
): void {
  const ctx = canvas.getContext("2d");
  if (ctx === null) {
    return;
  }
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const n = probs.length;
  const slot = height / n;
  const barLeft = 52;
  const barMax = width - barLeft - 44;
  ctx.font = "12px sans-serif";
  ctx.textBaseline = "middle";
  for (let k = 0; k < n; k += 1) {
    const y = k * slot + slot / 2;
    const w = Math.max(0, Math.min(1, probs[k])) * barMax;
    ctx.fillStyle = labels[k] === highlight ? "#222" : "#666";
    ctx.textAlign = "right";
    ctx.fillText(labels[k], barLeft - 6, y);
    ctx.fillStyle = BAR_COLORS[k % BAR_COLORS.length];
    ctx.fillRect(barLeft, y - slot * 0.3, w, slot * 0.6);
    ctx.fillStyle = "#444";
    ctx.textAlign = "left";
    ctx.fillText(probs[k].toFixed(3), barLeft + w + 4, y);
  }
}

export function drawTrace(canvas: HTMLCanvasElement, trace: TracePoint[]): void {
  const ctx = canvas.getContext("2d");
  if (ctx === null) {
    return;
  }
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  if (trace.length < 2) {
    ctx.fillStyle = AXIS_COLOR;
    ctx.font = "12px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText("waiting for robot state", width / 2, height / 2);
    return;
  }
  const margin = { left: 36, right: 8, top: 8, bottom: 18 };
  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;
  const t0 = trace[0].t;
  const t1 = trace[trace.length - 1].t;
  const tSpan = Math.max(t1 - t0, 1e-9);
  let lo = Infinity;
  let hi = -Infinity;
  for (const p of trace) {
    for (const v of p.endpoint) {
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  const pad = Math.max((hi - lo) * 0.1, 0.02);
  lo -= pad;
  hi += pad;

  const xOf = (t: number) => margin.left + ((t - t0) / tSpan) * plotW;
  const yOf = (v: number) => margin.top + (1 - (v - lo) / (hi - lo)) * plotH;

  ctx.strokeStyle = AXIS_COLOR;
  ctx.lineWidth = 1;
  ctx.strokeRect(margin.left, margin.top, plotW, plotH);
  ctx.fillStyle = AXIS_COLOR;
  ctx.font = "10px sans-serif";
  ctx.textAlign = "right";
  ctx.fillText(hi.toFixed(2), margin.left - 3, margin.top + 8);
  ctx.fillText(lo.toFixed(2), margin.left - 3, margin.top + plotH - 2);
  ctx.textAlign = "center";
  ctx.fillText(`${t0.toFixed(1)}s`, margin.left, height - 4);
  ctx.fillText(`${t1.toFixed(1)}s`, margin.left + plotW, height - 4);

  const axes: (keyof typeof TRACE_COLORS)[] = ["x", "y", "z"];
  axes.forEach((axis, idx) => {
    ctx.strokeStyle = TRACE_COLORS[axis];
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    trace.forEach((p, j) => {
      const x = xOf(p.t);
      const y = yOf(p.endpoint[idx]);
      if (j === 0) {
        ctx.moveTo(x, y);
      } else {
        ctx.lineTo(x, y);
      }
    });
    ctx.stroke();
    ctx.fillStyle = TRACE_COLORS[axis];
    ctx.textAlign = "left";
    ctx.fillText(axis, margin.left + 6 + idx * 16, margin.top + 10);
  });
}
