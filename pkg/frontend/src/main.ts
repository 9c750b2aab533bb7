/**
 * Browser entry point: wires the pointer stage, the emission loop, the
 * live dashboard, and the connection banner together.
 */

import { drawProbBars, drawTrace } from "./charts.js";
import {
  applyEvent,
  DashboardState,
  initialDashboard,
} from "./dashboard.js";
import {
  EmulatorState,
  initialEmulator,
  movePointer,
  pointerToFrame,
  setGrab,
} from "./emulator.js";
import {
  ACTION_NAMES,
  frameProblems,
  FrameMessage,
  Point,
  ServiceInfo,
} from "./protocol.js";
import { ConsoleSocket } from "./socket.js";

const SESSION = "console";
const STALE_AFTER_MS = 1000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const stage = el<HTMLCanvasElement>("stage");
const probCanvas = el<HTMLCanvasElement>("probs");
const traceCanvas = el<HTMLCanvasElement>("trace");
const banner = el<HTMLDivElement>("banner");
const statusBadge = el<HTMLSpanElement>("status");
const fsmBadge = el<HTMLDivElement>("fsm");
const commandsList = el<HTMLUListElement>("commands");
const metricsBox = el<HTMLDivElement>("metrics");
const infoBox = el<HTMLDivElement>("info");

let emulator: EmulatorState = initialEmulator();
let dashboard: DashboardState = initialDashboard();
let service: ServiceInfo = { window_size: 40, fps: 20, k_consecutive: 5 };
let frameIndex = 0;
let lastFrame: FrameMessage | null = null;
let lastEventWall = 0;
let emitTimer: ReturnType<typeof setInterval> | null = null;
let renderQueued = false;

const wsProto = location.protocol === "https:" ? "wss:" : "ws:";
const socket = new ConsoleSocket(`${wsProto}//${location.host}/ws`, {
  factory: (url) => new WebSocket(url) as unknown as never,
  session: SESSION,
  subscribe: true,
  reconnect: true,
});

function queueRender(): void {
  if (renderQueued) {
    return;
  }
  renderQueued = true;
  requestAnimationFrame(() => {
    renderQueued = false;
    render();
  });
}

function showBanner(text: string, sticky = false): void {
  banner.textContent = text;
  banner.classList.add("visible");
  if (!sticky) {
    setTimeout(() => banner.classList.remove("visible"), 2500);
  }
}

socket.onStatus = (text) => {
  statusBadge.textContent = text;
  statusBadge.classList.toggle("ok", text === "connected");
  if (text.startsWith("discarded")) {
    showBanner(`link stalled: ${text}`, false);
  }
  queueRender();
};

socket.onAck = (ack) => {
  service = ack.config;
  const info = ack.model_info as Record<string, unknown>;
  infoBox.textContent =
    `window ${service.window_size} frames at ${service.fps} fps, ` +
    `debounce K=${service.k_consecutive}, ` +
    `model ${String(info["hidden_dim"] ?? "?")}-unit GCN`;
  startEmitting();
};

socket.onEvent = (event) => {
  dashboard = applyEvent(dashboard, event);
  lastEventWall = Date.now();
  queueRender();
};

socket.onServerError = (code, text) => {
  dashboard = applyEvent(dashboard, {
    kind: "error",
    i: dashboard.lastFrameIndex,
    payload: { code, text },
  });
  showBanner(`server: ${code} ${text}`);
  queueRender();
};

function startEmitting(): void {
  if (emitTimer !== null) {
    return;
  }
  const periodMs = 1000 / service.fps;
  emitTimer = setInterval(() => {
    const t = (frameIndex + 1) / service.fps;
    const frame = pointerToFrame(emulator, frameIndex, t, SESSION);
    const problems = frameProblems(frame);
    if (problems.length > 0) {
      showBanner(`frame invalid: ${problems[0]}`);
      return;
    }
    frameIndex += 1;
    lastFrame = frame;
    socket.ingest(frame);
    queueRender();
  }, periodMs);
}

function stagePoint(ev: PointerEvent): Point {
  const rect = stage.getBoundingClientRect();
  return [
    (ev.clientX - rect.left) / rect.width,
    (ev.clientY - rect.top) / rect.height,
  ];
}

stage.addEventListener("pointermove", (ev) => {
  emulator = movePointer(emulator, stagePoint(ev));
});
stage.addEventListener("pointerdown", (ev) => {
  stage.setPointerCapture(ev.pointerId);
  emulator = setGrab(movePointer(emulator, stagePoint(ev)), true);
});
stage.addEventListener("pointerup", () => {
  emulator = setGrab(emulator, false);
});

const BONES: [number, number][] = [
  [11, 12],
  [12, 14],
  [14, 16],
  [16, 18],
  [16, 20],
  [16, 22],
];

function drawStage(): void {
  const ctx = stage.getContext("2d");
  if (ctx === null || lastFrame === null) {
    return;
  }
  const { width, height } = stage;
  ctx.clearRect(0, 0, width, height);
  const at = (p: Point): Point => [p[0] * width, p[1] * height];

  ctx.strokeStyle = "#9ab";
  ctx.lineWidth = 2;
  for (const [a, b] of BONES) {
    const pa = lastFrame.lm[String(a)];
    const pb = lastFrame.lm[String(b)];
    if (!pa || !pb) {
      continue;
    }
    ctx.beginPath();
    ctx.moveTo(...at(pa));
    ctx.lineTo(...at(pb));
    ctx.stroke();
  }
  for (const [lid, p] of Object.entries(lastFrame.lm)) {
    const [x, y] = at(p);
    ctx.fillStyle = lid === "20" ? "#e15759" : "#4e79a7";
    ctx.beginPath();
    ctx.arc(x, y, lid === "20" ? 6 : 4, 0, Math.PI * 2);
    ctx.fill();
  }
  if (lastFrame.obj !== null) {
    const [x, y] = at(lastFrame.obj);
    ctx.fillStyle = emulator.grabbing ? "#f28e2b" : "#b07aa1";
    ctx.fillRect(x - 7, y - 7, 14, 14);
  }
}

function renderFsm(): void {
  const { fsm } = dashboard;
  const k = service.k_consecutive;
  const runWidth = Math.min(1, fsm.count / k) * 100;
  fsmBadge.innerHTML =
    `<span class="mode ${fsm.mode}">${fsm.mode}</span>` +
    (fsm.executing !== null ? `<span class="chip">executing ${fsm.executing}</span>` : "") +
    (fsm.pending !== null ? `<span class="chip pending">pending ${fsm.pending}</span>` : "") +
    `<div class="runbar"><div class="fill" style="width:${runWidth}%"></div></div>` +
    `<span class="runlabel">${fsm.candidate ?? "-"} run ${fsm.count}/${k}</span>`;
}

function renderCommands(): void {
  const last = dashboard.commands.slice(-8).reverse();
  commandsList.innerHTML = last
    .map((c) => `<li><b>${c.action}</b> at frame ${c.i} (t=${c.t.toFixed(2)}s)</li>`)
    .join("");
}

function renderMetrics(): void {
  const m = dashboard.metrics;
  if (m === null) {
    metricsBox.textContent = "no metrics yet";
    return;
  }
  const fill = m["fill_delay_seconds"];
  const rate = m["update_rate_hz"];
  const delays = m["command_delays_seconds"];
  const meanDelay =
    Array.isArray(delays) && delays.length > 0
      ? (delays as number[]).reduce((a, b) => a + b, 0) / delays.length
      : null;
  metricsBox.innerHTML =
    `<div>fill delay: ${typeof fill === "number" ? fill.toFixed(2) + " s" : "n/a"}</div>` +
    `<div>update rate: ${typeof rate === "number" ? rate.toFixed(1) + " Hz" : "n/a"}</div>` +
    `<div>recognitions: ${String(m["recognitions"] ?? 0)}</div>` +
    `<div>dropped frames: ${String(m["dropped_frames"] ?? 0)}</div>` +
    `<div>command delay: ${meanDelay !== null ? meanDelay.toFixed(2) + " s" : "n/a"}</div>`;
}

function render(): void {
  drawStage();
  drawProbBars(probCanvas, dashboard.probs, ACTION_NAMES, dashboard.lastAction);
  drawTrace(traceCanvas, dashboard.trace);
  renderFsm();
  renderCommands();
  renderMetrics();
  const stale = Date.now() - lastEventWall > STALE_AFTER_MS;
  document.body.classList.toggle("stale", lastEventWall !== 0 && stale);
  if (dashboard.lastError !== null) {
    el<HTMLDivElement>("errors").textContent =
      `${dashboard.errors} error(s), last: ${dashboard.lastError}`;
  }
}

setInterval(queueRender, 500); // keeps the stale indicator honest
socket.connect();
render();
