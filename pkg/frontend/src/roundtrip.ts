/**
 * Headless round-trip check: spawn the Python service, drive the
 * emulator against it for 30 seconds at 20 fps over a real WebSocket,
 * and verify the contract the console relies on.
 *
 * Asserts:
 *   - every emitted frame passes the service's schema (zero rejections)
 *   - a held gesture produces a debounce transition to `executing`
 *   - the robot trace moves off home within 3 frame periods of the
 *     command event
 *   - replaying the recorded event log through the pure reducer matches
 *     the live dashboard state
 *
 * Run with `node --experimental-websocket dist-node/roundtrip.js`
 * (node 20 ships the WebSocket client behind that flag).
 */

import { spawn, ChildProcess } from "node:child_process";
import { once } from "node:events";
import path from "node:path";
import process from "node:process";

import { applyEvent, initialDashboard, replayLog } from "./dashboard.js";
import { initialEmulator, movePointer, pointerToFrame, setGrab } from "./emulator.js";
import { frameProblems, WireEvent } from "./protocol.js";
import { ConsoleSocket } from "./socket.js";

const FPS = 20;
const SECONDS = 30;
const TOTAL_FRAMES = FPS * SECONDS;
const SESSION = "roundtrip";

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, Math.max(0, ms)));
}

function fail(message: string): never {
  console.error(`round trip FAILED: ${message}`);
  process.exit(1);
}

async function waitForHealth(url: string, timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(url);
      if (res.ok) {
        return;
      }
    } catch {
      // server not up yet
    }
    await sleep(200);
  }
  throw new Error(`service did not become healthy within ${timeoutMs} ms`);
}

/** Scripted operator: hold, stir, grab-and-drag, hold again. */
function pointerAt(i: number): { p: [number, number]; grab: boolean } {
  if (i < 150) {
    return { p: [0.52, 0.56], grab: false };
  }
  if (i < 350) {
    const phase = ((i - 150) / 200) * 2 * Math.PI;
    return {
      p: [0.52 + 0.08 * Math.cos(phase), 0.56 + 0.08 * Math.sin(phase)],
      grab: false,
    };
  }
  if (i < 450) {
    const s = (i - 350) / 100;
    return { p: [0.52 + 0.1 * s, 0.56 - 0.1 * s], grab: true };
  }
  return { p: [0.5, 0.5], grab: false };
}

async function main(): Promise<void> {
  if (typeof WebSocket === "undefined") {
    fail("no WebSocket client; run node with --experimental-websocket");
  }
  const port = 8900 + Math.floor(Math.random() * 500);
  const repoRoot = path.resolve(path.dirname(new URL(import.meta.url).pathname), "..", "..");
  const serverLog: string[] = [];
  const child: ChildProcess = spawn(
    "python3",
    [path.join(repoRoot, "scripts", "serve_demo.py"), "--port", String(port)],
    { cwd: repoRoot, stdio: ["ignore", "pipe", "pipe"] },
  );
  child.stdout?.on("data", (d) => serverLog.push(String(d)));
  child.stderr?.on("data", (d) => serverLog.push(String(d)));
  const cleanup = () => {
    if (child.exitCode === null) {
      child.kill("SIGTERM");
    }
  };
  process.on("exit", cleanup);

  try {
    await waitForHealth(`http://127.0.0.1:${port}/healthz`, 20000);

    const events: WireEvent[] = [];
    const rejections: string[] = [];
    let live = initialDashboard();
    const socket = new ConsoleSocket(`ws://127.0.0.1:${port}/ws`, {
      factory: (url) => new WebSocket(url) as never,
      session: SESSION,
      subscribe: true,
      reconnect: false,
    });
    let ackWindow = 0;
    const ready = new Promise<void>((resolve) => {
      socket.onAck = (ack) => {
        ackWindow = ack.config.window_size;
        resolve();
      };
    });
    socket.onEvent = (event) => {
      events.push(event);
      live = applyEvent(live, event);
    };
    socket.onServerError = (code, text) => {
      rejections.push(`${code}: ${text}`);
    };
    socket.connect();
    await Promise.race([
      ready,
      sleep(10000).then(() => {
        throw new Error("handshake timed out");
      }),
    ]);
    console.log(`connected; service window ${ackWindow} frames`);

    let emulator = initialEmulator();
    const start = Date.now();
    for (let i = 0; i < TOTAL_FRAMES; i += 1) {
      const { p, grab } = pointerAt(i);
      emulator = setGrab(movePointer(emulator, p), grab);
      const frame = pointerToFrame(emulator, i, (i + 1) / FPS, SESSION);
      const problems = frameProblems(frame);
      if (problems.length > 0) {
        fail(`emulator produced an invalid frame at ${i}: ${problems[0]}`);
      }
      socket.ingest(frame);
      await sleep(start + ((i + 1) * 1000) / FPS - Date.now());
    }
    await sleep(1000); // drain tail events
    socket.close();

    const elapsed = (Date.now() - start) / 1000;
    console.log(
      `sent ${TOTAL_FRAMES} frames in ${elapsed.toFixed(1)} s; ` +
        `received ${events.length} events`,
    );

    if (rejections.length > 0) {
      fail(`${rejections.length} rejection(s); first: ${rejections[0]}`);
    }
    const command = events.find((e) => e.kind === "robot_command");
    if (command === undefined) {
      fail("no robot command was issued by the held gesture");
    }
    const transition = events.find(
      (e) => e.kind === "fsm_transition" && e.payload["mode"] === "executing",
    );
    if (transition === undefined || transition.i > command.i) {
      fail("no debounce transition to executing at the command frame");
    }
    const states = events.filter((e) => e.kind === "robot_state");
    if (states.length === 0) {
      fail("no robot state events received");
    }
    const home = JSON.stringify(states[0].payload["endpoint"]);
    const moved = states.find(
      (e) => e.i > command.i && JSON.stringify(e.payload["endpoint"]) !== home,
    );
    if (moved === undefined) {
      fail("robot endpoint never left home after the command");
    }
    if (moved.i > command.i + 3) {
      fail(
        `robot trace moved at frame ${moved.i}, more than 3 periods after ` +
          `the command at frame ${command.i}`,
      );
    }
    const replayed = replayLog(events);
    if (JSON.stringify(replayed) !== JSON.stringify(live)) {
      fail("replaying the event log diverged from the live dashboard state");
    }
    console.log(
      `command '${command.payload["action"]}' at frame ${command.i}; ` +
        `executing badge at frame ${transition.i}; ` +
        `trace moved at frame ${moved.i} (${moved.i - command.i} period(s) later); ` +
        `0 rejections; reducer replay matches live state`,
    );
    console.log("round trip OK");
  } catch (err) {
    console.error(serverLog.join("").slice(-2000));
    fail(String(err));
  } finally {
    cleanup();
    if (child.exitCode === null) {
      await Promise.race([once(child, "exit"), sleep(3000)]);
    }
  }
}

main();
