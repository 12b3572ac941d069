// Browser entry: binds the console to the DOM, pointer pan/zoom/click,
// and the prompt/command inputs. All rendering state lives inside
// OperatorConsole; this file only forwards events.

import { OperatorConsole } from "./console.js";
import { commandEchoLines } from "./format.js";
import type { Canvas2D } from "./render.js";
import type { WebSocketLike } from "./ws.js";

// The browser WebSocket's handlers carry event objects and a this-binding
// the console never uses; this adapter forwards them into the argument-free
// shape the console expects.
function adaptSocket(url: string): WebSocketLike {
  const sock = new WebSocket(url);
  const like: WebSocketLike = {
    onopen: null,
    onmessage: null,
    onclose: null,
    onerror: null,
    close: () => sock.close(),
  };
  sock.onopen = () => like.onopen?.();
  sock.onmessage = (ev) => like.onmessage?.({ data: ev.data });
  sock.onclose = () => like.onclose?.();
  sock.onerror = (ev) => like.onerror?.(ev);
  return like;
}

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const statusLine = document.getElementById("status") as HTMLElement;
const goalLine = document.getElementById("goal-line") as HTMLElement;
const commandEcho = document.getElementById("command-echo") as HTMLElement;
const promptInput = document.getElementById("prompt") as HTMLInputElement;
const promptButton = document.getElementById("prompt-send") as HTMLButtonElement;
const commandInput = document.getElementById("command") as HTMLInputElement;

const base = window.location.origin;
const wsUrl = base.replace(/^http/, "ws") + "/ws";

// The drawing interface is the structural subset of the real 2D context
// the renderer uses; the cast narrows the style unions to strings.
const ctx = canvas.getContext("2d") as unknown as Canvas2D;

const operator = new OperatorConsole({
  base,
  wsUrl,
  ctx,
  width: canvas.width,
  height: canvas.height,
  fetchImpl: (url, init) => fetch(url, init),
  makeSocket: adaptSocket,
  schedule: (cb) => requestAnimationFrame(() => cb()),
  delay: (cb, ms) => void setTimeout(cb, ms),
  now: () => performance.now(),
  afterRender: (state, view) => {
    const pose = state.pose;
    const poseText =
      pose === null
        ? "no pose yet"
        : `${pose.mode} t=${pose.t.toFixed(1)}s conf=${pose.mean_conf.toFixed(2)} ` +
          `(${pose.translation[0].toFixed(2)}, ${pose.translation[1].toFixed(2)}, ` +
          `${pose.translation[2].toFixed(2)})`;
    statusLine.textContent = `${view.connection} | ${poseText}`;
    if (state.goal === null) {
      goalLine.textContent = "no goal";
    } else {
      const [x, y, z] = state.goal.target;
      const reason = state.goal.reason !== null ? ` (${state.goal.reason})` : "";
      const cost = state.path !== null ? ` cost ${state.path.cost_m.toFixed(2)} m` : "";
      goalLine.textContent =
        `goal (${x.toFixed(2)}, ${y.toFixed(2)}, ${z.toFixed(2)}) ` +
        `${state.goal.status}${reason}${cost}`;
    }
    if (state.command !== null) {
      commandEcho.textContent = commandEchoLines(
        state.command.text,
        state.command.error,
        state.command.position,
      ).join("\n");
    }
  },
});

let dragging = false;
let moved = false;
let lastX = 0;
let lastY = 0;

canvas.addEventListener("pointerdown", (ev) => {
  dragging = true;
  moved = false;
  lastX = ev.offsetX;
  lastY = ev.offsetY;
  canvas.setPointerCapture(ev.pointerId);
});

canvas.addEventListener("pointermove", (ev) => {
  if (!dragging) return;
  const dx = ev.offsetX - lastX;
  const dy = ev.offsetY - lastY;
  if (Math.abs(dx) + Math.abs(dy) > 0) {
    if (Math.hypot(ev.offsetX - lastX, ev.offsetY - lastY) > 3) moved = true;
    operator.panBy(dx, dy);
    lastX = ev.offsetX;
    lastY = ev.offsetY;
  }
});

canvas.addEventListener("pointerup", (ev) => {
  dragging = false;
  if (!moved) void operator.click(ev.offsetX, ev.offsetY);
});

canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  operator.zoomAt(ev.offsetX, ev.offsetY, Math.exp(-ev.deltaY * 0.0015));
});

promptButton.addEventListener("click", () => {
  const text = promptInput.value.trim();
  if (text.length > 0) void operator.submitPrompt(text);
});

commandInput.addEventListener("keydown", (ev) => {
  if (ev.key !== "Enter") return;
  const text = commandInput.value;
  if (text.trim().length > 0) {
    void operator.submitCommand(text);
    commandInput.select();
  }
});

setInterval(() => {
  operator.tick();
  void operator.refreshPath();
}, 1000);

void operator.start();
