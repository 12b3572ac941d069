// Canvas drawing for the console scene. Everything here is a pure
// function of (state, view, now) over a minimal 2D-context interface, so
// tests drive it with a recording stub instead of a browser canvas.

import type { ConsoleState } from "./state.js";
import type { PoseRecord } from "./types.js";
import { screenToWorld, worldToScreen, type ViewState } from "./view.js";

export interface Canvas2D {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  globalAlpha: number;
  font: string;
  save(): void;
  restore(): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  stroke(): void;
  fill(): void;
  ellipse(
    x: number,
    y: number,
    rx: number,
    ry: number,
    rotation: number,
    a0: number,
    a1: number,
  ): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
}

export interface Scene {
  state: ConsoleState;
  view: ViewState;
  width: number;
  height: number;
  now: number; // wall clock, same timebase as the reducer's action walls
}

const BG = "#10141a";
const GRID = "#1d242e";
const PATH = "#3fa7ff";
const ROBOT = "#ffd166";
const LOST = "#8892a0";
const GOAL_COLOR: Record<string, string> = {
  PENDING: "#ffb020",
  CONFIRMED: "#31c46c",
  REJECTED: "#ff4d4d",
};
const CHIP_COLOR: Record<string, string> = {
  LIVE: "#2e7d32",
  STALE: "#b58900",
  DISCONNECTED: "#b3261e",
};
export const ALERT_BANNER_MS = 3000;

const TWO_PI = Math.PI * 2;

function rgba(color: [number, number, number], alpha: number): string {
  const c = color.map((v) => Math.round(Math.min(1, Math.max(0, v)) * 255));
  return `rgba(${c[0]},${c[1]},${c[2]},${alpha})`;
}

// Grid pitch in meters chosen so lines sit at least ~48 px apart.
const PITCHES = [0.1, 0.2, 0.5, 1, 2, 5, 10, 20, 50, 100, 200, 500];

export function gridPitch(zoom: number): number {
  for (const p of PITCHES) {
    if (p * zoom >= 48) return p;
  }
  return PITCHES[PITCHES.length - 1];
}

function drawGrid(ctx: Canvas2D, scene: Scene): void {
  const { view, width, height } = scene;
  const pitch = gridPitch(view.zoom);
  const tl = screenToWorld(view, width, height, 0, 0);
  const br = screenToWorld(view, width, height, width, height);
  ctx.strokeStyle = GRID;
  ctx.lineWidth = 1;
  for (let x = Math.ceil(tl.x / pitch) * pitch; x <= br.x; x += pitch) {
    const s = worldToScreen(view, width, height, x, 0);
    ctx.beginPath();
    ctx.moveTo(s.x, 0);
    ctx.lineTo(s.x, height);
    ctx.stroke();
  }
  for (let y = Math.ceil(br.y / pitch) * pitch; y <= tl.y; y += pitch) {
    const s = worldToScreen(view, width, height, 0, y);
    ctx.beginPath();
    ctx.moveTo(0, s.y);
    ctx.lineTo(width, s.y);
    ctx.stroke();
  }
}

// Top-down footprint of each splat's 1-sigma ellipsoid. The map payload
// carries scales but no orientation, so the ellipse is axis-aligned with
// semi-axes (scale_x, scale_y).
function drawSplats(ctx: Canvas2D, scene: Scene): void {
  const { state, view, width, height } = scene;
  if (state.map === null) return;
  for (const splat of state.map.splats) {
    const c = worldToScreen(view, width, height, splat.mean[0], splat.mean[1]);
    const rx = Math.abs(splat.scale[0]) * view.zoom;
    const ry = Math.abs(splat.scale[1]) * view.zoom;
    ctx.beginPath();
    ctx.ellipse(c.x, c.y, rx, ry, 0, 0, TWO_PI);
    ctx.fillStyle = rgba(splat.color, 0.33);
    ctx.fill();
    ctx.strokeStyle = rgba(splat.color, 0.7);
    ctx.lineWidth = 1;
    ctx.stroke();
  }
}

function drawPath(ctx: Canvas2D, scene: Scene): void {
  const { state, view, width, height } = scene;
  if (state.path === null) return;
  const pts = state.path.waypoints.map((w) => worldToScreen(view, width, height, w[0], w[1]));
  ctx.strokeStyle = PATH;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(pts[0].x, pts[0].y);
  for (let i = 1; i < pts.length; i += 1) ctx.lineTo(pts[i].x, pts[i].y);
  ctx.stroke();
  ctx.fillStyle = PATH;
  for (const p of pts) {
    ctx.beginPath();
    ctx.arc(p.x, p.y, 3, 0, TWO_PI);
    ctx.fill();
  }
}

function drawGoal(ctx: Canvas2D, scene: Scene): void {
  const { state, view, width, height } = scene;
  if (state.goal === null) return;
  const color = GOAL_COLOR[state.goal.status];
  const s = worldToScreen(view, width, height, state.goal.target[0], state.goal.target[1]);
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(s.x, s.y, 8, 0, TWO_PI);
  ctx.stroke();
  ctx.beginPath();
  ctx.moveTo(s.x - 12, s.y);
  ctx.lineTo(s.x + 12, s.y);
  ctx.moveTo(s.x, s.y - 12);
  ctx.lineTo(s.x, s.y + 12);
  ctx.stroke();
  if (state.goal.status === "REJECTED" && state.goal.reason !== null) {
    ctx.fillStyle = color;
    ctx.font = "12px system-ui, sans-serif";
    ctx.fillText(state.goal.reason, s.x + 14, s.y - 10);
  }
}

function drawTrail(ctx: Canvas2D, scene: Scene): void {
  const { state, view, width, height } = scene;
  for (const p of state.trail) {
    const s = worldToScreen(view, width, height, p.x, p.y);
    ctx.fillStyle = p.mode === "GHOSTED" ? "rgba(255,209,102,0.15)" : "rgba(255,209,102,0.35)";
    ctx.beginPath();
    ctx.arc(s.x, s.y, 2, 0, TWO_PI);
    ctx.fill();
  }
}

// Heading comes from the pose rotation's dominant axis (first column),
// projected to the ground plane.
export function headingOf(record: PoseRecord): { dx: number; dy: number } {
  const dx = record.rotation[0];
  const dy = record.rotation[3];
  const norm = Math.hypot(dx, dy);
  if (norm < 1e-9) return { dx: 1, dy: 0 }; // dominant axis near vertical
  return { dx: dx / norm, dy: dy / norm };
}

function drawRobot(ctx: Canvas2D, scene: Scene): void {
  const { state, view, width, height } = scene;
  const pose = state.pose;
  if (pose === null) return;

  const { dx, dy } = headingOf(pose);
  const px = pose.translation[0];
  const py = pose.translation[1];
  const len = Math.max(pose.extents[0] * 2, 0.25);
  const half = Math.max(pose.extents[1] * 1.4, 0.12);
  const apex = worldToScreen(view, width, height, px + dx * len, py + dy * len);
  const baseL = worldToScreen(
    view,
    width,
    height,
    px - dx * len * 0.5 - dy * half,
    py - dy * len * 0.5 + dx * half,
  );
  const baseR = worldToScreen(
    view,
    width,
    height,
    px - dx * len * 0.5 + dy * half,
    py - dy * len * 0.5 - dx * half,
  );

  ctx.save();
  if (pose.mode === "GHOSTED") ctx.globalAlpha = 0.45;
  ctx.fillStyle = pose.mode === "LOST" ? LOST : ROBOT;
  ctx.beginPath();
  ctx.moveTo(apex.x, apex.y);
  ctx.lineTo(baseL.x, baseL.y);
  ctx.lineTo(baseR.x, baseR.y);
  ctx.closePath();
  ctx.fill();
  ctx.restore();

  const flash = state.kidnapFlashUntil;
  if (flash !== null && scene.now < flash) {
    const remaining = flash - scene.now;
    const frac = 1 - remaining / 700;
    const center = worldToScreen(view, width, height, px, py);
    ctx.save();
    ctx.globalAlpha = Math.max(0.1, remaining / 700);
    ctx.strokeStyle = "#ff4d4d";
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.arc(center.x, center.y, 18 + 42 * frac, 0, TWO_PI);
    ctx.stroke();
    ctx.restore();
  }
}

function banner(ctx: Canvas2D, y: number, text: string, bg: string): number {
  ctx.fillStyle = bg;
  ctx.fillRect(8, y, text.length * 7.2 + 18, 24);
  ctx.fillStyle = "#ffffff";
  ctx.font = "13px system-ui, sans-serif";
  ctx.fillText(text, 17, y + 16);
  return y + 30;
}

function drawBanners(ctx: Canvas2D, scene: Scene): number {
  const { state } = scene;
  let y = 8;
  if (state.schemaError !== null) y = banner(ctx, y, `bad payload: ${state.schemaError}`, "#b3261e");
  if (state.mapError !== null) y = banner(ctx, y, `map unavailable: ${state.mapError}`, "#b3261e");
  if (state.map !== null && state.map.count === 0) y = banner(ctx, y, "no map", "#4a5260");
  const latest = state.alerts[0];
  if (latest !== undefined && scene.now - latest.wall < ALERT_BANNER_MS) {
    const a = latest.alert;
    const where = a.nearest_splat === null ? "" : ` (splat ${a.nearest_splat})`;
    const text = `${a.alert_level}: min clearance m=${a.min_mahalanobis.toFixed(2)}${where}`;
    y = banner(ctx, y, text, a.alert_level === "CRITICAL" ? "#b3261e" : "#8a6d00");
  }
  return y;
}

function drawConnectionChip(ctx: Canvas2D, scene: Scene): void {
  const label = scene.view.connection;
  const w = label.length * 7.2 + 18;
  ctx.fillStyle = CHIP_COLOR[label];
  ctx.fillRect(scene.width - w - 8, 8, w, 22);
  ctx.fillStyle = "#ffffff";
  ctx.font = "12px system-ui, sans-serif";
  ctx.fillText(label, scene.width - w + 1, 23);
}

function drawTooltip(ctx: Canvas2D, scene: Scene): void {
  const { state } = scene;
  if (state.tooltipText === null || state.tooltipUntil === null) return;
  if (scene.now >= state.tooltipUntil) return;
  ctx.fillStyle = "#2a313c";
  ctx.fillRect(state.tooltipX + 10, state.tooltipY - 28, state.tooltipText.length * 7.2 + 14, 20);
  ctx.fillStyle = "#e8ecf1";
  ctx.font = "12px system-ui, sans-serif";
  ctx.fillText(state.tooltipText, state.tooltipX + 17, state.tooltipY - 14);
}

export function renderScene(ctx: Canvas2D, scene: Scene): void {
  ctx.globalAlpha = 1;
  ctx.fillStyle = BG;
  ctx.fillRect(0, 0, scene.width, scene.height);
  drawGrid(ctx, scene);
  drawSplats(ctx, scene);
  drawPath(ctx, scene);
  drawGoal(ctx, scene);
  drawTrail(ctx, scene);
  drawRobot(ctx, scene);
  drawBanners(ctx, scene);
  drawConnectionChip(ctx, scene);
  drawTooltip(ctx, scene);
}
