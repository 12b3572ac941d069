// World <-> screen view transform. World is meters, +x right, +y up;
// screen is canvas pixels, +y down. (panX, panY) is the world point under
// the canvas center and zoom is pixels per meter:
//
//   sx = width/2  + (wx - panX) * zoom
//   sy = height/2 - (wy - panY) * zoom

import type { Vec3 } from "./types.js";

export type Connection = "LIVE" | "STALE" | "DISCONNECTED";

export interface ViewState {
  panX: number;
  panY: number;
  zoom: number; // px per meter, > 0
  selectedGoal: Vec3 | null;
  connection: Connection;
}

export interface Pt {
  x: number;
  y: number;
}

export const MIN_ZOOM = 2;
export const MAX_ZOOM = 2000;
export const STALE_AFTER_MS = 1000;

export function createView(zoom = 60): ViewState {
  if (!(zoom > 0)) {
    throw new RangeError(`zoom must be positive, got ${zoom}`);
  }
  return { panX: 0, panY: 0, zoom, selectedGoal: null, connection: "DISCONNECTED" };
}

export function worldToScreen(
  view: ViewState,
  width: number,
  height: number,
  wx: number,
  wy: number,
): Pt {
  return {
    x: width / 2 + (wx - view.panX) * view.zoom,
    y: height / 2 - (wy - view.panY) * view.zoom,
  };
}

export function screenToWorld(
  view: ViewState,
  width: number,
  height: number,
  sx: number,
  sy: number,
): Pt {
  return {
    x: view.panX + (sx - width / 2) / view.zoom,
    y: view.panY - (sy - height / 2) / view.zoom,
  };
}

// Dragging the canvas by (dx, dy) px keeps the world glued to the cursor.
export function panByScreen(view: ViewState, dx: number, dy: number): ViewState {
  return { ...view, panX: view.panX - dx / view.zoom, panY: view.panY + dy / view.zoom };
}

// Zoom about a screen anchor: the world point under the anchor stays put.
export function zoomAtScreen(
  view: ViewState,
  width: number,
  height: number,
  sx: number,
  sy: number,
  factor: number,
): ViewState {
  const anchor = screenToWorld(view, width, height, sx, sy);
  const zoom = Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, view.zoom * factor));
  const zoomed = { ...view, zoom };
  const drifted = screenToWorld(zoomed, width, height, sx, sy);
  return {
    ...zoomed,
    panX: zoomed.panX + anchor.x - drifted.x,
    panY: zoomed.panY + anchor.y - drifted.y,
  };
}

export function connectionOf(
  socketOpen: boolean,
  lastPoseWall: number | null,
  now: number,
): Connection {
  if (!socketOpen) return "DISCONNECTED";
  if (lastPoseWall === null || now - lastPoseWall > STALE_AFTER_MS) return "STALE";
  return "LIVE";
}
