import { describe, expect, it } from "vitest";

import {
  connectionOf,
  createView,
  MAX_ZOOM,
  MIN_ZOOM,
  panByScreen,
  screenToWorld,
  STALE_AFTER_MS,
  worldToScreen,
  zoomAtScreen,
} from "../src/view.js";
import { rng } from "./helpers.js";

describe("view transform", () => {
  it("rejects a non-positive zoom", () => {
    expect(() => createView(0)).toThrow(RangeError);
    expect(() => createView(-5)).toThrow(RangeError);
  });

  it("maps the canvas center to the pan point", () => {
    const view = { ...createView(80), panX: 3.5, panY: -1.25 };
    const w = screenToWorld(view, 800, 600, 400, 300);
    expect(w.x).toBeCloseTo(3.5, 12);
    expect(w.y).toBeCloseTo(-1.25, 12);
  });

  it("inverts a 100 px offset at pan (5,0), zoom 50 to world (7,0)", () => {
    const view = { ...createView(50), panX: 5, panY: 0 };
    const w = screenToWorld(view, 800, 600, 400 + 100, 300);
    expect(w.x).toBeCloseTo(7, 12);
    expect(w.y).toBeCloseTo(0, 12);
  });

  it("flips the y axis: world +y is screen up", () => {
    const view = createView(100);
    const s = worldToScreen(view, 400, 400, 0, 1);
    expect(s.x).toBeCloseTo(200, 12);
    expect(s.y).toBeCloseTo(100, 12);
  });

  it("composes to identity within 0.5 px over random views", () => {
    const rand = rng(7);
    let worst = 0;
    for (let i = 0; i < 300; i += 1) {
      const view = {
        ...createView(Math.exp(Math.log(2) + rand() * Math.log(1000))),
        panX: (rand() - 0.5) * 100,
        panY: (rand() - 0.5) * 100,
      };
      const width = 200 + Math.floor(rand() * 1400);
      const height = 200 + Math.floor(rand() * 1000);
      const sx = rand() * width;
      const sy = rand() * height;
      const w = screenToWorld(view, width, height, sx, sy);
      const back = worldToScreen(view, width, height, w.x, w.y);
      worst = Math.max(worst, Math.abs(back.x - sx), Math.abs(back.y - sy));
    }
    expect(worst).toBeLessThan(0.5);
  });

  it("pans so the world stays glued to the cursor", () => {
    const view = { ...createView(40), panX: 1, panY: 2 };
    const before = screenToWorld(view, 600, 400, 250, 180);
    const panned = panByScreen(view, 30, -12);
    const after = screenToWorld(panned, 600, 400, 280, 168);
    expect(after.x).toBeCloseTo(before.x, 10);
    expect(after.y).toBeCloseTo(before.y, 10);
  });

  it("keeps the anchor world point fixed while zooming", () => {
    let view = { ...createView(60), panX: -3, panY: 4 };
    const anchor = screenToWorld(view, 800, 600, 620, 90);
    view = zoomAtScreen(view, 800, 600, 620, 90, 1.7);
    const after = screenToWorld(view, 800, 600, 620, 90);
    expect(after.x).toBeCloseTo(anchor.x, 9);
    expect(after.y).toBeCloseTo(anchor.y, 9);
    expect(view.zoom).toBeCloseTo(102, 9);
  });

  it("clamps zoom to its bounds", () => {
    const view = createView(10);
    expect(zoomAtScreen(view, 800, 600, 0, 0, 1e9).zoom).toBe(MAX_ZOOM);
    expect(zoomAtScreen(view, 800, 600, 0, 0, 1e-9).zoom).toBe(MIN_ZOOM);
  });
});

describe("connection state", () => {
  it("is DISCONNECTED while the socket is closed", () => {
    expect(connectionOf(false, 500, 600)).toBe("DISCONNECTED");
  });

  it("is STALE before any pose and after one second of silence", () => {
    expect(connectionOf(true, null, 0)).toBe("STALE");
    expect(connectionOf(true, 0, STALE_AFTER_MS + 1)).toBe("STALE");
  });

  it("is LIVE while pose frames are fresh", () => {
    expect(connectionOf(true, 0, 999)).toBe("LIVE");
    expect(connectionOf(true, 0, STALE_AFTER_MS)).toBe("LIVE");
  });
});
