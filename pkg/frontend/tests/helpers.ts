// Shared test scaffolding: a seeded RNG, a recording canvas context, a
// scripted fetch stub, and a controllable socket factory.

import type { FetchLike, HttpResponse } from "../src/api.js";
import type { Canvas2D } from "../src/render.js";
import type { PoseRecord, Vec3 } from "../src/types.js";
import type { SocketFactory, WebSocketLike } from "../src/ws.js";

// mulberry32: tiny deterministic PRNG for seeded property loops.
export function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export type DrawOp = [string, ...unknown[]];

export class RecordingContext implements Canvas2D {
  ops: DrawOp[] = [];
  private _fill = "";
  private _stroke = "";
  private _alpha = 1;
  lineWidth = 1;
  font = "";

  get fillStyle(): string {
    return this._fill;
  }
  set fillStyle(v: string) {
    this._fill = v;
  }
  get strokeStyle(): string {
    return this._stroke;
  }
  set strokeStyle(v: string) {
    this._stroke = v;
  }
  get globalAlpha(): number {
    return this._alpha;
  }
  set globalAlpha(v: number) {
    this._alpha = v;
  }

  save(): void {
    this.ops.push(["save", this._alpha]);
  }
  restore(): void {
    this._alpha = 1;
    this.ops.push(["restore"]);
  }
  beginPath(): void {
    this.ops.push(["beginPath"]);
  }
  moveTo(x: number, y: number): void {
    this.ops.push(["moveTo", x, y]);
  }
  lineTo(x: number, y: number): void {
    this.ops.push(["lineTo", x, y]);
  }
  closePath(): void {
    this.ops.push(["closePath"]);
  }
  stroke(): void {
    this.ops.push(["stroke", this._stroke, this._alpha]);
  }
  fill(): void {
    this.ops.push(["fill", this._fill, this._alpha]);
  }
  ellipse(x: number, y: number, rx: number, ry: number): void {
    this.ops.push(["ellipse", x, y, rx, ry]);
  }
  arc(x: number, y: number, r: number): void {
    this.ops.push(["arc", x, y, r]);
  }
  fillRect(x: number, y: number, w: number, h: number): void {
    this.ops.push(["fillRect", x, y, w, h]);
  }
  fillText(text: string, x: number, y: number): void {
    this.ops.push(["fillText", text, x, y]);
  }

  texts(): string[] {
    return this.ops.filter((op) => op[0] === "fillText").map((op) => op[1] as string);
  }

  find(name: string): DrawOp[] {
    return this.ops.filter((op) => op[0] === name);
  }
}

export interface Scripted {
  method: string;
  url: string;
  body: unknown;
}

// Fetch stub: routes map a "METHOD path" key to a (status, body) script;
// every request is logged for assertions.
export function scriptedFetch(
  routes: Record<string, { status: number; body: unknown }>,
): { fetchImpl: FetchLike; requests: Scripted[] } {
  const requests: Scripted[] = [];
  const fetchImpl: FetchLike = async (url, init): Promise<HttpResponse> => {
    const method = init?.method ?? "GET";
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    requests.push({
      method,
      url: path,
      body: init?.body !== undefined ? JSON.parse(init.body) : null,
    });
    const route = routes[`${method} ${path}`];
    if (route === undefined) {
      return { status: 404, json: async () => ({ error: "NoRoute" }) };
    }
    return { status: route.status, json: async () => route.body };
  };
  return { fetchImpl, requests };
}

export class StubSocket implements WebSocketLike {
  onopen: (() => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: ((ev: unknown) => void) | null = null;
  closed = false;

  constructor(public url: string) {}

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  open(): void {
    this.onopen?.();
  }
  message(raw: string): void {
    this.onmessage?.({ data: raw });
  }
  drop(): void {
    this.onclose?.();
  }
}

export function stubSocketFactory(): { factory: SocketFactory; sockets: StubSocket[] } {
  const sockets: StubSocket[] = [];
  const factory: SocketFactory = (url) => {
    const s = new StubSocket(url);
    sockets.push(s);
    return s;
  };
  return { factory, sockets };
}

export const IDENTITY9 = [1, 0, 0, 0, 1, 0, 0, 0, 1];

export function poseRecord(t: number, translation: Vec3, mode = "TRACKED"): PoseRecord {
  return {
    t,
    mode: mode as PoseRecord["mode"],
    translation,
    rotation: [...IDENTITY9],
    extents: [0.35, 0.17, 0.06],
    mean_conf: 0.91,
  };
}

export function flushTimers(ms = 0): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
