// Thin fetch wrappers over the service HTTP API. Expected rejections
// (409 planner errors, 400 grammar errors) come back as discriminated
// results; schema mismatches throw so callers surface a banner.

import {
  isCommandPayload,
  isMapPayload,
  isPathPayload,
  type CommandPayload,
  type MapPayload,
  type PathPayload,
  type Vec3,
} from "./types.js";

export interface HttpResponse {
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<HttpResponse>;

export class SchemaMismatch extends Error {}

const isRecord = (v: unknown): v is Record<string, unknown> =>
  typeof v === "object" && v !== null && !Array.isArray(v);

function errorField(body: unknown, field: string): string | null {
  if (isRecord(body) && typeof body[field] === "string") return body[field];
  return null;
}

async function postJson(f: FetchLike, url: string, body: unknown): Promise<HttpResponse> {
  return f(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
}

export async function getMap(base: string, f: FetchLike): Promise<MapPayload> {
  const res = await f(`${base}/api/map`);
  if (res.status !== 200) throw new SchemaMismatch(`map endpoint returned ${res.status}`);
  const body = await res.json();
  if (!isMapPayload(body)) throw new SchemaMismatch("map payload failed validation");
  return body;
}

export type PathResult =
  | { ok: true; path: PathPayload }
  | { ok: false; detail: string | null };

export async function getPath(base: string, f: FetchLike): Promise<PathResult> {
  const res = await f(`${base}/api/path`);
  const body = await res.json();
  if (res.status === 404) return { ok: false, detail: errorField(body, "detail") };
  if (res.status !== 200) throw new SchemaMismatch(`path endpoint returned ${res.status}`);
  if (!isPathPayload(body)) throw new SchemaMismatch("path payload failed validation");
  return { ok: true, path: body };
}

export type GoalResult =
  | { ok: true }
  | { ok: false; error: string; detail: string | null };

export async function postGoal(base: string, target: Vec3, f: FetchLike): Promise<GoalResult> {
  const res = await postJson(f, `${base}/api/goal`, { target });
  const body = await res.json();
  if (res.status === 200) return { ok: true };
  return {
    ok: false,
    error: errorField(body, "error") ?? `goal endpoint returned ${res.status}`,
    detail: errorField(body, "detail"),
  };
}

export async function postPrompt(base: string, text: string, f: FetchLike): Promise<void> {
  const res = await postJson(f, `${base}/api/prompt`, { prompt: text });
  if (res.status !== 200) throw new SchemaMismatch(`prompt endpoint returned ${res.status}`);
}

export type CommandResult =
  | { ok: true; payload: CommandPayload }
  | { ok: false; error: string; position: number | null; detail: string | null };

export async function postCommand(
  base: string,
  text: string,
  f: FetchLike,
): Promise<CommandResult> {
  const res = await postJson(f, `${base}/api/command`, { text });
  const body = await res.json();
  if (res.status === 200) {
    if (!isCommandPayload(body)) throw new SchemaMismatch("command payload failed validation");
    return { ok: true, payload: body };
  }
  const position = isRecord(body) && typeof body.position === "number" ? body.position : null;
  return {
    ok: false,
    error: errorField(body, "error") ?? `command endpoint returned ${res.status}`,
    position,
    detail: errorField(body, "detail"),
  };
}
