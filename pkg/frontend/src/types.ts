// Wire shapes of the tracking service's HTTP/WS API, with structural
// validators. A payload that fails validation must surface as a visible
// banner, never a crash and never a silently wrong drawing.

export type Vec3 = [number, number, number];

export type TrackMode = "TRACKED" | "GHOSTED" | "LOST" | "KIDNAPPED";

export interface SplatEntry {
  mean: Vec3;
  scale: Vec3;
  color: Vec3;
}

export interface MapPayload {
  count: number;
  splats: SplatEntry[];
}

export interface PoseRecord {
  t: number;
  mode: TrackMode;
  translation: Vec3;
  rotation: number[]; // row-major 3x3
  extents: Vec3;
  mean_conf: number;
}

export interface AlertEvent {
  t: number;
  alert_level: "WARN" | "CRITICAL";
  min_mahalanobis: number;
  nearest_splat: number | null;
}

export interface PathPayload {
  planned_at: number;
  cost_m: number;
  waypoints: Vec3[];
}

export interface CommandPayload {
  kind: "GOTO" | "FOLLOW" | "STOP";
  target: Vec3 | null;
  follow_distance: number | null;
  raw: string;
}

const MODES: ReadonlySet<string> = new Set(["TRACKED", "GHOSTED", "LOST", "KIDNAPPED"]);
const LEVELS: ReadonlySet<string> = new Set(["WARN", "CRITICAL"]);

const isNum = (v: unknown): v is number => typeof v === "number" && Number.isFinite(v);

const isRecord = (v: unknown): v is Record<string, unknown> =>
  typeof v === "object" && v !== null && !Array.isArray(v);

export function isVec3(v: unknown): v is Vec3 {
  return Array.isArray(v) && v.length === 3 && v.every(isNum);
}

function isMat3(v: unknown): v is number[] {
  return Array.isArray(v) && v.length === 9 && v.every(isNum);
}

export function isSplatEntry(v: unknown): v is SplatEntry {
  return isRecord(v) && isVec3(v.mean) && isVec3(v.scale) && isVec3(v.color);
}

export function isMapPayload(v: unknown): v is MapPayload {
  return (
    isRecord(v) &&
    isNum(v.count) &&
    v.count >= 0 &&
    Array.isArray(v.splats) &&
    v.splats.every(isSplatEntry)
  );
}

export function isPoseRecord(v: unknown): v is PoseRecord {
  return (
    isRecord(v) &&
    isNum(v.t) &&
    typeof v.mode === "string" &&
    MODES.has(v.mode) &&
    isVec3(v.translation) &&
    isMat3(v.rotation) &&
    isVec3(v.extents) &&
    isNum(v.mean_conf)
  );
}

export function isAlertEvent(v: unknown): v is AlertEvent {
  return (
    isRecord(v) &&
    isNum(v.t) &&
    typeof v.alert_level === "string" &&
    LEVELS.has(v.alert_level) &&
    isNum(v.min_mahalanobis) &&
    (v.nearest_splat === null || isNum(v.nearest_splat))
  );
}

export function isPathPayload(v: unknown): v is PathPayload {
  return (
    isRecord(v) &&
    isNum(v.planned_at) &&
    isNum(v.cost_m) &&
    Array.isArray(v.waypoints) &&
    v.waypoints.length >= 2 &&
    v.waypoints.every(isVec3)
  );
}

export function isCommandPayload(v: unknown): v is CommandPayload {
  return (
    isRecord(v) &&
    (v.kind === "GOTO" || v.kind === "FOLLOW" || v.kind === "STOP") &&
    (v.target === null || isVec3(v.target)) &&
    (v.follow_distance === null || isNum(v.follow_distance)) &&
    typeof v.raw === "string"
  );
}

// The socket interleaves pose records and alert events; a "mode" key marks
// a pose, an "alert_level" key marks an alert.
export type ServerEvent =
  | { kind: "pose"; record: PoseRecord }
  | { kind: "alert"; alert: AlertEvent }
  | { kind: "malformed"; detail: string };

export function parseServerMessage(raw: string): ServerEvent {
  let parsed: unknown;
  try {
    parsed = JSON.parse(raw);
  } catch {
    return { kind: "malformed", detail: "stream frame is not JSON" };
  }
  if (isRecord(parsed) && "mode" in parsed) {
    if (isPoseRecord(parsed)) return { kind: "pose", record: parsed };
    return { kind: "malformed", detail: "pose record failed validation" };
  }
  if (isRecord(parsed) && "alert_level" in parsed) {
    if (isAlertEvent(parsed)) return { kind: "alert", alert: parsed };
    return { kind: "malformed", detail: "alert event failed validation" };
  }
  return { kind: "malformed", detail: "stream frame is neither pose nor alert" };
}
