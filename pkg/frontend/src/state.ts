// Console state and its reducer. Every mutation flows through reduce();
// wall-clock timestamps arrive inside actions so the reducer stays pure.

import type {
  AlertEvent,
  MapPayload,
  PathPayload,
  PoseRecord,
  ServerEvent,
  TrackMode,
  Vec3,
} from "./types.js";

export interface TrailPoint {
  x: number;
  y: number;
  mode: TrackMode;
}

export type GoalStatus = "PENDING" | "CONFIRMED" | "REJECTED";

export interface GoalMarker {
  target: Vec3;
  status: GoalStatus;
  reason: string | null;
  postedWall: number;
}

export interface ReceivedAlert {
  alert: AlertEvent;
  wall: number;
}

export interface CommandEcho {
  text: string;
  error: string | null;
  position: number | null;
}

export interface ConsoleState {
  map: MapPayload | null;
  mapError: string | null;
  schemaError: string | null;
  pose: PoseRecord | null;
  lastPoseWall: number | null;
  trail: TrailPoint[];
  alerts: ReceivedAlert[];
  path: PathPayload | null;
  pathDetail: string | null;
  goal: GoalMarker | null;
  prompt: string | null;
  command: CommandEcho | null;
  kidnapFlashUntil: number | null;
  tooltipText: string | null;
  tooltipUntil: number | null;
  tooltipX: number;
  tooltipY: number;
  socketOpen: boolean;
}

export const TRAIL_LIMIT = 120;
export const ALERT_LIMIT = 50;
export const KIDNAP_FLASH_MS = 700;
export const TOOLTIP_MS = 2000;

// A delivered path ends exactly at the requested goal (the planner swaps
// the snapped voxel center back for the true goal), so matching the last
// waypoint against the pending target is a clock-free confirmation.
const GOAL_MATCH_M = 0.25;

export function initialState(): ConsoleState {
  return {
    map: null,
    mapError: null,
    schemaError: null,
    pose: null,
    lastPoseWall: null,
    trail: [],
    alerts: [],
    path: null,
    pathDetail: null,
    goal: null,
    prompt: null,
    command: null,
    kidnapFlashUntil: null,
    tooltipText: null,
    tooltipUntil: null,
    tooltipX: 0,
    tooltipY: 0,
    socketOpen: false,
  };
}

export type Action =
  | { kind: "map-loaded"; map: MapPayload }
  | { kind: "map-error"; detail: string }
  | { kind: "socket-open" }
  | { kind: "socket-closed" }
  | { kind: "server-event"; event: ServerEvent; wall: number }
  | { kind: "goal-pending"; target: Vec3; wall: number }
  | { kind: "goal-rejected"; reason: string }
  | { kind: "goal-cleared" }
  | { kind: "path-loaded"; path: PathPayload }
  | { kind: "path-missing"; detail: string | null }
  | { kind: "prompt-set"; text: string }
  | { kind: "command-echo"; echo: CommandEcho }
  | { kind: "tooltip"; text: string; x: number; y: number; wall: number };

function reducePose(state: ConsoleState, record: PoseRecord, wall: number): ConsoleState {
  let trail = state.trail;
  if (record.mode !== "LOST") {
    trail = [
      ...trail,
      { x: record.translation[0], y: record.translation[1], mode: record.mode },
    ].slice(-TRAIL_LIMIT);
  }
  return {
    ...state,
    pose: record,
    lastPoseWall: wall,
    trail,
    kidnapFlashUntil:
      record.mode === "KIDNAPPED" ? wall + KIDNAP_FLASH_MS : state.kidnapFlashUntil,
  };
}

function goalNear(a: Vec3, b: Vec3): boolean {
  const dx = a[0] - b[0];
  const dy = a[1] - b[1];
  const dz = a[2] - b[2];
  return Math.sqrt(dx * dx + dy * dy + dz * dz) < GOAL_MATCH_M;
}

export function reduce(state: ConsoleState, action: Action): ConsoleState {
  switch (action.kind) {
    case "map-loaded":
      return { ...state, map: action.map, mapError: null };

    case "map-error":
      return { ...state, mapError: action.detail };

    case "socket-open":
      return { ...state, socketOpen: true };

    case "socket-closed":
      return { ...state, socketOpen: false };

    case "server-event": {
      const ev = action.event;
      if (ev.kind === "pose") return reducePose(state, ev.record, action.wall);
      if (ev.kind === "alert") {
        const alerts = [{ alert: ev.alert, wall: action.wall }, ...state.alerts].slice(
          0,
          ALERT_LIMIT,
        );
        return { ...state, alerts };
      }
      return { ...state, schemaError: ev.detail };
    }

    case "goal-pending":
      return {
        ...state,
        goal: { target: action.target, status: "PENDING", reason: null, postedWall: action.wall },
      };

    case "goal-rejected":
      return state.goal === null
        ? state
        : { ...state, goal: { ...state.goal, status: "REJECTED", reason: action.reason } };

    case "goal-cleared":
      return { ...state, goal: null, path: null, pathDetail: null };

    case "path-loaded": {
      let goal = state.goal;
      const last = action.path.waypoints[action.path.waypoints.length - 1];
      if (goal !== null && goal.status === "PENDING" && goalNear(last, goal.target)) {
        goal = { ...goal, status: "CONFIRMED" };
      }
      return { ...state, path: action.path, pathDetail: null, goal };
    }

    case "path-missing": {
      let goal = state.goal;
      if (goal !== null && goal.status === "PENDING" && action.detail !== null) {
        goal = { ...goal, status: "REJECTED", reason: action.detail };
      }
      return { ...state, path: null, pathDetail: action.detail, goal };
    }

    case "prompt-set":
      return { ...state, prompt: action.text };

    case "command-echo":
      return { ...state, command: action.echo };

    case "tooltip":
      return {
        ...state,
        tooltipText: action.text,
        tooltipUntil: action.wall + TOOLTIP_MS,
        tooltipX: action.x,
        tooltipY: action.y,
      };
  }
}
