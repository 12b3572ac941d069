// Orchestration: one reducer-owned state, socket messages dispatched as
// actions, renders coalesced through an injected scheduler. Also the
// pose-latency instrument: every pose receipt is stamped and matched to
// the completion time of the next render that shows it.

import { getMap, getPath, postCommand, postGoal, postPrompt, SchemaMismatch } from "./api.js";
import type { FetchLike } from "./api.js";
import { renderScene, type Canvas2D } from "./render.js";
import { initialState, reduce, type Action, type ConsoleState } from "./state.js";
import { parseServerMessage, type Vec3 } from "./types.js";
import {
  connectionOf,
  createView,
  panByScreen,
  screenToWorld,
  zoomAtScreen,
  type ViewState,
} from "./view.js";
import { openSocket, type SocketFactory, type WebSocketLike } from "./ws.js";

export interface ConsoleOptions {
  base: string;
  wsUrl: string;
  ctx: Canvas2D;
  width: number;
  height: number;
  fetchImpl: FetchLike;
  makeSocket: SocketFactory;
  schedule: (cb: () => void) => void;
  delay: (cb: () => void, ms: number) => void;
  now: () => number;
  initialZoom?: number;
  afterRender?: (state: ConsoleState, view: ViewState) => void;
}

const RECONNECT_MS = 1000;

export class OperatorConsole {
  private st: ConsoleState = initialState();
  private vw: ViewState;
  private socket: WebSocketLike | null = null;
  private renderQueued = false;
  private stopped = false;
  private pendingReceipts: number[] = [];
  private latencies: number[] = [];

  constructor(private opts: ConsoleOptions) {
    this.vw = createView(opts.initialZoom ?? 60);
  }

  state(): ConsoleState {
    return this.st;
  }

  view(): ViewState {
    return this.vw;
  }

  // Wall-clock ms from socket receipt to the completed render of that
  // pose frame, one entry per received pose record.
  renderLatencies(): number[] {
    return [...this.latencies];
  }

  async start(): Promise<void> {
    try {
      const map = await getMap(this.opts.base, this.opts.fetchImpl);
      this.dispatch({ kind: "map-loaded", map });
    } catch (err) {
      this.dispatch({ kind: "map-error", detail: messageOf(err) });
    }
    this.connectSocket();
    this.scheduleRender();
  }

  stop(): void {
    this.stopped = true;
    this.socket?.close();
    this.socket = null;
  }

  private connectSocket(): void {
    if (this.stopped) return;
    this.socket = openSocket(this.opts.wsUrl, this.opts.makeSocket, {
      onOpen: () => this.dispatch({ kind: "socket-open" }),
      onRaw: (raw) => this.handleMessage(raw),
      onClose: () => {
        this.dispatch({ kind: "socket-closed" });
        if (!this.stopped) this.opts.delay(() => this.connectSocket(), RECONNECT_MS);
      },
    });
  }

  handleMessage(raw: string): void {
    const receipt = this.opts.now();
    const event = parseServerMessage(raw);
    if (event.kind === "pose") this.pendingReceipts.push(receipt);
    this.dispatch({ kind: "server-event", event, wall: receipt });
  }

  private dispatch(action: Action): void {
    this.st = reduce(this.st, action);
    this.scheduleRender();
  }

  private scheduleRender(): void {
    if (this.renderQueued || this.stopped) return;
    this.renderQueued = true;
    this.opts.schedule(() => {
      this.renderQueued = false;
      if (!this.stopped) this.renderNow();
    });
  }

  private renderNow(): void {
    const now = this.opts.now();
    this.vw = {
      ...this.vw,
      connection: connectionOf(this.st.socketOpen, this.st.lastPoseWall, now),
      selectedGoal: this.st.goal?.target ?? null,
    };
    renderScene(this.opts.ctx, {
      state: this.st,
      view: this.vw,
      width: this.opts.width,
      height: this.opts.height,
      now,
    });
    const done = this.opts.now();
    for (const receipt of this.pendingReceipts) this.latencies.push(done - receipt);
    this.pendingReceipts = [];
    this.opts.afterRender?.(this.st, this.vw);
  }

  // Re-render on a timer so staleness, flash decay, and tooltip expiry
  // show without new socket traffic.
  tick(): void {
    this.scheduleRender();
  }

  panBy(dx: number, dy: number): void {
    this.vw = panByScreen(this.vw, dx, dy);
    this.scheduleRender();
  }

  zoomAt(sx: number, sy: number, factor: number): void {
    this.vw = zoomAtScreen(this.vw, this.opts.width, this.opts.height, sx, sy, factor);
    this.scheduleRender();
  }

  // A map click proposes a goal at the clicked ground position, at the
  // robot's current height. Only a LIVE view may post.
  async click(sx: number, sy: number): Promise<void> {
    const now = this.opts.now();
    const connection = connectionOf(this.st.socketOpen, this.st.lastPoseWall, now);
    if (connection !== "LIVE") {
      this.dispatch({
        kind: "tooltip",
        text: `${connection.toLowerCase()}: goal not sent`,
        x: sx,
        y: sy,
        wall: now,
      });
      return;
    }
    const w = screenToWorld(this.vw, this.opts.width, this.opts.height, sx, sy);
    const z = this.st.pose?.translation[2] ?? 0;
    const target: Vec3 = [w.x, w.y, z];
    this.dispatch({ kind: "goal-pending", target, wall: now });
    try {
      const result = await postGoal(this.opts.base, target, this.opts.fetchImpl);
      if (!result.ok) {
        this.dispatch({ kind: "goal-rejected", reason: result.detail ?? result.error });
        return;
      }
      await this.refreshPath();
    } catch (err) {
      this.dispatch({ kind: "goal-rejected", reason: messageOf(err) });
    }
  }

  async refreshPath(): Promise<void> {
    try {
      const result = await getPath(this.opts.base, this.opts.fetchImpl);
      if (result.ok) this.dispatch({ kind: "path-loaded", path: result.path });
      else this.dispatch({ kind: "path-missing", detail: result.detail });
    } catch (err) {
      if (err instanceof SchemaMismatch) {
        this.dispatch({ kind: "server-event", event: { kind: "malformed", detail: err.message }, wall: this.opts.now() });
      }
    }
  }

  async submitPrompt(text: string): Promise<void> {
    await postPrompt(this.opts.base, text, this.opts.fetchImpl);
    this.dispatch({ kind: "prompt-set", text });
  }

  async submitCommand(text: string): Promise<void> {
    try {
      const result = await postCommand(this.opts.base, text, this.opts.fetchImpl);
      if (result.ok) {
        this.dispatch({ kind: "command-echo", echo: { text, error: null, position: null } });
        const p = result.payload;
        if (p.kind === "GOTO" && p.target !== null) {
          this.dispatch({ kind: "goal-pending", target: p.target, wall: this.opts.now() });
          await this.refreshPath();
        } else if (p.kind === "STOP") {
          this.dispatch({ kind: "goal-cleared" });
        }
        return;
      }
      const label = result.detail !== null ? `${result.error}: ${result.detail}` : result.error;
      this.dispatch({
        kind: "command-echo",
        echo: { text, error: label, position: result.position },
      });
    } catch (err) {
      this.dispatch({
        kind: "command-echo",
        echo: { text, error: messageOf(err), position: null },
      });
    }
  }
}

function messageOf(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}
