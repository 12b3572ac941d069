"""Operator boundary: command grammar, backend client, engine, HTTP/WS API.

The engine runs two loops on daemon threads: the pose loop (target
rate_hz, default 10 Hz) consuming the newest available frame, and the
planner loop (default 1 Hz) reading immutable snapshots. Frames are
dropped latest-wins, never queued, so a slow or stalled planner cannot
back-pressure pose estimation. Every cross-thread value is an immutable
snapshot guarded by one short-lived lock.
"""

from __future__ import annotations

import asyncio
import json
import socket
import threading
import time
from collections import deque
from dataclasses import dataclass
from enum import Enum

import httpx
import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .camera import CameraIntrinsics, depth_to_metric
from .fusion import LogitStack
from .pipeline import BackendMode, FrameInput, PipelineConfig, run_pipeline_step, unacquired_record
from .planner import GoalOccupied, NoPath, OutsideGrid, StartOccupied, plan, replan_due, smooth
from .splatmap import AlertLevel, OccupancyGrid, SplatMap, build_occupancy, load_ply
from .zsr import Raster, parse_raster

DEFAULT_BACKEND_TIMEOUT = 0.2
_PLANNER_ERRORS = (OutsideGrid, StartOccupied, GoalOccupied, NoPath)


class UnrecognizedCommand(ValueError):
    """Command text leaves the grammar; position is the bad token index."""

    def __init__(self, message: str, position: int):
        super().__init__(message)
        self.position = position


class BackendTimeout(RuntimeError):
    """Backend did not answer in time; the frame counts as missed."""


class BackendMalformed(ValueError):
    """Backend answered with bytes that violate the contract."""


class PortUnavailable(OSError):
    """Requested service port cannot be bound."""


class CommandKind(Enum):
    GOTO = "GOTO"
    FOLLOW = "FOLLOW"
    STOP = "STOP"


@dataclass(frozen=True)
class SpatialCommand:
    kind: CommandKind
    target: tuple[float, float, float] | None = None
    follow_distance: float | None = None
    raw: str = ""

    def __post_init__(self) -> None:
        if self.kind is CommandKind.GOTO and self.target is None:
            raise ValueError("GOTO command requires a target")
        if self.kind is CommandKind.FOLLOW and not (
            self.follow_distance is not None and self.follow_distance > 0
        ):
            raise ValueError("FOLLOW command requires a positive distance")

    def to_payload(self) -> dict:
        return {
            "kind": self.kind.value,
            "target": list(self.target) if self.target is not None else None,
            "follow_distance": self.follow_distance,
            "raw": self.raw,
        }


def _number(tokens: list[str], i: int) -> float:
    if i >= len(tokens):
        raise UnrecognizedCommand(f"expected a number at token {i}, got end of input", i)
    try:
        return float(tokens[i])
    except ValueError:
        raise UnrecognizedCommand(f"expected a number at token {i}, got {tokens[i]!r}", i) from None


def parse_command(text: str, current_z: float = 0.0) -> SpatialCommand:
    """Parse the operator grammar (case-insensitive):

        goto <x> <y> [<z>]       z defaults to the robot's current height
        follow [at] <d> m [distance]
        stop
    """
    tokens = text.split()
    if not tokens:
        raise UnrecognizedCommand("empty command", 0)
    head = tokens[0].lower()
    if head == "goto":
        x = _number(tokens, 1)
        y = _number(tokens, 2)
        z = _number(tokens, 3) if len(tokens) > 3 else current_z
        if len(tokens) > 4:
            raise UnrecognizedCommand(f"unexpected token {tokens[4]!r} at 4", 4)
        return SpatialCommand(kind=CommandKind.GOTO, target=(x, y, z), raw=text)
    if head == "follow":
        i = 1
        if i < len(tokens) and tokens[i].lower() == "at":
            i += 1
        d = _number(tokens, i)
        if d <= 0:
            raise UnrecognizedCommand(f"follow distance must be positive, got {d}", i)
        i += 1
        if i >= len(tokens) or tokens[i].lower() != "m":
            raise UnrecognizedCommand(f"expected 'm' at token {i}", i)
        i += 1
        if i < len(tokens) and tokens[i].lower() == "distance":
            i += 1
        if i < len(tokens):
            raise UnrecognizedCommand(f"unexpected token {tokens[i]!r} at {i}", i)
        return SpatialCommand(kind=CommandKind.FOLLOW, follow_distance=d, raw=text)
    if head == "stop":
        if len(tokens) > 1:
            raise UnrecognizedCommand(f"unexpected token {tokens[1]!r} at 1", 1)
        return SpatialCommand(kind=CommandKind.STOP, raw=text)
    raise UnrecognizedCommand(f"unknown command {tokens[0]!r}", 0)


def format_command(cmd: SpatialCommand) -> str:
    """Canonical text that parses back to an equal command (modulo raw)."""
    if cmd.kind is CommandKind.GOTO:
        x, y, z = cmd.target
        return f"goto {x!r} {y!r} {z!r}"
    if cmd.kind is CommandKind.FOLLOW:
        return f"follow at {cmd.follow_distance!r} m"
    return "stop"


@dataclass(frozen=True)
class BackendRequest:
    frame_id: int
    image_ref: str
    prompt: str
    n_samples: int

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")

    def to_payload(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "image_ref": self.image_ref,
            "prompt": self.prompt,
            "n_samples": self.n_samples,
        }


def _post_raster(url: str, payload: dict, timeout: float) -> Raster:
    try:
        resp = httpx.post(url, json=payload, timeout=timeout)
    except httpx.TimeoutException as exc:
        raise BackendTimeout(f"{url}: {exc}") from exc
    except httpx.HTTPError as exc:
        raise BackendTimeout(f"{url}: {exc}") from exc
    if resp.status_code != 200:
        raise BackendMalformed(f"{url}: status {resp.status_code}")
    try:
        return parse_raster(resp.content, label=url)
    except ValueError as exc:
        raise BackendMalformed(f"{url}: {exc}") from exc


def fetch_backend(
    req: BackendRequest,
    endpoint: str,
    intrinsics: CameraIntrinsics,
    timeout: float = DEFAULT_BACKEND_TIMEOUT,
) -> LogitStack:
    """POST the request to {endpoint}/segment and decode the N-channel ZSR
    logit stack, validating dimensions against the camera config."""
    raster = _post_raster(endpoint.rstrip("/") + "/segment", req.to_payload(), timeout)
    if (raster.width, raster.height) != (intrinsics.width, intrinsics.height):
        raise BackendMalformed(
            f"segment raster {raster.width}x{raster.height} != "
            f"camera {intrinsics.width}x{intrinsics.height}"
        )
    if raster.channels != req.n_samples:
        raise BackendMalformed(f"segment channels {raster.channels} != n_samples {req.n_samples}")
    return LogitStack.from_multichannel(raster, prompt=req.prompt)


def fetch_backend_depth(
    req: BackendRequest,
    endpoint: str,
    intrinsics: CameraIntrinsics,
    timeout: float = DEFAULT_BACKEND_TIMEOUT,
) -> Raster:
    """POST to {endpoint}/depth for the single-channel relative-depth ZSR."""
    raster = _post_raster(endpoint.rstrip("/") + "/depth", req.to_payload(), timeout)
    if (raster.width, raster.height) != (intrinsics.width, intrinsics.height):
        raise BackendMalformed(
            f"depth raster {raster.width}x{raster.height} != "
            f"camera {intrinsics.width}x{intrinsics.height}"
        )
    if raster.channels != 1:
        raise BackendMalformed(f"depth raster has {raster.channels} channels, expected 1")
    return raster


class Engine:
    """Shared live state plus the pose and planner loops.

    Frames arrive either from a frame_provider callable polled by the
    pose loop or through submit_frame (latest-wins slot). plan_fn and
    smooth_fn are injectable so tests can delay or instrument planning.
    """

    def __init__(
        self,
        cfg: PipelineConfig,
        splat_map: SplatMap | None = None,
        grid: OccupancyGrid | None = None,
        frame_provider=None,
        plan_fn=plan,
        smooth_fn=smooth,
        clock=time.monotonic,
    ):
        self.cfg = cfg
        self.splat_map = splat_map
        if grid is None and splat_map is not None and len(splat_map):
            grid = build_occupancy(splat_map, cfg.voxel_size, cfg.sigma_gate, cfg.robot_radius)
        self.grid = grid
        self._frame_provider = frame_provider
        self._plan_fn = plan_fn
        self._smooth_fn = smooth_fn
        self._clock = clock
        self._epoch = clock()
        self._lock = threading.Lock()
        self._state = None
        self._latest_record: dict | None = None
        self._alerts: deque = deque(maxlen=100)
        self._path = None
        self._plan_error: str | None = None
        self._goal: tuple[float, float, float] | None = None
        self._follow_distance: float | None = None
        self._prompt = cfg.prompt
        self._frame_slot: FrameInput | None = None
        self._last_plan_t = -float("inf")
        self._subscribers: list[tuple[asyncio.AbstractEventLoop, asyncio.Queue]] = []
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self.frames_processed = 0

    def now(self) -> float:
        return self._clock() - self._epoch

    # -- frame intake -------------------------------------------------

    def submit_frame(self, frame: FrameInput) -> None:
        """Hand the engine a frame; an unprocessed predecessor is dropped."""
        with self._lock:
            self._frame_slot = frame

    def _take_frame(self) -> FrameInput | None:
        if self._frame_provider is not None:
            return self._frame_provider()
        with self._lock:
            frame, self._frame_slot = self._frame_slot, None
        return frame

    # -- pipeline -----------------------------------------------------

    def process_frame(self, frame: FrameInput) -> dict:
        """Run one pipeline step and publish its record (and any alert)."""
        with self._lock:
            state = self._state
        state, conf, report = run_pipeline_step(frame, state, self.cfg, self.splat_map)
        record = state.to_record() if state is not None else unacquired_record(frame.t)
        alert = None
        if report is not None and report.alert_level is not AlertLevel.NONE:
            alert = {
                "t": frame.t,
                "alert_level": report.alert_level.value,
                "min_mahalanobis": report.min_mahalanobis,
                "nearest_splat": report.nearest_splat,
            }
        with self._lock:
            self._state = state
            self._latest_record = record
            if alert is not None:
                self._alerts.append(alert)
            self.frames_processed += 1
        self._publish(record)
        if alert is not None:
            self._publish(alert)
        return record

    def plan_once(self, now: float | None = None):
        """One planner iteration from the latest pose snapshot to the goal."""
        now = self.now() if now is None else now
        with self._lock:
            goal = self._goal
            state = self._state
        if goal is None or state is None or self.grid is None:
            return None
        try:
            path = self._plan_fn(self.grid, state.pose.translation, np.array(goal), planned_at=now)
            path = self._smooth_fn(
                path, self.grid, iterations=self.cfg.smooth_iterations, seed=self.cfg.smooth_seed
            )
        except _PLANNER_ERRORS as exc:
            with self._lock:
                self._plan_error = f"{type(exc).__name__}: {exc}"
            return None
        with self._lock:
            self._path = path
            self._plan_error = None
        return path

    # -- operator mutations -------------------------------------------

    def set_goal(self, target) -> None:
        """Validate and store the goal; raises planner errors for bad goals."""
        goal = tuple(float(c) for c in np.asarray(target, dtype=np.float64).reshape(3))
        if self.grid is not None:
            vox = self.grid.voxel_of(goal)
            if vox is None:
                raise OutsideGrid(f"goal {list(goal)} outside grid")
            if self.grid.as_3d()[vox]:
                raise GoalOccupied(f"goal voxel {vox} occupied")
        with self._lock:
            self._goal = goal

    def set_prompt(self, prompt: str) -> None:
        with self._lock:
            self._prompt = prompt

    def apply_command(self, text: str) -> SpatialCommand:
        cmd = parse_command(text, current_z=self.current_z())
        if cmd.kind is CommandKind.GOTO:
            self.set_goal(cmd.target)
        elif cmd.kind is CommandKind.FOLLOW:
            with self._lock:
                self._follow_distance = cmd.follow_distance
        else:
            with self._lock:
                self._goal = None
                self._path = None
                self._follow_distance = None
        return cmd

    # -- snapshots ----------------------------------------------------

    def current_z(self) -> float:
        with self._lock:
            record = self._latest_record
        return float(record["translation"][2]) if record else 0.0

    def latest_record(self) -> dict | None:
        with self._lock:
            return self._latest_record

    def latest_path(self):
        with self._lock:
            return self._path

    def plan_error(self) -> str | None:
        with self._lock:
            return self._plan_error

    def alerts(self) -> list[dict]:
        with self._lock:
            return list(self._alerts)

    def prompt(self) -> str:
        with self._lock:
            return self._prompt

    def follow_distance(self) -> float | None:
        with self._lock:
            return self._follow_distance

    def map_payload(self, cap: int = 5000) -> dict:
        if self.splat_map is None or not len(self.splat_map):
            return {"count": 0, "splats": []}
        n = len(self.splat_map)
        stride = max(1, -(-n // cap))
        splats = [
            {
                "mean": [float(c) for c in s.mean],
                "scale": [float(c) for c in s.scale],
                "color": [float(c) for c in s.color],
            }
            for s in self.splat_map.splats[::stride]
        ]
        return {"count": n, "splats": splats}

    # -- websocket fanout ---------------------------------------------

    def subscribe(self, loop: asyncio.AbstractEventLoop, queue: asyncio.Queue) -> None:
        with self._lock:
            self._subscribers.append((loop, queue))

    def unsubscribe(self, queue: asyncio.Queue) -> None:
        with self._lock:
            self._subscribers = [(l, q) for l, q in self._subscribers if q is not queue]

    def _publish(self, obj: dict) -> None:
        with self._lock:
            subs = list(self._subscribers)
        for loop, queue in subs:
            def _offer(q=queue, o=obj):
                try:
                    q.put_nowait(o)
                except asyncio.QueueFull:
                    pass
            try:
                loop.call_soon_threadsafe(_offer)
            except RuntimeError:
                pass

    # -- loops --------------------------------------------------------

    def _pose_loop(self) -> None:
        period = 1.0 / self.cfg.tracker.rate_hz
        deadline = self._clock()
        while not self._stop.is_set():
            frame = self._take_frame()
            if frame is not None:
                self.process_frame(frame)
            deadline += period
            delay = deadline - self._clock()
            if delay > 0:
                self._stop.wait(delay)
            else:
                deadline = self._clock()

    def _planner_loop(self) -> None:
        while not self._stop.is_set():
            now = self.now()
            if replan_due(self._last_plan_t, now, self.cfg.planner_period):
                self._last_plan_t = now
                self.plan_once(now=now)
            self._stop.wait(0.02)

    def start(self) -> None:
        self._stop.clear()
        self._threads = [
            threading.Thread(target=self._pose_loop, name="pose-loop", daemon=True),
            threading.Thread(target=self._planner_loop, name="planner-loop", daemon=True),
        ]
        for t in self._threads:
            t.start()

    def stop(self) -> None:
        self._stop.set()
        for t in self._threads:
            t.join(timeout=5.0)
        self._threads = []


def http_frame_provider(engine: Engine, endpoint: str, timeout: float = DEFAULT_BACKEND_TIMEOUT):
    """Frame source that polls the segmentation/depth backend once per pose
    tick. Timeouts and malformed replies yield a miss frame."""
    counter = {"frame_id": 0}

    def provider() -> FrameInput:
        t = engine.now()
        frame_id = counter["frame_id"]
        counter["frame_id"] += 1
        req = BackendRequest(
            frame_id=frame_id,
            image_ref=f"frame:{frame_id}",
            prompt=engine.prompt(),
            n_samples=engine.cfg.n_samples,
        )
        try:
            stack = fetch_backend(req, endpoint, engine.cfg.intrinsics, timeout=timeout)
            relative = fetch_backend_depth(req, endpoint, engine.cfg.intrinsics, timeout=timeout)
        except (BackendTimeout, BackendMalformed):
            return FrameInput(t=t)
        metric = depth_to_metric(relative, engine.cfg.calibration)
        return FrameInput(t=t, depth=metric, stack=stack)

    return provider


class GoalBody(BaseModel):
    target: list[float]


class PromptBody(BaseModel):
    prompt: str


class CommandBody(BaseModel):
    text: str


def build_app(engine: Engine, ui_dir: str | None = None) -> FastAPI:
    """FastAPI application exposing the engine's HTTP and WebSocket API.

    When ui_dir is given its files are served at /, after the API routes,
    so a browser console can run same-origin with no extra server.
    """
    app = FastAPI(title="splattrack", docs_url=None, redoc_url=None)

    @app.get("/api/map")
    def get_map():
        return engine.map_payload()

    @app.get("/api/pose")
    def get_pose():
        record = engine.latest_record()
        if record is None:
            return JSONResponse(status_code=404, content={"error": "NoPose"})
        return record

    @app.get("/api/path")
    def get_path():
        path = engine.latest_path()
        if path is None:
            detail = engine.plan_error()
            return JSONResponse(status_code=404, content={"error": "NoPath", "detail": detail})
        return path.to_payload()

    @app.get("/api/alerts")
    def get_alerts():
        return {"alerts": engine.alerts()}

    @app.post("/api/goal")
    def post_goal(body: GoalBody):
        if len(body.target) != 3:
            return JSONResponse(
                status_code=400, content={"error": "BadTarget", "detail": "target must be [x,y,z]"}
            )
        try:
            engine.set_goal(body.target)
        except _PLANNER_ERRORS as exc:
            return JSONResponse(
                status_code=409, content={"error": type(exc).__name__, "detail": str(exc)}
            )
        return {"accepted": True, "target": body.target}

    @app.post("/api/prompt")
    def post_prompt(body: PromptBody):
        engine.set_prompt(body.prompt)
        return {"prompt": body.prompt}

    @app.post("/api/command")
    def post_command(body: CommandBody):
        try:
            cmd = engine.apply_command(body.text)
        except UnrecognizedCommand as exc:
            return JSONResponse(
                status_code=400,
                content={
                    "error": "UnrecognizedCommand",
                    "position": exc.position,
                    "detail": str(exc),
                },
            )
        except _PLANNER_ERRORS as exc:
            return JSONResponse(
                status_code=409, content={"error": type(exc).__name__, "detail": str(exc)}
            )
        return cmd.to_payload()

    @app.websocket("/ws")
    async def ws(websocket: WebSocket):
        await websocket.accept()
        loop = asyncio.get_running_loop()
        queue: asyncio.Queue = asyncio.Queue(maxsize=256)
        engine.subscribe(loop, queue)
        try:
            while True:
                item = await queue.get()
                await websocket.send_text(json.dumps(item))
        except WebSocketDisconnect:
            pass
        finally:
            engine.unsubscribe(queue)

    if ui_dir is not None:
        from starlette.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def _check_port(host: str, port: int) -> None:
    try:
        probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
        probe.close()
    except OSError as exc:
        raise PortUnavailable(f"cannot bind {host}:{port}: {exc}") from exc


def serve(
    cfg: PipelineConfig,
    map_path,
    port: int,
    backend_url: str = "",
    host: str = "127.0.0.1",
    ui_dir: str | None = None,
) -> None:
    """Load the map, start the engine loops, and serve the API until
    interrupted. Config and port problems surface before binding."""
    import uvicorn

    splat_map = load_ply(map_path)
    engine = Engine(cfg, splat_map=splat_map)
    if backend_url or cfg.backend_mode is BackendMode.HTTP:
        if not backend_url:
            backend_url = cfg.backend_url
        if backend_url:
            engine._frame_provider = http_frame_provider(engine, backend_url)
    _check_port(host, port)
    app = build_app(engine, ui_dir=ui_dir)
    engine.start()
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        engine.stop()
