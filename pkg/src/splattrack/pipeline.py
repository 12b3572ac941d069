"""Per-frame orchestration: rasters in, tracked world pose out.

One step runs fusion, cloud extraction, camera-frame pose estimation,
world registration, the tracker update, and an optional collision check,
in that fixed order. A frame that cannot produce a valid measurement
(missing stack, malformed rasters, empty cloud) increments the tracker's
miss count instead of aborting the loop.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .camera import (
    CalibrationMode,
    CameraExtrinsics,
    CameraIntrinsics,
    DepthCalibration,
    calibration_from_config,
    extrinsics_from_config,
    intrinsics_from_config,
    read_config,
)
from .fusion import ConfidenceMap, Frame, LogitStack, extract_cloud, fuse_mc_samples
from .pose import Pose6DoF, estimate_pose, pose_to_world
from .splatmap import (
    DEFAULT_ROBOT_RADIUS,
    DEFAULT_SIGMA_GATE,
    DEFAULT_WARN_MARGIN,
    CollisionReport,
    SplatMap,
    collision_check,
)
from .tracker import TrackerConfig, TrackState, update
from .zsr import Raster, read_raster


class BackendMode(Enum):
    FILES = "FILES"
    HTTP = "HTTP"


@dataclass(frozen=True)
class PipelineConfig:
    intrinsics: CameraIntrinsics
    extrinsics: CameraExtrinsics
    calibration: DepthCalibration = DepthCalibration(CalibrationMode.IDENTITY)
    tau: float = 0.5
    tracker: TrackerConfig = TrackerConfig()
    planner_period: float = 1.0
    backend_mode: BackendMode = BackendMode.FILES
    backend_url: str = ""
    prompt: str = "robot"
    n_samples: int = 8
    robot_radius: float = DEFAULT_ROBOT_RADIUS
    sigma_gate: float = DEFAULT_SIGMA_GATE
    warn_margin: float = DEFAULT_WARN_MARGIN
    voxel_size: float = 0.2
    smooth_iterations: int = 64
    smooth_seed: int = 0

    @classmethod
    def from_config(cls, values: dict) -> "PipelineConfig":
        tracker = TrackerConfig(
            alpha_t=float(values.get("alpha_t", 0.5)),
            alpha_r=float(values.get("alpha_r", 0.5)),
            kidnap_dist=float(values.get("kidnap_dist", 1.0)),
            kidnap_conf=float(values.get("kidnap_conf", 0.6)),
            ghost_limit=int(values.get("ghost_limit", 10)),
            rate_hz=float(values.get("rate_hz", 10.0)),
        )
        return cls(
            intrinsics=intrinsics_from_config(values),
            extrinsics=extrinsics_from_config(values),
            calibration=calibration_from_config(values),
            tau=float(values.get("tau", 0.5)),
            tracker=tracker,
            planner_period=float(values.get("planner_period", 1.0)),
            backend_mode=BackendMode(values.get("backend_mode", "FILES").upper()),
            backend_url=values.get("backend_url", ""),
            prompt=values.get("prompt", "robot"),
            n_samples=int(values.get("n_samples", 8)),
            robot_radius=float(values.get("robot_radius", DEFAULT_ROBOT_RADIUS)),
            sigma_gate=float(values.get("sigma_gate", DEFAULT_SIGMA_GATE)),
            warn_margin=float(values.get("warn_margin", DEFAULT_WARN_MARGIN)),
            voxel_size=float(values.get("voxel_size", 0.2)),
            smooth_iterations=int(values.get("smooth_iterations", 64)),
            smooth_seed=int(values.get("smooth_seed", 0)),
        )

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        return cls.from_config(read_config(path))


@dataclass(frozen=True)
class FrameInput:
    """Raw inputs for one pipeline step; stack=None marks a backend miss."""

    t: float
    depth: Raster | None = field(default=None, repr=False)
    stack: LogitStack | None = field(default=None, repr=False)


def _empty_confidence(cfg: PipelineConfig) -> ConfidenceMap:
    zeros = np.zeros((cfg.intrinsics.height, cfg.intrinsics.width, 1), dtype=np.float32)
    return ConfidenceMap(raster=Raster.from_array(zeros))


def _previous_camera_pose(state: TrackState | None, cfg: PipelineConfig) -> Pose6DoF | None:
    """Continuity reference for axis-sign disambiguation: the tracked world
    pose re-expressed in the camera frame."""
    if state is None:
        return None
    ext = cfg.extrinsics
    return Pose6DoF(
        translation=ext.inverse_transform(state.pose.translation),
        rotation=ext.rotation.T @ state.pose.rotation,
        extents=state.pose.extents,
        quality=state.pose.quality,
        timestamp=state.pose.timestamp,
        frame=Frame.CAMERA,
    )


def run_pipeline_step(
    frame: FrameInput,
    state: TrackState | None,
    cfg: PipelineConfig,
    splat_map: SplatMap | None = None,
) -> tuple[TrackState | None, ConfidenceMap, CollisionReport | None]:
    """One frame through the full chain; returns the new tracker state,
    the fused confidence map, and a collision report when a map is given."""
    conf = None
    measurement = Pose6DoF.invalid(timestamp=frame.t)
    mean_conf = 0.0
    if frame.stack is not None and frame.depth is not None:
        try:
            conf = fuse_mc_samples(frame.stack)
            cloud = extract_cloud(conf, frame.depth, cfg.intrinsics, tau=cfg.tau)
            if len(cloud) and cloud.valid:
                mean_conf = float(cloud.weights.mean())
            measurement = estimate_pose(
                cloud, previous=_previous_camera_pose(state, cfg), timestamp=frame.t
            )
        except ValueError:
            conf = None
            measurement = Pose6DoF.invalid(timestamp=frame.t)
    if conf is None:
        conf = _empty_confidence(cfg)
    world_measurement = pose_to_world(measurement, cfg.extrinsics)

    if state is None:
        if world_measurement.is_valid:
            state = TrackState.initial(world_measurement, mean_conf, frame.t)
        else:
            return None, conf, None
    else:
        state = update(state, world_measurement, mean_conf, frame.t, cfg.tracker)

    report = None
    if splat_map is not None and len(splat_map):
        report = collision_check(
            splat_map,
            state.pose.translation,
            robot_radius=cfg.robot_radius,
            sigma_gate=cfg.sigma_gate,
            warn_margin=cfg.warn_margin,
        )
    return state, conf, report


def unacquired_record(t: float) -> dict:
    """Pose-stream record emitted before the first valid measurement."""
    return {
        "t": t,
        "mode": "LOST",
        "translation": [0.0, 0.0, 0.0],
        "rotation": [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        "extents": [0.0, 0.0, 0.0],
        "mean_conf": 0.0,
    }


def scenario_frames(scenario_dir, n_samples: int):
    """Yield (frame_idx, depth Raster, LogitStack) for a scenario directory
    written by the synthesizer, in frame order."""
    root = Path(scenario_dir)
    depth_files = sorted(root.glob("frame_*_depth.zsr"))
    for path in depth_files:
        idx = int(path.name.split("_")[1])
        depth = read_raster(path)
        samples = []
        for j in range(n_samples):
            sample_path = root / f"frame_{idx:04d}_mc{j:02d}.zsr"
            if not sample_path.exists():
                break
            samples.append(read_raster(sample_path))
        stack = LogitStack(samples=tuple(samples)) if samples else None
        yield idx, depth, stack


def run_estimate(scenario_dir, cfg: PipelineConfig, out_path) -> int:
    """Batch the pipeline over a scenario directory, writing one pose
    record per frame as JSON Lines. Returns the frame count."""
    state = None
    count = 0
    with open(out_path, "w") as fh:
        for idx, depth, stack in scenario_frames(scenario_dir, cfg.n_samples):
            t = idx / cfg.tracker.rate_hz
            state, _, _ = run_pipeline_step(FrameInput(t=t, depth=depth, stack=stack), state, cfg)
            record = state.to_record() if state is not None else unacquired_record(t)
            fh.write(json.dumps(record) + "\n")
            count += 1
    return count
