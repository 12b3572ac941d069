"""Temporal pose tracking: smoothing, ghosting, and kidnap recovery.

A deliberately small filter: exponential smoothing on translation, a
geodesic step toward the measured rotation, and a constant-velocity
model that carries the pose through missed detections (ghosting). A
measurement that lands far from the prediction is accepted as a kidnap
re-localization only when its mean confidence clears kidnap_conf;
otherwise it is rejected as an outlier and treated as a miss, so
low-confidence teleports can never drag the state away.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .fusion import Frame
from .pose import Pose6DoF, PoseQuality
from .rotations import interpolate


class TimeReversal(ValueError):
    """Prediction or update requested at a timestamp before last_update."""


class FrameMismatch(ValueError):
    """Tracker operates in the world frame only."""


class TrackMode(Enum):
    TRACKED = "TRACKED"
    GHOSTED = "GHOSTED"
    KIDNAPPED = "KIDNAPPED"
    LOST = "LOST"


@dataclass(frozen=True)
class TrackerConfig:
    alpha_t: float = 0.5
    alpha_r: float = 0.5
    kidnap_dist: float = 1.0
    kidnap_conf: float = 0.6
    ghost_limit: int = 10
    rate_hz: float = 10.0

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha_t <= 1.0:
            raise ValueError(f"alpha_t {self.alpha_t} outside (0, 1]")
        if not 0.0 < self.alpha_r <= 1.0:
            raise ValueError(f"alpha_r {self.alpha_r} outside (0, 1]")
        for name in ("kidnap_dist", "kidnap_conf", "ghost_limit", "rate_hz"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class TrackState:
    """Immutable tracker snapshot; update() returns a new one."""

    pose: Pose6DoF
    velocity: np.ndarray = field(repr=False)
    mode: TrackMode
    misses: int
    last_update: float
    mean_conf: float = 0.0

    def __post_init__(self) -> None:
        if self.pose.frame is not Frame.WORLD:
            raise FrameMismatch(f"tracker pose must be WORLD, got {self.pose.frame}")
        v = np.asarray(self.velocity, dtype=np.float64).reshape(3)
        if self.mode is TrackMode.TRACKED and self.misses != 0:
            raise ValueError("TRACKED state must have zero misses")
        if self.mode in (TrackMode.GHOSTED, TrackMode.LOST) and self.misses <= 0:
            raise ValueError(f"{self.mode.value} state must have positive misses")
        object.__setattr__(self, "velocity", v)

    @classmethod
    def initial(cls, measurement: Pose6DoF, mean_conf: float, now: float) -> "TrackState":
        """Acquire from the first valid world-frame measurement."""
        if measurement.frame is not Frame.WORLD:
            raise FrameMismatch("initial measurement must be in the world frame")
        if not measurement.is_valid:
            raise ValueError("cannot acquire from an INVALID measurement")
        return cls(
            pose=replace(measurement, timestamp=now),
            velocity=np.zeros(3),
            mode=TrackMode.TRACKED,
            misses=0,
            last_update=now,
            mean_conf=mean_conf,
        )

    def to_record(self) -> dict:
        """Pose-stream JSON record for one frame."""
        return {
            "t": self.last_update,
            "mode": self.mode.value,
            "translation": [float(c) for c in self.pose.translation],
            "rotation": [float(c) for c in self.pose.rotation.reshape(-1)],
            "extents": [float(c) for c in self.pose.extents],
            "mean_conf": float(self.mean_conf),
        }


def predict(state: TrackState, now: float) -> Pose6DoF:
    """Constant-velocity extrapolation; rotation held."""
    dt = now - state.last_update
    if dt < 0:
        raise TimeReversal(f"now {now} precedes last_update {state.last_update}")
    return replace(
        state.pose,
        translation=state.pose.translation + state.velocity * dt,
        timestamp=now,
    )


def _missed(state: TrackState, now: float, cfg: TrackerConfig) -> TrackState:
    misses = state.misses + 1
    if misses <= cfg.ghost_limit:
        return TrackState(
            pose=predict(state, now),
            velocity=state.velocity,
            mode=TrackMode.GHOSTED,
            misses=misses,
            last_update=now,
            mean_conf=state.mean_conf,
        )
    # Beyond the ghost budget the pose freezes; zero velocity stops the
    # extrapolation so a later re-acquisition is judged against a fixed point.
    return TrackState(
        pose=replace(state.pose, timestamp=now),
        velocity=np.zeros(3),
        mode=TrackMode.LOST,
        misses=misses,
        last_update=now,
        mean_conf=state.mean_conf,
    )


def update(
    state: TrackState,
    measurement: Pose6DoF,
    mean_conf: float,
    now: float,
    cfg: TrackerConfig,
) -> TrackState:
    """One tracker step against a world-frame measurement.

    INVALID measurements ghost (then lose) the track. A valid measurement
    farther than kidnap_dist from the prediction re-initializes the state
    (mode KIDNAPPED for that one transition, velocity zeroed) when its
    confidence reaches kidnap_conf, and counts as a miss otherwise.
    Accepted nearby measurements smooth translation by alpha_t, step the
    rotation a geodesic fraction alpha_r, and differentiate the smoothed
    translations for velocity.
    """
    if now < state.last_update:
        raise TimeReversal(f"now {now} precedes last_update {state.last_update}")
    if measurement.quality is PoseQuality.INVALID:
        return _missed(state, now, cfg)
    if measurement.frame is not Frame.WORLD:
        raise FrameMismatch(f"measurement frame {measurement.frame} is not WORLD")

    predicted = predict(state, now)
    innovation = float(np.linalg.norm(measurement.translation - predicted.translation))
    if innovation > cfg.kidnap_dist:
        if mean_conf >= cfg.kidnap_conf:
            return TrackState(
                pose=replace(measurement, timestamp=now),
                velocity=np.zeros(3),
                mode=TrackMode.KIDNAPPED,
                misses=0,
                last_update=now,
                mean_conf=mean_conf,
            )
        return _missed(state, now, cfg)

    smoothed_t = (1.0 - cfg.alpha_t) * predicted.translation + cfg.alpha_t * measurement.translation
    if measurement.quality is PoseQuality.DEGENERATE_ORIENTATION:
        smoothed_r = predicted.rotation
    else:
        smoothed_r = interpolate(predicted.rotation, measurement.rotation, cfg.alpha_r)
    dt = now - state.last_update
    if dt > 0:
        velocity = (smoothed_t - state.pose.translation) / dt
    else:
        velocity = state.velocity
    return TrackState(
        pose=Pose6DoF(
            translation=smoothed_t,
            rotation=smoothed_r,
            extents=measurement.extents,
            quality=measurement.quality,
            timestamp=now,
            frame=Frame.WORLD,
        ),
        velocity=velocity,
        mode=TrackMode.TRACKED,
        misses=0,
        last_update=now,
        mean_conf=mean_conf,
    )
