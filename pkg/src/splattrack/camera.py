"""Pinhole camera model, rigid camera-to-world transform, and depth calibration.

Pixel convention: (x, y) = (column, row), origin at the top-left pixel
center. Depth is the camera-frame Z coordinate in meters.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import Enum

import numpy as np


class NonPositiveDepth(ValueError):
    """Backprojection requires z > 0."""


class ChannelMismatch(ValueError):
    """Operation requires a single-channel raster."""


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if not (0 <= self.cx < self.width) or not (0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height}"
            )


@dataclass(frozen=True)
class CameraExtrinsics:
    """Rigid camera-to-world transform.

    rotation maps camera-frame vectors into the world frame; translation is
    the camera origin expressed in world coordinates.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-9, rtol=0):
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError(f"rotation determinant {np.linalg.det(r)} != +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "CameraExtrinsics":
        return cls(rotation=np.eye(3), translation=np.zeros(3))

    def inverse_transform(self, p_world: np.ndarray) -> np.ndarray:
        """World point back into the camera frame."""
        p = np.asarray(p_world, dtype=np.float64)
        return self.rotation.T @ (p - self.translation)


class CalibrationMode(Enum):
    AFFINE_DISPARITY = "AFFINE_DISPARITY"
    AFFINE_DEPTH = "AFFINE_DEPTH"
    IDENTITY = "IDENTITY"


@dataclass(frozen=True)
class DepthCalibration:
    """Maps a backend's relative depth raster to metric meters.

    AFFINE_DISPARITY treats the input as inverse depth: z = 1/(a*d + b),
    the usual convention for monocular depth networks. AFFINE_DEPTH is
    z = a*d + b. IDENTITY passes values through.
    """

    mode: CalibrationMode = CalibrationMode.AFFINE_DISPARITY
    a: float = 1.0
    b: float = 0.0
    epsilon: float = 1e-6

    def __post_init__(self) -> None:
        if self.mode is CalibrationMode.AFFINE_DISPARITY:
            if self.a <= 0:
                raise ValueError(f"AFFINE_DISPARITY requires a > 0, got {self.a}")
            if self.epsilon <= 0:
                raise ValueError(f"AFFINE_DISPARITY requires epsilon > 0, got {self.epsilon}")

    @classmethod
    def identity(cls) -> "DepthCalibration":
        return cls(mode=CalibrationMode.IDENTITY)


def backproject(x: float, y: float, z: float, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Pixel (x, y) at depth z to a camera-frame 3-vector.

    X = (x - cx) * z / fx,  Y = (y - cy) * z / fy,  Z = z.
    """
    if not np.isfinite(z) or z <= 0:
        raise NonPositiveDepth(f"depth {z}")
    return np.array(
        [
            (x - intrinsics.cx) * z / intrinsics.fx,
            (y - intrinsics.cy) * z / intrinsics.fy,
            z,
        ]
    )


def depth_to_metric(relative, calibration: DepthCalibration):
    """Apply the calibration to a single-channel relative-depth raster.

    Non-positive or non-finite results become NaN (no depth).
    """
    from .zsr import Raster

    if relative.channels != 1:
        raise ChannelMismatch(f"expected 1 channel, got {relative.channels}")
    d = relative.plane().astype(np.float64)
    if calibration.mode is CalibrationMode.IDENTITY:
        z = d.copy()
    elif calibration.mode is CalibrationMode.AFFINE_DEPTH:
        z = calibration.a * d + calibration.b
    else:
        denom = np.maximum(calibration.a * d + calibration.b, calibration.epsilon)
        z = 1.0 / denom
    z[~np.isfinite(z) | (z <= 0)] = np.nan
    return Raster.from_array(z.astype(np.float32))


def fit_disparity_calibration(references: list[tuple[float, float]], epsilon: float = 1e-6) -> DepthCalibration:
    """Fit AFFINE_DISPARITY coefficients from (disparity, metric distance) pairs.

    Least squares on disparity: 1/z ~ a*d + b. Two pairs determine the fit
    exactly; more are averaged.
    """
    if len(references) < 2:
        raise ValueError("need at least two reference pairs")
    d = np.array([r[0] for r in references], dtype=np.float64)
    z = np.array([r[1] for r in references], dtype=np.float64)
    if (z <= 0).any():
        raise ValueError("reference distances must be positive")
    A = np.stack([d, np.ones_like(d)], axis=1)
    (a, b), *_ = np.linalg.lstsq(A, 1.0 / z, rcond=None)
    return DepthCalibration(mode=CalibrationMode.AFFINE_DISPARITY, a=float(a), b=float(b), epsilon=epsilon)


def transform_to_world(p: np.ndarray, extrinsics: CameraExtrinsics) -> np.ndarray:
    """Camera-frame point to world frame: rotation @ p + translation."""
    p = np.asarray(p, dtype=np.float64)
    return extrinsics.rotation @ p + extrinsics.translation


# -- key=value config files --------------------------------------------------

def parse_config_text(text: str) -> dict[str, str]:
    """Parse UTF-8 key=value lines; '#' starts a comment, blank lines ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def read_config(path: str | os.PathLike) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read())


def intrinsics_from_config(cfg: dict[str, str]) -> CameraIntrinsics:
    return CameraIntrinsics(
        fx=float(cfg["fx"]),
        fy=float(cfg["fy"]),
        cx=float(cfg["cx"]),
        cy=float(cfg["cy"]),
        width=int(cfg["width"]),
        height=int(cfg["height"]),
    )


def extrinsics_from_config(cfg: dict[str, str]) -> CameraExtrinsics:
    rotation = np.array([float(v) for v in cfg["rotation"].split()], dtype=np.float64)
    translation = np.array([float(v) for v in cfg["translation"].split()], dtype=np.float64)
    if rotation.size != 9:
        raise ValueError(f"rotation needs 9 row-major values, got {rotation.size}")
    if translation.size != 3:
        raise ValueError(f"translation needs 3 values, got {translation.size}")
    return CameraExtrinsics(rotation=rotation.reshape(3, 3), translation=translation)


def calibration_from_config(cfg: dict[str, str]) -> DepthCalibration:
    mode = CalibrationMode(cfg.get("depth_mode", "AFFINE_DISPARITY"))
    return DepthCalibration(
        mode=mode,
        a=float(cfg.get("depth_a", 1.0)),
        b=float(cfg.get("depth_b", 0.0)),
        epsilon=float(cfg.get("depth_epsilon", 1e-6)),
    )


def config_lines(
    intrinsics: CameraIntrinsics,
    extrinsics: CameraExtrinsics,
    calibration: DepthCalibration,
) -> list[str]:
    """Render the camera block back to key=value lines."""
    rot = " ".join(repr(float(v)) for v in extrinsics.rotation.reshape(-1))
    trans = " ".join(repr(float(v)) for v in extrinsics.translation)
    return [
        f"fx={intrinsics.fx!r}",
        f"fy={intrinsics.fy!r}",
        f"cx={intrinsics.cx!r}",
        f"cy={intrinsics.cy!r}",
        f"width={intrinsics.width}",
        f"height={intrinsics.height}",
        f"rotation={rot}",
        f"translation={trans}",
        f"depth_mode={calibration.mode.value}",
        f"depth_a={calibration.a!r}",
        f"depth_b={calibration.b!r}",
        f"depth_epsilon={calibration.epsilon!r}",
    ]
