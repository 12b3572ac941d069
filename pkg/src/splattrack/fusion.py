"""Monte-Carlo sample fusion: per-pixel confidence maps and weighted point clouds.

N segmentation logit rasters from repeated stochastic forward passes are
fused into one confidence map by averaging the sigmoid of each sample.
Confident pixels with valid depth become a 3-D point cloud whose weights
are the per-pixel confidences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .camera import CameraIntrinsics
from .zsr import Raster


class EmptyStack(ValueError):
    """LogitStack needs at least one sample."""


class DimensionMismatch(ValueError):
    """Rasters in one operation must share dimensions."""


class InsufficientSamples(ValueError):
    """Variance needs at least two samples."""


class Frame(Enum):
    CAMERA = "CAMERA"
    WORLD = "WORLD"


def sigmoid(t: np.ndarray) -> np.ndarray:
    """Elementwise logistic function, branch form: no overflow for any |t|."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    out[~pos] = et / (1.0 + et)
    return out


@dataclass(frozen=True)
class LogitStack:
    """N single-channel logit rasters of identical size, plus the text prompt
    the segmentation backend was conditioned on."""

    samples: tuple[Raster, ...]
    prompt: str = ""

    def __post_init__(self) -> None:
        if len(self.samples) == 0:
            raise EmptyStack("logit stack has no samples")
        w, h = self.samples[0].width, self.samples[0].height
        for i, s in enumerate(self.samples):
            if s.channels != 1:
                raise DimensionMismatch(f"sample {i} has {s.channels} channels")
            if s.width != w or s.height != h:
                raise DimensionMismatch(
                    f"sample {i} is {s.width}x{s.height}, expected {w}x{h}"
                )
            if not np.isfinite(s.data).all():
                raise ValueError(f"sample {i} has non-finite logits")
        object.__setattr__(self, "samples", tuple(self.samples))

    @classmethod
    def from_multichannel(cls, raster: Raster, prompt: str = "") -> "LogitStack":
        """Split an N-channel raster into N single-channel samples."""
        planes = [Raster.from_array(raster.data[:, :, i]) for i in range(raster.channels)]
        return cls(samples=tuple(planes), prompt=prompt)

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def width(self) -> int:
        return self.samples[0].width

    @property
    def height(self) -> int:
        return self.samples[0].height


@dataclass(frozen=True)
class ConfidenceMap:
    raster: Raster

    def __post_init__(self) -> None:
        if self.raster.channels != 1:
            raise DimensionMismatch(f"confidence map has {self.raster.channels} channels")
        vals = self.raster.data
        if not np.isfinite(vals).all() or (vals < 0).any() or (vals > 1).any():
            raise ValueError("confidence values must lie in [0, 1]")

    def plane(self) -> np.ndarray:
        return self.raster.plane()


@dataclass(frozen=True)
class WeightedPointCloud:
    """3-D points with confidence weights. May be empty; a cloud is valid
    for pose estimation only when its total weight is positive."""

    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    frame: Frame = Frame.CAMERA

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if pts.shape[0] != w.shape[0]:
            raise ValueError(f"{pts.shape[0]} points but {w.shape[0]} weights")
        if w.size and ((w < 0).any() or (w > 1).any()):
            raise ValueError("weights must lie in [0, 1]")
        if pts.size and not np.isfinite(pts).all():
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @property
    def valid(self) -> bool:
        return self.total_weight > 0

    @classmethod
    def empty(cls, frame: Frame = Frame.CAMERA) -> "WeightedPointCloud":
        return cls(points=np.zeros((0, 3)), weights=np.zeros(0), frame=frame)


def fuse_mc_samples(stack: LogitStack) -> ConfidenceMap:
    """Average of per-sample sigmoids: conf = (1/N) * sum_i sigmoid(logits_i)."""
    acc = np.zeros((stack.height, stack.width), dtype=np.float64)
    for s in stack.samples:
        acc += sigmoid(s.plane())
    conf = acc / stack.n
    # Exact mean of values in [0,1] stays in [0,1]; clip guards float32 rounding.
    return ConfidenceMap(Raster.from_array(np.clip(conf, 0.0, 1.0)))


def fuse_variance(stack: LogitStack) -> Raster:
    """Unbiased per-pixel sample variance of the sigmoided logits."""
    if stack.n < 2:
        raise InsufficientSamples(f"variance needs N >= 2, got {stack.n}")
    sigs = np.stack([sigmoid(s.plane()) for s in stack.samples])
    var = sigs.var(axis=0, ddof=1)
    return Raster.from_array(var)


def extract_cloud(
    conf: ConfidenceMap,
    depth: Raster,
    intrinsics: CameraIntrinsics,
    tau: float = 0.5,
) -> WeightedPointCloud:
    """Back-project every pixel with conf >= tau and finite positive depth.

    Points are camera-frame, ordered row-major by pixel. tau=0 keeps all
    confident-or-not pixels that have usable depth.
    """
    if not (0 <= tau < 1):
        raise ValueError(f"tau must lie in [0, 1), got {tau}")
    c = conf.plane()
    if depth.channels != 1:
        raise DimensionMismatch(f"depth raster has {depth.channels} channels")
    z = depth.plane()
    if c.shape != z.shape:
        raise DimensionMismatch(f"confidence {c.shape} vs depth {z.shape}")
    if c.shape != (intrinsics.height, intrinsics.width):
        raise DimensionMismatch(
            f"rasters {c.shape} vs camera {intrinsics.height}x{intrinsics.width}"
        )
    keep = (c >= tau) & np.isfinite(z) & (z > 0)
    rows, cols = np.nonzero(keep)
    zk = z[rows, cols].astype(np.float64)
    x = (cols - intrinsics.cx) * zk / intrinsics.fx
    y = (rows - intrinsics.cy) * zk / intrinsics.fy
    points = np.stack([x, y, zk], axis=1)
    return WeightedPointCloud(points=points, weights=c[rows, cols], frame=Frame.CAMERA)
