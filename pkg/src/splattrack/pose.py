"""6-DoF pose from a weighted point cloud via weighted PCA.

Translation is the weighted centroid. Rotation columns are the principal
axes of the weighted covariance, ordered by descending eigenvalue, with
det=+1 enforced and the eigenvector sign ambiguity resolved by temporal
continuity against the previous pose.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .fusion import Frame, WeightedPointCloud
from .rotations import geodesic_angle

DEGENERACY_RATIO = 0.05


class ZeroTotalWeight(ValueError):
    """Cloud has no weight to normalize by."""


class AsymmetricInput(ValueError):
    """Covariance input is not symmetric within 1e-9."""


class NonFiniteInput(ValueError):
    """Covariance input contains NaN or infinity."""


class PoseQuality(Enum):
    OK = "OK"
    DEGENERATE_ORIENTATION = "DEGENERATE_ORIENTATION"
    INVALID = "INVALID"


@dataclass(frozen=True)
class Pose6DoF:
    """Translation, rotation, and principal extents of a tracked body.

    extents are the covariance eigenvalues in m^2, descending. INVALID
    poses come from empty or zero-weight clouds and carry identity
    rotation and zero translation.
    """

    translation: np.ndarray = field(repr=False)
    rotation: np.ndarray = field(repr=False)
    extents: np.ndarray = field(repr=False)
    quality: PoseQuality = PoseQuality.OK
    timestamp: float = 0.0
    frame: Frame = Frame.CAMERA

    def __post_init__(self) -> None:
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        e = np.asarray(self.extents, dtype=np.float64).reshape(3)
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-6, rtol=0):
            raise ValueError("rotation is not orthonormal within 1e-6")
        if abs(np.linalg.det(r) - 1.0) > 1e-6:
            raise ValueError(f"rotation determinant {np.linalg.det(r)} != +1")
        if (np.diff(e) > 1e-12).any():
            raise ValueError(f"extents must be descending, got {e}")
        if (e < -1e-12).any():
            raise ValueError(f"extents must be non-negative, got {e}")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "extents", np.maximum(e, 0.0))

    @classmethod
    def invalid(cls, timestamp: float = 0.0, frame: Frame = Frame.CAMERA) -> "Pose6DoF":
        return cls(
            translation=np.zeros(3),
            rotation=np.eye(3),
            extents=np.zeros(3),
            quality=PoseQuality.INVALID,
            timestamp=timestamp,
            frame=frame,
        )

    @property
    def is_valid(self) -> bool:
        return self.quality is not PoseQuality.INVALID

    def dominant_axis(self) -> np.ndarray:
        return self.rotation[:, 0]


def weighted_centroid(cloud: WeightedPointCloud) -> np.ndarray:
    """(sum_i w_i p_i) / (sum_i w_i)."""
    total = cloud.total_weight
    if total <= 0:
        raise ZeroTotalWeight(f"total weight {total}")
    return (cloud.weights[:, None] * cloud.points).sum(axis=0) / total


def weighted_covariance(cloud: WeightedPointCloud, centroid: np.ndarray) -> np.ndarray:
    """sum_i w_i (p_i - c)(p_i - c)^T / sum_i w_i.

    No Bessel correction: the normalizer is the plain weight total.
    """
    total = cloud.total_weight
    if total <= 0:
        raise ZeroTotalWeight(f"total weight {total}")
    d = cloud.points - np.asarray(centroid, dtype=np.float64)
    cov = (cloud.weights[:, None] * d).T @ d / total
    return 0.5 * (cov + cov.T)


def principal_axes(
    cov: np.ndarray, rho: float = DEGENERACY_RATIO
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Eigen-decompose a symmetric PSD 3x3 into (rotation, eigenvalues, degenerate).

    Columns of the rotation are unit eigenvectors ordered by descending
    eigenvalue; det=+1 is enforced by flipping the third column. The
    degenerate flag is set when adjacent eigenvalues are separated by less
    than rho times the largest (orientation poorly constrained), or when
    the spectrum vanishes entirely.
    """
    cov = np.asarray(cov, dtype=np.float64).reshape(3, 3)
    if not np.isfinite(cov).all():
        raise NonFiniteInput("covariance has non-finite entries")
    if not np.allclose(cov, cov.T, atol=1e-9, rtol=0):
        raise AsymmetricInput("covariance not symmetric within 1e-9")
    eigvals, eigvecs = np.linalg.eigh(0.5 * (cov + cov.T))
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    if np.linalg.det(eigvecs) < 0:
        eigvecs[:, 2] = -eigvecs[:, 2]
    lead = eigvals[0]
    degenerate = (
        lead <= 0.0
        or (eigvals[0] - eigvals[1]) < rho * lead
        or (eigvals[1] - eigvals[2]) < rho * lead
    )
    return eigvecs, eigvals, bool(degenerate)


_SIGN_CHOICES = (
    (1.0, 1.0, 1.0),
    (1.0, -1.0, -1.0),
    (-1.0, 1.0, -1.0),
    (-1.0, -1.0, 1.0),
)


def _disambiguate_signs(rotation: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Pick, among the four proper-rotation column sign assignments, the one
    closest to the reference in geodesic angle."""
    best = None
    best_angle = np.inf
    for signs in _SIGN_CHOICES:
        cand = rotation * np.array(signs)
        angle = geodesic_angle(reference, cand)
        if angle < best_angle:
            best_angle = angle
            best = cand
    return best


def estimate_pose(
    cloud: WeightedPointCloud,
    previous: Pose6DoF | None = None,
    timestamp: float = 0.0,
    rho: float = DEGENERACY_RATIO,
) -> Pose6DoF:
    """Weighted-PCA pose: centroid translation, principal-axes rotation.

    Empty or zero-weight clouds yield quality=INVALID rather than an error
    so the tracker can treat them as missed detections.
    """
    if len(cloud) == 0 or not cloud.valid:
        return Pose6DoF.invalid(timestamp=timestamp, frame=cloud.frame)
    centroid = weighted_centroid(cloud)
    cov = weighted_covariance(cloud, centroid)
    rotation, eigvals, degenerate = principal_axes(cov, rho=rho)
    reference = previous.rotation if previous is not None else np.eye(3)
    rotation = _disambiguate_signs(rotation, reference)
    quality = PoseQuality.DEGENERATE_ORIENTATION if degenerate else PoseQuality.OK
    return Pose6DoF(
        translation=centroid,
        rotation=rotation,
        extents=np.maximum(eigvals, 0.0),
        quality=quality,
        timestamp=timestamp,
        frame=cloud.frame,
    )


def pose_to_world(pose: Pose6DoF, extrinsics) -> Pose6DoF:
    """Re-express a camera-frame pose in the world frame."""
    if pose.frame is Frame.WORLD:
        return pose
    if not pose.is_valid:
        return Pose6DoF.invalid(timestamp=pose.timestamp, frame=Frame.WORLD)
    return Pose6DoF(
        translation=extrinsics.rotation @ pose.translation + extrinsics.translation,
        rotation=extrinsics.rotation @ pose.rotation,
        extents=pose.extents,
        quality=pose.quality,
        timestamp=pose.timestamp,
        frame=Frame.WORLD,
    )


def axis_alignment_angle(rotation: np.ndarray, reference_axis: np.ndarray) -> float:
    """Angle in radians between the dominant principal axis and a reference
    direction, ignoring the axis sign (PCA cannot observe it)."""
    axis = np.asarray(rotation)[:, 0]
    ref = np.asarray(reference_axis, dtype=np.float64)
    ref = ref / np.linalg.norm(ref)
    return float(np.arccos(np.clip(abs(float(axis @ ref)), 0.0, 1.0)))
