"""Small rotation-matrix helpers shared by pose estimation and tracking."""

from __future__ import annotations

import numpy as np


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix for a unit axis and angle in radians."""
    u = np.asarray(axis, dtype=np.float64)
    u = u / np.linalg.norm(u)
    k = np.array([[0, -u[2], u[1]], [u[2], 0, -u[0]], [-u[1], u[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


def rotation_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def geodesic_angle(ra: np.ndarray, rb: np.ndarray) -> float:
    """Angle in radians of the rotation taking ra to rb."""
    tr = np.trace(ra.T @ rb)
    return float(np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0)))


def axis_angle_from_matrix(r: np.ndarray) -> tuple[np.ndarray, float]:
    """Inverse of Rodrigues: unit axis and angle in [0, pi].

    Angle 0 returns an arbitrary axis. Near pi the axis comes from the
    dominant diagonal entry of (R + I)/2 for stability.
    """
    angle = geodesic_angle(np.eye(3), r)
    if angle < 1e-12:
        return np.array([1.0, 0.0, 0.0]), 0.0
    if angle > np.pi - 1e-6:
        m = (r + np.eye(3)) / 2.0
        k = int(np.argmax(np.diag(m)))
        axis = m[:, k] / np.sqrt(max(m[k, k], 1e-18))
        axis = axis / np.linalg.norm(axis)
        return axis, angle
    axis = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    axis = axis / (2.0 * np.sin(angle))
    return axis / np.linalg.norm(axis), angle


def interpolate(ra: np.ndarray, rb: np.ndarray, fraction: float) -> np.ndarray:
    """Point a given fraction along the geodesic from ra to rb."""
    axis, angle = axis_angle_from_matrix(ra.T @ rb)
    return ra @ rotation_about_axis(axis, fraction * angle)


def quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) to a rotation matrix."""
    w, x, y, z = np.asarray(q, dtype=np.float64)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed rotation via QR of a Gaussian matrix."""
    m = rng.standard_normal((3, 3))
    q, r = np.linalg.qr(m)
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 2] = -q[:, 2]
    return q
