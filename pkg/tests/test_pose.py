"""Weighted-PCA pose estimation tests.

Centroid and covariance are checked against pure-Python accumulation
loops, the eigendecomposition against a from-scratch Jacobi solver, and
full pose recovery against clouds whose moments are known in closed
form (symmetric lattices rotated by a known rotation).
"""

import numpy as np
import pytest

from splattrack import pose
from splattrack.camera import CameraExtrinsics
from splattrack.fusion import Frame, WeightedPointCloud
from splattrack.rotations import geodesic_angle, random_rotation, rotation_z

from oracles import centroid_loops, covariance_loops, jacobi_eigh

POINTS = np.array([[1, 2, 3], [4, 5, 6], [7, 8, 10], [2, 1, 0]], dtype=float)
WEIGHTS = np.array([0.5, 1.0, 0.25, 0.75])


def _cloud(points, weights, frame=Frame.CAMERA):
    return WeightedPointCloud(points=np.asarray(points, float), weights=weights, frame=frame)


def test_centroid_frozen_hand_value():
    # Loop oracle gives exactly (3.1, 3.5, 4.0) for these points/weights.
    c = pose.weighted_centroid(_cloud(POINTS, WEIGHTS))
    np.testing.assert_allclose(c, [3.1, 3.5, 4.0], rtol=0, atol=1e-12)


def test_covariance_frozen_hand_value():
    cloud = _cloud(POINTS, WEIGHTS)
    cov = pose.weighted_covariance(cloud, pose.weighted_centroid(cloud))
    want = [[3.09, 3.75, 4.8], [3.75, 5.25, 7.2], [4.8, 7.2, 10.2]]
    np.testing.assert_allclose(cov, want, rtol=0, atol=1e-12)


def test_moments_match_loop_oracle():
    rng = np.random.default_rng(23)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        pts = rng.uniform(-10, 10, size=(n, 3))
        w = rng.uniform(0.01, 1.0, size=n)
        cloud = _cloud(pts, w)
        c = pose.weighted_centroid(cloud)
        np.testing.assert_allclose(c, centroid_loops(pts, w), rtol=1e-12, atol=1e-12)
        cov = pose.weighted_covariance(cloud, c)
        np.testing.assert_allclose(cov, covariance_loops(pts, w, c), rtol=1e-10, atol=1e-12)


def test_covariance_has_no_bessel_correction():
    # Two unit-weight points at +-1 on x: population variance is 1, not 2.
    cloud = _cloud([[1, 0, 0], [-1, 0, 0]], [1.0, 1.0])
    cov = pose.weighted_covariance(cloud, pose.weighted_centroid(cloud))
    assert cov[0, 0] == 1.0


def test_zero_total_weight_raises():
    with pytest.raises(pose.ZeroTotalWeight):
        pose.weighted_centroid(_cloud([[1, 2, 3]], [0.0]))


def test_principal_axes_diagonal():
    rot, vals, degenerate = pose.principal_axes(np.diag([9.0, 4.0, 1.0]))
    np.testing.assert_array_equal(vals, [9.0, 4.0, 1.0])
    np.testing.assert_allclose(np.abs(rot), np.eye(3), atol=1e-15)
    assert np.linalg.det(rot) == pytest.approx(1.0, abs=1e-12)
    assert not degenerate


def test_principal_axes_matches_jacobi_oracle():
    rng = np.random.default_rng(31)
    for _ in range(100):
        r = random_rotation(rng)
        lam = np.sort(rng.uniform(0.1, 10.0, size=3))[::-1]
        cov = r @ np.diag(lam) @ r.T
        cov = 0.5 * (cov + cov.T)
        rot, vals, _ = pose.principal_axes(cov)
        jvals, jvecs = jacobi_eigh(cov)
        np.testing.assert_allclose(vals, jvals, rtol=1e-9, atol=1e-12)
        # Columns agree up to sign when the spectrum is simple.
        if lam[0] - lam[1] > 1e-3 and lam[1] - lam[2] > 1e-3:
            dots = np.abs(np.einsum("ij,ij->j", rot, np.array(jvecs)))
            np.testing.assert_allclose(dots, 1.0, atol=1e-6)


def test_degeneracy_flags():
    # Leading pair too close: 1 - 0.96 < 0.05 * 1.
    assert pose.principal_axes(np.diag([1.0, 0.96, 0.5]))[2]
    # Trailing pair too close: 0.5 - 0.48 < 0.05.
    assert pose.principal_axes(np.diag([1.0, 0.5, 0.48]))[2]
    # Vanished spectrum.
    assert pose.principal_axes(np.zeros((3, 3)))[2]
    # Gaps exactly at the threshold do not trip the strict inequality.
    assert not pose.principal_axes(np.diag([1.0, 0.95, 0.5]))[2]


def test_principal_axes_input_validation():
    bad = np.eye(3)
    bad2 = bad.copy()
    bad2[0, 1] = 0.5
    with pytest.raises(pose.AsymmetricInput):
        pose.principal_axes(bad2)
    with pytest.raises(pose.NonFiniteInput):
        pose.principal_axes(np.full((3, 3), np.nan))


def test_sign_choice_tracks_reference():
    base = rotation_z(0.4)
    for signs in pose._SIGN_CHOICES:
        variant = base * np.array(signs)
        picked = pose._disambiguate_signs(base, variant)
        np.testing.assert_array_equal(picked, variant)
        assert np.linalg.det(picked) == pytest.approx(1.0, abs=1e-12)


def _lattice_cloud(rotation, translation):
    # Symmetric 3x3x3 lattice scaled by (3, 2, 1): moments are exactly
    # diag(6, 8/3, 2/3) and the centroid is the translation.
    g = np.array([-1.0, 0.0, 1.0])
    pts = np.stack(np.meshgrid(3 * g, 2 * g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    pts = pts @ rotation.T + translation
    return _cloud(pts, np.ones(len(pts)))


def test_estimate_pose_recovers_lattice():
    rng = np.random.default_rng(41)
    for _ in range(25):
        r = random_rotation(rng)
        t = rng.uniform(-5, 5, size=3)
        est = pose.estimate_pose(_lattice_cloud(r, t))
        assert est.quality is pose.PoseQuality.OK
        np.testing.assert_allclose(est.translation, t, rtol=0, atol=1e-12)
        np.testing.assert_allclose(est.extents, [6.0, 8.0 / 3.0, 2.0 / 3.0], rtol=1e-12)
        # arccos flattens near 0; one ulp of dot-product rounding is ~1.5e-8 rad.
        assert pose.axis_alignment_angle(est.rotation, r[:, 0]) < 1e-6


def test_estimate_pose_continuity_across_flips():
    # Re-estimating with the previous pose as reference keeps the same
    # sign choice instead of jumping to a mirrored frame.
    r = rotation_z(1.0)
    first = pose.estimate_pose(_lattice_cloud(r, np.zeros(3)))
    again = pose.estimate_pose(_lattice_cloud(r, np.zeros(3)), previous=first)
    np.testing.assert_allclose(again.rotation, first.rotation, atol=1e-12)
    assert geodesic_angle(first.rotation, again.rotation) < 1e-6


def test_estimate_pose_empty_is_invalid():
    est = pose.estimate_pose(WeightedPointCloud.empty(), timestamp=2.5)
    assert est.quality is pose.PoseQuality.INVALID
    assert not est.is_valid
    assert est.timestamp == 2.5


def test_estimate_pose_near_cylinder_is_degenerate():
    # Nearly equal leading spreads (6 vs 5.80) leave the dominant axis
    # unconstrained: the gap 0.197 is under 0.05 * 6.
    g = np.array([-1.0, 0.0, 1.0])
    pts = np.stack(np.meshgrid(3 * g, 2.95 * g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    est = pose.estimate_pose(_cloud(pts, np.ones(len(pts))))
    assert est.quality is pose.PoseQuality.DEGENERATE_ORIENTATION


def test_pose_validation():
    with pytest.raises(ValueError):
        pose.Pose6DoF(
            translation=np.zeros(3),
            rotation=np.eye(3) * 1.1,
            extents=np.array([3.0, 2.0, 1.0]),
            quality=pose.PoseQuality.OK,
            timestamp=0.0,
            frame=Frame.CAMERA,
        )
    with pytest.raises(ValueError):
        pose.Pose6DoF(
            translation=np.zeros(3),
            rotation=np.eye(3),
            extents=np.array([1.0, 2.0, 3.0]),  # must be descending
            quality=pose.PoseQuality.OK,
            timestamp=0.0,
            frame=Frame.CAMERA,
        )


def test_pose_to_world_hand_value():
    # Overhead camera looking straight down from z=20.
    ext = CameraExtrinsics(rotation=np.diag([1.0, -1.0, -1.0]), translation=np.array([0.0, 0.0, 20.0]))
    cam = pose.Pose6DoF(
        translation=np.array([0.5, 0.2, 19.0]),
        rotation=np.eye(3),
        extents=np.array([3.0, 2.0, 1.0]),
        quality=pose.PoseQuality.OK,
        timestamp=1.0,
        frame=Frame.CAMERA,
    )
    world = pose.pose_to_world(cam, ext)
    assert world.frame is Frame.WORLD
    np.testing.assert_allclose(world.translation, [0.5, -0.2, 1.0], atol=1e-12)
    np.testing.assert_allclose(world.rotation, np.diag([1.0, -1.0, -1.0]), atol=1e-15)
    assert world.timestamp == 1.0


def test_pose_to_world_passes_world_through():
    ext = CameraExtrinsics.identity()
    world = pose.Pose6DoF(
        translation=np.zeros(3),
        rotation=np.eye(3),
        extents=np.array([1.0, 1.0, 1.0]),
        quality=pose.PoseQuality.OK,
        timestamp=0.0,
        frame=Frame.WORLD,
    )
    assert pose.pose_to_world(world, ext) is world


def test_axis_alignment_ignores_sign():
    assert pose.axis_alignment_angle(np.eye(3), np.array([-1.0, 0.0, 0.0])) == 0.0
    angle = pose.axis_alignment_angle(rotation_z(0.25), np.array([1.0, 0.0, 0.0]))
    assert angle == pytest.approx(0.25, abs=1e-12)
