"""Synthetic scene renderer tests.

A box robot under known camera geometry gives closed-form expectations:
the face-on principal ray hits the near face at distance minus the z
half-extent, overhead rays hit the top face, and noiseless logits are
exactly the two class constants. Counter-based streams make every frame
reproducible in isolation.
"""

import json
import math

import numpy as np
import pytest

from splattrack import synth
from splattrack.camera import intrinsics_from_config, read_config
from splattrack.fusion import fuse_mc_samples
from splattrack.pose import axis_alignment_angle, estimate_pose
from splattrack.zsr import read_raster

from oracles import project_point


def test_facing_principal_ray_depth():
    # Box center 2 m ahead, half-extent 0.1 along the view axis: the ray
    # through the principal point enters the near face at 1.9 m.
    scn = synth.facing_scenario()
    depth, stack, pose = synth.render_frame(scn, 0)
    assert depth.plane()[240, 320] == pytest.approx(1.9, rel=1e-6)
    np.testing.assert_array_equal(pose.translation, [0.0, 0.0, 2.0])
    assert stack.n == scn.n_samples


def test_noiseless_logits_are_class_constants():
    scn = synth.facing_scenario(n_samples=3)
    depth, stack, _ = synth.render_frame(scn, 0)
    on = np.isfinite(depth.plane())
    for sample in stack.samples:
        plane = sample.plane()
        assert (plane[on] == synth.ROBOT_LOGIT).all()
        assert (plane[~on] == synth.BACKGROUND_LOGIT).all()


def test_overhead_top_face_depth():
    # Straight-down camera at 20 m; box top sits at z = 0.2, so every
    # robot pixel near nadir reads close to 19.8 m.
    scn = synth.overhead_scenario(n_frames=4)
    depth, _, pose = synth.render_frame(scn, 0)
    z = depth.plane()
    on = np.isfinite(z)
    assert 400 < on.sum() < 700  # 1.2x0.6 m face at 520 px focal, 20 m range
    assert z[on].min() >= 19.8 - 1e-5
    assert z[on].max() <= 20.0  # side-face entries bottom out at the floor plane
    assert pose.translation[2] == pytest.approx(0.1)


def test_render_is_deterministic_per_frame():
    scn = synth.overhead_scenario(n_frames=3, depth_sigma=0.01, logit_sigma=0.4, outlier_frac=0.1)
    d1, s1, _ = synth.render_frame(scn, 2)
    d2, s2, _ = synth.render_frame(scn, 2)
    assert d1.data.tobytes() == d2.data.tobytes()
    for a, b in zip(s1.samples, s2.samples):
        assert a.data.tobytes() == b.data.tobytes()


def test_frames_draw_from_distinct_streams():
    scn = synth.overhead_scenario(n_frames=3, depth_sigma=0.01)
    d0 = synth.render_frame(scn, 0)[0]
    d1 = synth.render_frame(scn, 1)[0]
    assert d0.data.tobytes() != d1.data.tobytes()


def test_frame_index_bounds():
    scn = synth.facing_scenario(n_frames=2)
    with pytest.raises(synth.IndexOutOfRange):
        synth.render_frame(scn, 2)
    with pytest.raises(synth.IndexOutOfRange):
        synth.render_frame(scn, -1)


def test_single_frame_estimate_within_budget():
    # One noiseless overhead frame: the fused cloud's pose must land
    # within 1% of range in translation and 1 degree on the long axis.
    scn = synth.overhead_scenario(n_frames=8)
    depth, stack, truth = synth.render_frame(scn, 3)
    conf = fuse_mc_samples(stack)
    z = depth.plane()
    c = conf.plane()
    keep = (c >= 0.5) & np.isfinite(z) & (z > 0)
    rows, cols = np.nonzero(keep)
    intr = scn.intrinsics
    zk = z[rows, cols].astype(np.float64)
    pts = np.stack(
        [(cols - intr.cx) * zk / intr.fx, (rows - intr.cy) * zk / intr.fy, zk], axis=1
    )
    est = estimate_pose(
        synth.WeightedPointCloud(points=pts, weights=c[rows, cols], frame=synth.Frame.CAMERA)
    )
    cam_range = 20.0 - truth.translation[2]
    truth_cam = scn.extrinsics.inverse_transform(truth.translation)
    # The visible shell is the top face: its centroid sits one z
    # half-extent nearer the camera than the box center.
    err = np.linalg.norm(est.translation - truth_cam)
    assert err < 0.01 * cam_range
    axis_cam = scn.extrinsics.rotation.T @ truth.rotation[:, 0]
    assert math.degrees(axis_alignment_angle(est.rotation, axis_cam)) < 1.0


def test_outlier_injection_counts_and_placement():
    scn = synth.overhead_scenario(n_frames=2, outlier_frac=0.2)
    pose = scn.trajectory[0]
    rng = synth._frame_rng(scn.seed, 0)
    depth, logits, robot_mask, outlier_mask = synth._render_arrays(scn, pose, rng)
    n_robot = int(robot_mask.sum())
    assert outlier_mask.sum() == round(0.2 / 0.8 * n_robot)
    assert not (robot_mask & outlier_mask).any()
    # Outliers read as confident robot in every sample and carry depth
    # within 2.5 half-extents of the box range.
    assert (logits[0][outlier_mask] == synth.ROBOT_LOGIT).all()
    d = depth[outlier_mask]
    center_range = 20.0 - pose.translation[2]
    assert (np.abs(d - center_range) <= 2.5 * 0.6 + 1e-9).all()
    # Placement stays inside the dilated bounding box of the silhouette.
    rows, cols = np.nonzero(robot_mask)
    span_r = rows.max() - rows.min() + 1
    span_c = cols.max() - cols.min() + 1
    orows, ocols = np.nonzero(outlier_mask)
    assert orows.min() >= rows.min() - span_r and orows.max() <= rows.max() + span_r
    assert ocols.min() >= cols.min() - span_c and ocols.max() <= cols.max() + span_c


def test_zero_outlier_frac_marks_nothing():
    scn = synth.facing_scenario(n_frames=1)
    _, _, _, outlier_mask = synth._render_arrays(
        scn, scn.trajectory[0], synth._frame_rng(0, 0)
    )
    assert not outlier_mask.any()


def test_ablation_weighting_beats_uniform():
    scn = synth.overhead_scenario(n_frames=4, outlier_frac=0.2, n_samples=4)
    weighted, uniform = synth.run_ablation(scn, trials=4)
    assert weighted < uniform
    assert weighted < 5.0  # down-weighted outliers barely move the axis


def test_ablation_trials_are_reproducible():
    scn = synth.overhead_scenario(n_frames=2, outlier_frac=0.15, n_samples=2)
    assert synth.run_ablation(scn, trials=2) == synth.run_ablation(scn, trials=2)


def test_write_scenario_layout(tmp_path):
    scn = synth.facing_scenario(seed=9, n_frames=2, n_samples=3)
    synth.write_scenario(scn, tmp_path)
    for i in range(2):
        assert (tmp_path / f"frame_{i:04d}_depth.zsr").exists()
        for j in range(3):
            assert (tmp_path / f"frame_{i:04d}_mc{j:02d}.zsr").exists()
    truth = [json.loads(line) for line in (tmp_path / "truth.jsonl").read_text().splitlines()]
    assert [r["frame"] for r in truth] == [0, 1]
    assert truth[0]["translation"] == [0.0, 0.0, 2.0]
    assert len(truth[0]["rotation"]) == 9
    assert truth[1]["t"] == pytest.approx(0.1)
    cfg = read_config(tmp_path / "scenario.cfg")
    assert intrinsics_from_config(cfg) == scn.intrinsics
    assert int(cfg["n_samples"]) == 3
    assert float(cfg["rate_hz"]) == 10.0
    # Written rasters reload bit-exactly against a fresh render.
    depth, stack, _ = synth.render_frame(scn, 1)
    assert read_raster(tmp_path / "frame_0001_depth.zsr").data.tobytes() == depth.data.tobytes()
    assert (
        read_raster(tmp_path / "frame_0001_mc02.zsr").data.tobytes()
        == stack.samples[2].data.tobytes()
    )


def test_ghosted_trajectory_blinds_listed_frames():
    scn = synth.overhead_scenario(n_frames=5)
    blind = synth.ghosted_trajectory(scn, range(1, 3))
    d0 = synth.render_frame(blind, 0)[0]
    assert np.isfinite(d0.plane()).any()
    for i in (1, 2):
        di = synth.render_frame(blind, i)[0]
        assert not np.isfinite(di.plane()).any()
    d3 = synth.render_frame(blind, 3)[0]
    assert np.isfinite(d3.plane()).any()


def test_mean_confidence():
    conf = np.array([[0.2, 0.8], [0.6, 0.4]])
    keep = np.array([[True, True], [False, False]])
    assert synth.mean_confidence(conf, keep) == pytest.approx(0.5)
    assert synth.mean_confidence(conf, np.zeros((2, 2), dtype=bool)) == 0.0


def test_trajectory_projects_inside_frame():
    # Every ground-truth box center stays visible to the overhead camera.
    scn = synth.overhead_scenario(n_frames=12)
    intr = scn.intrinsics
    for pose in scn.trajectory:
        p_cam = scn.extrinsics.inverse_transform(pose.translation)
        px, py = project_point(p_cam, intr.fx, intr.fy, intr.cx, intr.cy)
        assert 0 <= px < intr.width and 0 <= py < intr.height


def test_scenario_validation():
    with pytest.raises(ValueError):
        synth.overhead_scenario(outlier_frac=1.0)
    with pytest.raises(ValueError):
        synth.facing_scenario(n_samples=0)
