"""Camera model, calibration, and config parsing tests.

Backprojection expectations are computed by hand from the pinhole
equations; round-trip checks close the loop with the independent
forward projection in oracles.py.
"""

import numpy as np
import pytest

from splattrack import camera
from splattrack.rotations import random_rotation
from splattrack.zsr import Raster

from oracles import project_point

VGA = camera.CameraIntrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0, width=640, height=480)


def test_backproject_hand_values():
    # X = (400-320)*1.5/500 = 0.24, Y = (300-240)*1.5/500 = 0.18.
    p = camera.backproject(400.0, 300.0, 1.5, VGA)
    np.testing.assert_allclose(p, [0.24, 0.18, 1.5], rtol=0, atol=1e-15)


def test_backproject_principal_point_is_on_axis():
    p = camera.backproject(320.0, 240.0, 7.25, VGA)
    np.testing.assert_array_equal(p, [0.0, 0.0, 7.25])


def test_backproject_rejects_bad_depth():
    for z in (0.0, -1.0, np.nan, np.inf):
        with pytest.raises(camera.NonPositiveDepth):
            camera.backproject(10.0, 10.0, z, VGA)


def test_backproject_inverts_projection():
    rng = np.random.default_rng(11)
    for _ in range(200):
        x = float(rng.uniform(0, VGA.width - 1))
        y = float(rng.uniform(0, VGA.height - 1))
        z = float(rng.uniform(0.1, 50.0))
        p = camera.backproject(x, y, z, VGA)
        px, py = project_point(p, VGA.fx, VGA.fy, VGA.cx, VGA.cy)
        np.testing.assert_allclose([px, py], [x, y], rtol=0, atol=1e-9)


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        camera.CameraIntrinsics(fx=0.0, fy=500.0, cx=320.0, cy=240.0, width=640, height=480)
    with pytest.raises(ValueError):
        camera.CameraIntrinsics(fx=500.0, fy=500.0, cx=640.0, cy=240.0, width=640, height=480)


def test_extrinsics_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(50):
        ext = camera.CameraExtrinsics(
            rotation=random_rotation(rng), translation=rng.uniform(-5, 5, size=3)
        )
        p = rng.uniform(-10, 10, size=3)
        back = ext.inverse_transform(camera.transform_to_world(p, ext))
        np.testing.assert_allclose(back, p, rtol=0, atol=1e-12)


def test_extrinsics_rejects_non_rotation():
    with pytest.raises(ValueError):
        camera.CameraExtrinsics(rotation=np.eye(3) * 2.0, translation=np.zeros(3))
    with pytest.raises(ValueError):
        camera.CameraExtrinsics(rotation=np.diag([1.0, 1.0, -1.0]), translation=np.zeros(3))


def test_transform_to_world_hand_value():
    # 90 degree yaw about +z maps camera x to world y; then translate.
    ext = camera.CameraExtrinsics(
        rotation=np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
        translation=np.array([10.0, 0.0, 2.0]),
    )
    np.testing.assert_allclose(
        camera.transform_to_world(np.array([1.0, 0.0, 0.0]), ext), [10.0, 1.0, 2.0], atol=1e-15
    )


def _calibrated(mode, values, **kw):
    cal = camera.DepthCalibration(mode=mode, **kw)
    return camera.depth_to_metric(Raster.from_array(np.array(values)), cal).plane()


def test_affine_disparity_hand_values():
    # z = 1/(a*d + b): a=2, b=0.5, d=0.75 -> 1/2.
    z = _calibrated(camera.CalibrationMode.AFFINE_DISPARITY, [[0.75]], a=2.0, b=0.5)
    np.testing.assert_allclose(z, [[0.5]], rtol=1e-7)


def test_affine_disparity_clamps_denominator():
    # a*d + b = -1 clamps to epsilon, giving the far-limit depth 1/epsilon.
    z = _calibrated(camera.CalibrationMode.AFFINE_DISPARITY, [[-1.0]], a=1.0, b=0.0, epsilon=1e-6)
    np.testing.assert_allclose(z, [[1e6]], rtol=1e-6)


def test_affine_depth_and_identity():
    z = _calibrated(camera.CalibrationMode.AFFINE_DEPTH, [[2.0, -1.0]], a=0.5, b=0.25)
    np.testing.assert_allclose(z[0, 0], 1.25, rtol=1e-7)
    assert np.isnan(z[0, 1])  # 0.5*(-1)+0.25 < 0 -> no depth
    z = _calibrated(camera.CalibrationMode.IDENTITY, [[3.0, 0.0]])
    assert z[0, 0] == 3.0 and np.isnan(z[0, 1])


def test_nan_input_stays_nan():
    z = _calibrated(camera.CalibrationMode.AFFINE_DISPARITY, [[np.nan]], a=1.0, b=0.0)
    assert np.isnan(z[0, 0])


def test_depth_to_metric_requires_single_channel():
    with pytest.raises(camera.ChannelMismatch):
        camera.depth_to_metric(
            Raster.from_array(np.zeros((2, 2, 3))), camera.DepthCalibration.identity()
        )


def test_disparity_validation():
    with pytest.raises(ValueError):
        camera.DepthCalibration(mode=camera.CalibrationMode.AFFINE_DISPARITY, a=-1.0)


def test_fit_disparity_exact_two_pairs():
    # 1/z = 2*d + 0.1 holds exactly for (0.2, 2.0) and (0.45, 1.0).
    cal = camera.fit_disparity_calibration([(0.2, 2.0), (0.45, 1.0)])
    assert cal.mode is camera.CalibrationMode.AFFINE_DISPARITY
    np.testing.assert_allclose([cal.a, cal.b], [2.0, 0.1], rtol=0, atol=1e-9)


def test_fit_disparity_recovers_noiseless_model():
    rng = np.random.default_rng(19)
    for _ in range(20):
        a = float(rng.uniform(0.5, 3.0))
        b = float(rng.uniform(0.0, 0.5))
        d = rng.uniform(0.1, 1.0, size=6)
        refs = [(float(di), float(1.0 / (a * di + b))) for di in d]
        cal = camera.fit_disparity_calibration(refs)
        np.testing.assert_allclose([cal.a, cal.b], [a, b], rtol=0, atol=1e-9)


def test_fit_disparity_needs_two_pairs():
    with pytest.raises(ValueError):
        camera.fit_disparity_calibration([(0.5, 2.0)])
    with pytest.raises(ValueError):
        camera.fit_disparity_calibration([(0.5, 2.0), (0.6, -1.0)])


def test_config_parse_comments_and_blanks():
    cfg = camera.parse_config_text("# lead\nfx = 520.0\n\nwidth=640  # trail\n")
    assert cfg == {"fx": "520.0", "width": "640"}


def test_config_rejects_bare_line():
    with pytest.raises(ValueError):
        camera.parse_config_text("fx 520.0\n")


def test_config_lines_round_trip():
    ext = camera.CameraExtrinsics(
        rotation=np.diag([1.0, -1.0, -1.0]), translation=np.array([0.0, 0.0, 20.0])
    )
    cal = camera.DepthCalibration(mode=camera.CalibrationMode.AFFINE_DISPARITY, a=2.0, b=0.1)
    text = "\n".join(camera.config_lines(VGA, ext, cal))
    cfg = camera.parse_config_text(text)
    intr = camera.intrinsics_from_config(cfg)
    assert intr == VGA
    ext2 = camera.extrinsics_from_config(cfg)
    np.testing.assert_array_equal(ext2.rotation, ext.rotation)
    np.testing.assert_array_equal(ext2.translation, ext.translation)
    cal2 = camera.calibration_from_config(cfg)
    assert (cal2.mode, cal2.a, cal2.b, cal2.epsilon) == (cal.mode, cal.a, cal.b, cal.epsilon)
