import numpy as np
import pytest

from samtex.calibration import (
    CalibrationError,
    ClampReport,
    ReflectanceCalibrator,
    StrayLight,
    calibrate_uvf,
    calibrate_vis,
    compute_norm,
    stray_from_stats,
)
from samtex.imaging import ChannelStats, PatchRect, Texture, patch_stats


def tex(data, modality="VIS"):
    return Texture(np.asarray(data, dtype=np.float64), modality)


def stats(*medians):
    return ChannelStats(median=np.array(medians, dtype=np.float64))


def test_compute_norm_direct_arithmetic():
    norm = compute_norm(stats(0.5, 0.5, 0.5), 0.99)
    assert np.allclose(norm.r_norm, 0.5 / 0.99, rtol=0, atol=1e-16)


def test_compute_norm_identity_when_target_equals_nominal():
    norm = compute_norm(stats(0.99, 0.99, 0.99), 0.99)
    assert np.array_equal(norm.r_norm, [1.0, 1.0, 1.0])


def test_compute_norm_rejects_zero_target():
    with pytest.raises(CalibrationError, match="patch"):
        compute_norm(stats(0.0, 0.5, 0.5), 0.99)


def test_compute_norm_rejects_bad_nominal():
    with pytest.raises(CalibrationError, match="nominal"):
        compute_norm(stats(0.5, 0.5, 0.5), 1.2)
    with pytest.raises(CalibrationError, match="nominal"):
        compute_norm(stats(0.5, 0.5, 0.5), 0.0)


def test_calibrate_vis_patch_self_consistency():
    # a texture equal to the patch median everywhere calibrates to nominal
    t = tex(np.full((4, 4, 3), 0.5))
    norm = compute_norm(patch_stats(t, PatchRect(0, 0, 3, 3)), 0.99)
    out = calibrate_vis(t, norm)
    assert np.allclose(out.data, 0.99, rtol=1e-15)


def test_calibrate_vis_examples():
    norm = compute_norm(stats(0.5, 0.5, 0.5), 1.0)  # r_norm = (0.5, 0.5, 0.5)
    t = tex([[[0.25, 0.5, 0.75]]])
    out = calibrate_vis(t, norm)
    assert np.allclose(out.data[0, 0], [0.5, 1.0, 1.5], atol=0)
    zero = calibrate_vis(tex([[[0.0, 0.0, 0.0]]]), norm)
    assert (zero.data == 0).all()


def test_calibrate_vis_does_not_clamp_above_one():
    norm = compute_norm(stats(0.1, 0.1, 0.1), 1.0)
    out = calibrate_vis(tex([[[0.9, 0.9, 0.9]]]), norm)
    assert (out.data > 1.0).all()


def test_calibrate_vis_channel_mismatch():
    norm = compute_norm(stats(0.5), 0.99)
    with pytest.raises(CalibrationError, match="channels"):
        calibrate_vis(tex(np.ones((2, 2, 3))), norm)


def test_calibrate_vis_round_trip_within_one_ulp(rng):
    acq = tex(rng.uniform(0.0, 1.0, size=(16, 16, 3)))
    norm = compute_norm(stats(0.61, 0.52, 0.43), 0.99)
    out = calibrate_vis(acq, norm)
    back = out.data * norm.r_norm
    err = np.abs(back - acq.data)
    assert (err <= np.spacing(np.maximum(np.abs(back), np.abs(acq.data)))).all()


def test_calibrate_vis_homogeneity(rng):
    acq = rng.uniform(0.0, 1.0, size=(8, 8, 3))
    target = np.array([0.7, 0.6, 0.5])
    for c in (1e-3, 0.5, 7.0, 1e4):
        out1 = calibrate_vis(tex(acq), compute_norm(ChannelStats(target), 0.99))
        out2 = calibrate_vis(
            tex(acq * c), compute_norm(ChannelStats(target * c), 0.99)
        )
        assert np.allclose(out1.data, out2.data, rtol=1e-12, atol=0)


def test_calibrate_uvf_pure_stray_texel_is_zero():
    stray = StrayLight(np.array([0.02, 0.03, 0.01]))
    vis_calib = tex([[[1.0, 2.0, 3.0]]])
    fluor = tex(np.asarray([[[0.02 * 1.0, 0.03 * 2.0, 0.01 * 3.0]]]), "UVF")
    out, report = calibrate_uvf(fluor, stray, vis_calib)
    assert (out.data == 0).all()
    assert report.clamped_values == 0


def test_calibrate_uvf_black_surface_passes_through():
    stray = StrayLight(np.array([0.5, 0.5, 0.5]))
    fluor = tex([[[0.4, 0.2, 0.1]]], "UVF")
    out, _ = calibrate_uvf(fluor, stray, tex([[[0.0, 0.0, 0.0]]]))
    assert np.array_equal(out.data, fluor.data)


def test_calibrate_uvf_clamps_and_reports():
    stray = StrayLight(np.array([0.02, 0.02, 0.02]))
    fluor = tex([[[0.10, 0.10, 0.10]]], "UVF")
    vis_calib = tex([[[1.0, 2.0, 6.0]]])
    out, report = calibrate_uvf(fluor, stray, vis_calib)
    assert np.allclose(out.data[0, 0], [0.08, 0.06, 0.0], atol=1e-15)
    assert report.clamped_values == 1
    assert report.max_undershoot == pytest.approx(0.02, abs=1e-15)


def test_calibrate_uvf_zero_stray_is_identity(rng):
    fluor = tex(rng.uniform(0, 1, size=(5, 5, 3)), "UVF")
    vis_calib = tex(rng.uniform(0, 2, size=(5, 5, 3)))
    out, report = calibrate_uvf(fluor, StrayLight(np.zeros(3)), vis_calib)
    assert np.array_equal(out.data, fluor.data)
    assert report == ClampReport(0, 0.0)


def test_calibrate_uvf_dimension_mismatch():
    stray = StrayLight(np.zeros(3))
    with pytest.raises(CalibrationError, match="registered"):
        calibrate_uvf(tex(np.ones((2, 2, 3)), "UVF"), stray, tex(np.ones((3, 2, 3))))


def test_outputs_never_negative_or_nonfinite(rng):
    fluor = tex(rng.uniform(0, 0.2, size=(8, 8, 3)), "UVF")
    vis_calib = tex(rng.uniform(0, 3, size=(8, 8, 3)))
    stray = StrayLight(np.array([0.3, 0.3, 0.3]))
    out, _ = calibrate_uvf(fluor, stray, vis_calib)
    assert (out.data >= 0).all() and np.isfinite(out.data).all()


def test_stray_from_stats_validation():
    s = stray_from_stats(stats(0.1, 0.2, 0.3))
    assert np.array_equal(s.s_target, [0.1, 0.2, 0.3])


def test_reflectance_calibrator_estimator(rng):
    patch = rng.uniform(0.4, 0.6, size=(100, 3))
    cal = ReflectanceCalibrator(nominal=0.99).fit(patch)
    expected = np.median(patch, axis=0) / 0.99
    assert np.allclose(cal.norm_.r_norm, expected, atol=0)
    X = rng.uniform(0, 1, size=(10, 3))
    assert np.allclose(cal.transform(X), X / expected, atol=0)


def test_reflectance_calibrator_sklearn_compatible():
    from sklearn.base import clone

    cal = ReflectanceCalibrator(nominal=0.5)
    assert clone(cal).get_params() == {"nominal": 0.5}
    with pytest.raises(Exception):
        ReflectanceCalibrator().transform(np.ones((2, 3)))  # not fitted
