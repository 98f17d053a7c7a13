"""Radiometric calibration of VIS and UVF textures against a reflectance target.

VIS: per-channel division by a normalization vector derived from the median
of a near-perfect Lambertian target patch, yielding illumination-independent
reflectance. UVF: subtraction of the stray visible light reflected by the
surface, estimated on the same (non-fluorescent) target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .imaging import BandMeta, ChannelStats, Texture

DEFAULT_NOMINAL_REFLECTANCE = 0.99  # manufacturer value for the target


class CalibrationError(ValueError):
    """Inconsistent calibration inputs (misplaced patch, channel mismatch)."""


@dataclass(frozen=True)
class NormVector:
    """Per-channel normalization: measured target median over nominal reflectance."""

    r_norm: np.ndarray  # (C,) > 0
    nominal: np.ndarray  # (C,) in (0, 1]


@dataclass(frozen=True)
class StrayLight:
    """Per-channel stray visible light measured on the target under UV light."""

    s_target: np.ndarray  # (C,) >= 0


@dataclass(frozen=True)
class ClampReport:
    """Negative-result clamping summary for UVF calibration."""

    clamped_values: int
    max_undershoot: float  # largest |negative| seen before clamping


def _as_channel_vector(values, channels: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(channels, float(arr))
    if arr.shape != (channels,):
        raise CalibrationError(
            f"{name} must be scalar or length {channels}, got shape {arr.shape}"
        )
    return arr


def compute_norm(target_stats: ChannelStats, nominal=DEFAULT_NOMINAL_REFLECTANCE) -> NormVector:
    """Per-channel ratio of the measured target median to its nominal reflectance.

    Raises:
        CalibrationError: Non-positive target median (patch misplaced), or
            nominal reflectance outside (0, 1].
    """
    target = np.asarray(target_stats.median, dtype=np.float64)
    nom = _as_channel_vector(nominal, target.size, "nominal reflectance")
    if (nom <= 0.0).any() or (nom > 1.0).any():
        raise CalibrationError(f"nominal reflectance must be in (0, 1], got {nom}")
    if (target <= 0.0).any():
        raise CalibrationError(
            f"target patch median must be positive, got {target}; "
            "check the patch rectangle placement"
        )
    return NormVector(r_norm=target / nom, nominal=nom)


def stray_from_stats(stats: ChannelStats) -> StrayLight:
    """Interpret a UVF target-patch median as the per-channel stray light."""
    s = np.asarray(stats.median, dtype=np.float64)
    if (s < 0.0).any():
        raise CalibrationError(f"stray light must be non-negative, got {s}")
    return StrayLight(s_target=s)


def calibrate_vis(acq: Texture, norm: NormVector) -> Texture:
    """Divide an acquired VIS texture by the normalization vector, per channel.

    Values above 1 (specular or brighter-than-target texels) are kept; the
    downstream angle measure is magnitude-robust anyway.
    """
    if norm.r_norm.size != acq.channels:
        raise CalibrationError(
            f"norm vector has {norm.r_norm.size} channels, texture has {acq.channels}"
        )
    data = acq.data / norm.r_norm
    return Texture(data, acq.meta)


def calibrate_uvf(
    fluor: Texture, stray: StrayLight, vis_calib: Texture
) -> tuple[Texture, ClampReport]:
    """Remove the reflected stray-light contribution from a UVF texture.

    Per texel and channel: fluorescence minus stray light scaled by the
    calibrated visible reflectance of the same (registered) texel. Negative
    results are measurement noise; they are clamped to 0 and reported.
    """
    if fluor.data.shape != vis_calib.data.shape:
        raise CalibrationError(
            f"UVF {fluor.data.shape} and calibrated VIS {vis_calib.data.shape} "
            "textures must be registered with identical shape"
        )
    if stray.s_target.size != fluor.channels:
        raise CalibrationError(
            f"stray light has {stray.s_target.size} channels, texture has {fluor.channels}"
        )
    raw = fluor.data - stray.s_target * vis_calib.data
    negative = raw < 0.0
    clamped = int(np.count_nonzero(negative))
    max_undershoot = float(-raw.min()) if clamped else 0.0
    out = np.where(negative, 0.0, raw)
    meta = BandMeta("UVF", fluor.meta.channels) if fluor.meta.modality == "UVF" else fluor.meta
    return Texture(out, meta), ClampReport(clamped, max_undershoot)


class ReflectanceCalibrator(BaseEstimator, TransformerMixin):
    """Estimator-style wrapper for reflectance normalization.

    fit() consumes the target patch pixels as an (n_samples, n_channels)
    array and derives the per-channel normalization from their median;
    transform() rescales pixel arrays of the same channel count.

    Parameters:
        nominal: Nominal target reflectance, scalar or per channel.
    """

    def __init__(self, nominal=DEFAULT_NOMINAL_REFLECTANCE):
        self.nominal = nominal

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        stats = ChannelStats(median=np.median(X, axis=0))
        norm = compute_norm(stats, self.nominal)
        self.norm_ = norm
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "norm_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise CalibrationError(
                f"expected {self.n_features_in_} channels, got {X.shape[1]}"
            )
        return X / self.norm_.r_norm
