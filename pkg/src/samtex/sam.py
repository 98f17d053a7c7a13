"""Spectral angle mapping: per-texel angles to reference spectra, threshold
regions, multi-reference labeling, and overlays.

The angle between a texel's spectrum and a reference is
arccos(dot / (|u| |v|)) with the ratio clamped to [-1, 1] to absorb
floating-point rounding. Zero-magnitude spectra have no defined angle and
are marked UNDEFINED (NaN in memory, -1 on disk); classifying black texels
silently would be misleading.

All map-level operations accept a worker count and are bit-identical
regardless of it: rows are processed in fixed-size chunks whose per-texel
operation order never changes, only the thread executing each chunk does.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .cube import SpectralCube
from .imaging import read_pfm, write_pfm

DEFAULT_THETA_MAX = 0.15  # radians
UNCLASSIFIED = -1

MAGENTA = (255, 0, 255, 255)

_ROWS_PER_CHUNK = 32  # fixed: chunking must not depend on the worker count


class BandCountError(ValueError):
    """Spectral vector length does not match the cube."""


@dataclass(frozen=True)
class ReferenceSpectrum:
    """A labeled reference spectrum; must have non-zero magnitude."""

    label: str
    vector: np.ndarray

    def __post_init__(self):
        vec = np.ascontiguousarray(self.vector, dtype=np.float64)
        if vec.ndim != 1:
            raise ValueError(f"reference spectrum must be 1-D, got {vec.shape}")
        if not np.isfinite(vec).all():
            raise ValueError("reference spectrum contains NaN or Inf")
        if (vec < 0.0).any():
            raise ValueError("reference spectrum contains negative values")
        if not (vec > 0.0).any():
            raise ValueError(f"reference spectrum {self.label!r} has zero magnitude")
        vec.flags.writeable = False
        object.__setattr__(self, "vector", vec)


def spectral_angle(u, v) -> float:
    """Angle in radians between two spectra; NaN when either magnitude is 0.

    Symmetric, invariant under positive scaling of either argument, and
    always in [0, pi] when defined.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise BandCountError(f"length mismatch: {u.shape} vs {v.shape}")
    dot = 0.0
    nu2 = 0.0
    nv2 = 0.0
    for a, b in zip(u, v):
        dot += a * b
        nu2 += a * a
        nv2 += b * b
    # sqrt(nu2 * nv2) rather than sqrt(nu2) * sqrt(nv2): the product's
    # rounding stays within sqrt's half-ulp, so identical inputs give
    # cos = 1 and an angle of exactly 0. np.arccos keeps this scalar path
    # bitwise consistent with the map kernels.
    denom = math.sqrt(nu2 * nv2)
    if denom == 0.0:
        return math.nan
    return float(np.arccos(min(max(dot / denom, -1.0), 1.0)))


def _as_reference_vector(ref, n_bands: int) -> np.ndarray:
    vec = ref.vector if isinstance(ref, ReferenceSpectrum) else ReferenceSpectrum(
        "ref", np.asarray(ref, dtype=np.float64)
    ).vector
    if vec.size != n_bands:
        raise BandCountError(
            f"reference has {vec.size} bands, cube has {n_bands}"
        )
    return vec


def _angle_chunk(chunk: np.ndarray, ref: np.ndarray, ref_sq: float, out: np.ndarray):
    """Angles for a (rows, W, B) chunk into `out`, band-ascending accumulation.

    Mirrors spectral_angle operation for operation so map and scalar paths
    agree bitwise, including the sqrt(nu2 * nv2) denominator that makes
    self-angles exactly 0.
    """
    band0 = chunk[:, :, 0]
    dots = band0 * ref[0]
    sq = band0 * band0
    for b in range(1, chunk.shape[2]):
        band = chunk[:, :, b]
        dots += band * ref[b]
        sq += band * band
    sq *= ref_sq
    np.sqrt(sq, out=sq)
    with np.errstate(invalid="ignore", divide="ignore"):
        np.divide(dots, sq, out=dots)  # 0/0 -> NaN marks zero-magnitude texels
    np.clip(dots, -1.0, 1.0, out=dots)
    np.arccos(dots, out=out)


def _ref_sq(ref: np.ndarray) -> float:
    acc = 0.0
    for b in range(ref.size):
        acc += ref[b] * ref[b]
    return acc


def sam_map(cube: SpectralCube, ref, workers: int = 1) -> np.ndarray:
    """Per-texel spectral angle against one reference spectrum.

    Returns an (H, W) float64 map; invalid texels and zero-magnitude
    spectra are NaN. `workers` only distributes row chunks over threads,
    the result is bit-identical for any value.

    Args:
        cube: Source cube.
        ref: ReferenceSpectrum or plain vector of length cube.n_bands.
        workers: Thread count, >= 1.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    vec = _as_reference_vector(ref, cube.n_bands)
    ref_sq = _ref_sq(vec)
    h, w = cube.height, cube.width
    out = np.empty((h, w), dtype=np.float64)

    def run(r0: int):
        r1 = min(r0 + _ROWS_PER_CHUNK, h)
        _angle_chunk(cube.data[r0:r1], vec, ref_sq, out[r0:r1])
        out[r0:r1][~cube.valid[r0:r1]] = np.nan

    starts = range(0, h, _ROWS_PER_CHUNK)
    if workers == 1:
        for r0 in starts:
            run(r0)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    return out


def threshold_region(angles: np.ndarray, theta_max: float) -> np.ndarray:
    """Boolean mask of texels with a defined angle <= theta_max (inclusive)."""
    if theta_max < 0.0:
        raise ValueError(f"theta_max must be >= 0, got {theta_max}")
    angles = np.asarray(angles, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        return angles <= theta_max


def classify_multi(cube: SpectralCube, refs, theta_max: float, workers: int = 1) -> np.ndarray:
    """Label each texel with its minimum-angle reference, or UNCLASSIFIED.

    A texel gets the label index of the reference attaining the smallest
    angle, provided that angle is <= theta_max; exact ties resolve to the
    lowest reference index. Invalid and zero-magnitude texels stay
    UNCLASSIFIED.
    """
    refs = list(refs)
    if not refs:
        raise ValueError("need at least one reference spectrum")
    if theta_max < 0.0:
        raise ValueError(f"theta_max must be >= 0, got {theta_max}")
    stack = np.empty((len(refs), cube.height, cube.width), dtype=np.float64)
    for i, ref in enumerate(refs):
        stack[i] = sam_map(cube, ref, workers=workers)
    stack[np.isnan(stack)] = np.inf
    best = np.argmin(stack, axis=0).astype(np.int32)
    best_angle = np.min(stack, axis=0)
    labels = np.where(best_angle <= theta_max, best, np.int32(UNCLASSIFIED))
    return labels.astype(np.int32)


def connected_region(mask: np.ndarray, seed: tuple[int, int]) -> np.ndarray:
    """Restrict a region mask to the 8-connected component containing `seed`.

    Optional post-step for operators who want one contiguous patch instead
    of every spectrally similar texel; the core threshold region stays a
    pure per-texel predicate.
    """
    from scipy import ndimage

    mask = np.asarray(mask, dtype=bool)
    col, row = int(seed[0]), int(seed[1])
    if not (0 <= row < mask.shape[0] and 0 <= col < mask.shape[1]):
        raise ValueError(f"seed texel {seed} outside mask of shape {mask.shape}")
    if not mask[row, col]:
        return np.zeros_like(mask)
    labels, _count = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    return labels == labels[row, col]


def make_overlay(mask: np.ndarray, color=MAGENTA) -> np.ndarray:
    """RGBA overlay: masked texels get `color`, everything else transparent."""
    mask = np.asarray(mask, dtype=bool)
    rgba = np.asarray(color, dtype=np.uint8)
    if rgba.shape != (4,):
        raise ValueError(f"color must be RGBA, got {color!r}")
    out = np.zeros(mask.shape + (4,), dtype=np.uint8)
    out[mask] = rgba
    return out


# ---------------------------------------------------------------------------
# Persistence. Angle maps are single-channel PFMs with UNDEFINED written as
# -1 (angles are never negative); masks are 0/1; label maps store the label
# index with -1 for UNCLASSIFIED.


def save_angle_map(path, angles: np.ndarray) -> None:
    write_pfm(path, np.where(np.isnan(angles), -1.0, angles))


def load_angle_map(path) -> np.ndarray:
    raw = read_pfm(path).astype(np.float64)[:, :, 0]
    return np.where(raw < 0.0, np.nan, raw)


def save_mask(path, mask: np.ndarray) -> None:
    write_pfm(path, np.asarray(mask, dtype=bool).astype(np.float32))


def load_mask(path) -> np.ndarray:
    return read_pfm(path)[:, :, 0] > 0.5


def save_label_map(path, labels: np.ndarray) -> None:
    write_pfm(path, np.asarray(labels, dtype=np.int32).astype(np.float32))


def load_label_map(path) -> np.ndarray:
    return read_pfm(path)[:, :, 0].astype(np.int32)


# ---------------------------------------------------------------------------
# Estimator API


class SpectralAngleMapper(BaseEstimator, ClassifierMixin):
    """Minimum-angle spectral classifier over row-vector spectra.

    fit() takes the reference spectra as an (n_refs, n_bands) array (y, when
    given, supplies their labels); predict() labels each row of X with the
    nearest reference within `theta_max`, or -1. Composes with standard
    pipeline tooling via get_params/set_params.

    Parameters:
        theta_max: Inclusive angular threshold in radians.
    """

    def __init__(self, theta_max=DEFAULT_THETA_MAX):
        self.theta_max = theta_max

    def fit(self, X, y=None):
        if self.theta_max < 0.0:
            raise ValueError(f"theta_max must be >= 0, got {self.theta_max}")
        X = check_array(X, dtype=np.float64)
        norms = np.linalg.norm(X, axis=1)
        if (norms == 0.0).any():
            raise ValueError("reference spectra must have non-zero magnitude")
        self.references_ = X
        self.classes_ = np.arange(len(X)) if y is None else np.asarray(y)
        if len(self.classes_) != len(X):
            raise ValueError(f"{len(self.classes_)} labels for {len(X)} references")
        self.n_features_in_ = X.shape[1]
        return self

    def angles(self, X) -> np.ndarray:
        """(n_samples, n_refs) spectral angles; NaN rows for zero spectra."""
        check_is_fitted(self, "references_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise BandCountError(
                f"expected {self.n_features_in_} bands, got {X.shape[1]}"
            )
        dots = X @ self.references_.T
        xsq = np.einsum("ij,ij->i", X, X)[:, np.newaxis]
        rsq = np.einsum("ij,ij->i", self.references_, self.references_)[np.newaxis, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = dots / np.sqrt(xsq * rsq)
        return np.arccos(np.clip(cos, -1.0, 1.0))

    def predict(self, X) -> np.ndarray:
        ang = self.angles(X)
        ang = np.where(np.isnan(ang), np.inf, ang)
        best = np.argmin(ang, axis=1)
        best_angle = ang[np.arange(len(ang)), best]
        labels = np.asarray(self.classes_)[best]
        return np.where(best_angle <= self.theta_max, labels, UNCLASSIFIED)
