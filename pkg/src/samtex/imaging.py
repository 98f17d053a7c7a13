"""Floating-point texture I/O (PFM, PNG) with band metadata, plus patch statistics.

PFM is the canonical on-disk float format: 32-bit per channel, bit-exact
round trips, trivially inspectable. PNG (8/16-bit, 1 or 3 channels) is
accepted as an input convenience and promoted to [0, 1] floats. In memory
all texel data is float64 so downstream arithmetic runs in double
precision; storage stays 32-bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

MODALITIES = ("VIS", "UVF", "IRR", "OTHER")

_DEFAULT_CHANNEL_NAMES = {1: ("L",), 3: ("R", "G", "B")}


class TextureError(ValueError):
    """Unsupported file content or inconsistent texture data."""


@dataclass(frozen=True)
class BandMeta:
    """Modality tag and per-channel names for one texture."""

    modality: str = "OTHER"
    channels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise TextureError(
                f"unknown modality {self.modality!r}, expected one of {MODALITIES}"
            )


@dataclass
class Texture:
    """A W x H x C float image in linear radiometric units.

    `data` is (height, width, channels) float64, finite and non-negative.
    Textures are treated as immutable after construction; the data buffer
    is marked read-only so they can be shared across threads.
    """

    data: np.ndarray
    meta: BandMeta

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, np.newaxis]
        if data.ndim != 3:
            raise TextureError(f"texture data must be HxWxC, got shape {data.shape}")
        h, w, c = data.shape
        if h == 0 or w == 0:
            raise TextureError("texture has zero dimension")
        if c not in (1, 3):
            raise TextureError(f"unsupported channel count {c} (expected 1 or 3)")
        if not np.isfinite(data).all():
            raise TextureError("texture contains NaN or Inf")
        if (data < 0.0).any():
            raise TextureError("texture contains negative values")
        self.meta = _coerce_meta(self.meta, c)
        data.flags.writeable = False
        self.data = data

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class PatchRect:
    """Inclusive texel bounds of a rectangular patch (calibration target area)."""

    col0: int
    row0: int
    col1: int
    row1: int

    def __post_init__(self):
        if self.col1 < self.col0 or self.row1 < self.row0:
            raise TextureError(f"empty patch rect {self}")
        if min(self.col0, self.row0) < 0:
            raise TextureError(f"negative patch bounds {self}")

    def contained_in(self, width: int, height: int) -> bool:
        return self.col1 < width and self.row1 < height


@dataclass(frozen=True)
class ChannelStats:
    """Per-channel median of a patch."""

    median: np.ndarray  # (C,) float64


def _default_channels(count: int) -> tuple[str, ...]:
    names = _DEFAULT_CHANNEL_NAMES.get(count)
    if names is None:
        names = tuple(f"C{i}" for i in range(count))
    return names


def _coerce_meta(meta, channels: int) -> BandMeta:
    if meta is None:
        return BandMeta("OTHER", _default_channels(channels))
    if isinstance(meta, str):
        return BandMeta(meta, _default_channels(channels))
    if isinstance(meta, BandMeta):
        if not meta.channels:
            return BandMeta(meta.modality, _default_channels(channels))
        if len(meta.channels) != channels:
            raise TextureError(
                f"band meta names {meta.channels} do not match {channels} channels"
            )
        return meta
    raise TextureError(f"cannot interpret band meta {meta!r}")


# ---------------------------------------------------------------------------
# PFM codec
#
# Header: "PF" (3 channel) or "Pf" (1 channel), width + height, then a scale
# whose sign encodes endianness (negative = little endian). Rows are stored
# bottom-to-top; in memory row 0 is always the top row. The scale magnitude
# is ignored on read, as is common practice.


def read_pfm(path) -> np.ndarray:
    """Read a PFM file into an (H, W, C) float32 array, top row first."""
    raw = Path(path).read_bytes()
    pos = 0

    def token():
        nonlocal pos
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise TextureError(f"{path}: truncated PFM header")
        return raw[start:pos]

    magic = token()
    if magic == b"PF":
        channels = 3
    elif magic == b"Pf":
        channels = 1
    else:
        raise TextureError(f"{path}: not a PFM file (magic {magic!r})")
    try:
        width = int(token())
        height = int(token())
        scale = float(token())
    except ValueError as exc:
        raise TextureError(f"{path}: bad PFM header") from exc
    if width <= 0 or height <= 0:
        raise TextureError(f"{path}: invalid PFM dimensions {width}x{height}")
    if scale == 0.0:
        raise TextureError(f"{path}: PFM scale must be non-zero")
    pos += 1  # single whitespace byte separates header from samples
    count = width * height * channels
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    if len(raw) - pos < count * 4:
        raise TextureError(f"{path}: PFM payload truncated")
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
    data = data.reshape(height, width, channels)
    # stored bottom-to-top; one pass flips and normalizes the byte order
    return np.ascontiguousarray(data[::-1], dtype=np.float32)


def write_pfm(path, data: np.ndarray) -> None:
    """Write an (H, W), (H, W, 1) or (H, W, 3) array as little-endian PFM."""
    arr = np.asarray(data)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise TextureError(f"cannot write shape {arr.shape} as PFM")
    magic = b"PF" if arr.shape[2] == 3 else b"Pf"
    h, w = arr.shape[:2]
    payload = np.ascontiguousarray(arr[::-1], dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(magic + b"\n")
        fh.write(f"{w} {h}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        payload.tofile(fh)


# ---------------------------------------------------------------------------
# PNG (input convenience; integer data promoted to [0, 1])


def _read_png(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise TextureError(f"{path}: cannot decode PNG")
    if img.ndim == 2:
        img = img[:, :, np.newaxis]
    channels = img.shape[2]
    if channels not in (1, 3):
        raise TextureError(
            f"{path}: unsupported channel count {channels} (expected 1 or 3)"
        )
    if channels == 3:
        img = img[:, :, ::-1]  # BGR -> RGB
    if img.dtype == np.uint8:
        return img.astype(np.float64) / 255.0
    if img.dtype == np.uint16:
        return img.astype(np.float64) / 65535.0
    raise TextureError(f"{path}: unsupported PNG sample type {img.dtype}")


def write_png_u8(path, data: np.ndarray) -> None:
    """Write a uint8 image ((H,W), (H,W,1), (H,W,3) RGB or (H,W,4) RGBA) as PNG."""
    arr = np.asarray(data)
    if arr.dtype != np.uint8:
        raise TextureError(f"expected uint8 image, got {arr.dtype}")
    if arr.ndim == 3 and arr.shape[2] == 3:
        arr = arr[:, :, ::-1]
    elif arr.ndim == 3 and arr.shape[2] == 4:
        arr = arr[:, :, [2, 1, 0, 3]]
    elif arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if not cv2.imwrite(str(path), arr):
        raise OSError(f"failed to write PNG {path}")


# ---------------------------------------------------------------------------
# Texture-level operations


def load_texture(path, meta=None) -> Texture:
    """Load a PFM or PNG file as a float texture.

    Integer PNG samples are promoted to [0, 1] by dividing by the format
    maximum; PFM samples are taken as-is. The file type is sniffed from the
    leading magic bytes, not the extension.

    Args:
        path: Source file (PFM, or 8/16-bit PNG with 1 or 3 channels).
        meta: Optional BandMeta or modality string for the result.

    Raises:
        TextureError: Unsupported format or invalid sample values.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head[:2] in (b"PF", b"Pf"):
        data = read_pfm(path).astype(np.float64)
    elif head[:8] == b"\x89PNG\r\n\x1a\n":
        data = _read_png(path)
    else:
        raise TextureError(f"{path}: unsupported texture format")
    if not np.isfinite(data).all():
        raise TextureError(f"{path}: texture contains NaN or Inf")
    if (data < 0).any():
        raise TextureError(f"{path}: texture contains negative values")
    return Texture(data, _coerce_meta(meta, data.shape[2]))


def save_texture(tex: Texture, path) -> None:
    """Write a texture as PFM; float32 data round-trips bit-exactly."""
    write_pfm(path, tex.data)


def patch_stats(tex: Texture, rect: PatchRect) -> ChannelStats:
    """Per-channel median over the texels of `rect` (inclusive bounds).

    With an even texel count the median is the midpoint of the two middle
    order statistics.
    """
    if not rect.contained_in(tex.width, tex.height):
        raise TextureError(
            f"patch {rect} outside texture bounds {tex.width}x{tex.height}"
        )
    region = tex.data[rect.row0 : rect.row1 + 1, rect.col0 : rect.col1 + 1]
    med = np.median(region.reshape(-1, tex.channels), axis=0)
    return ChannelStats(median=med)
