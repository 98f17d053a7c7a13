"""Registered multispectral cube over one uv atlas.

Bands from calibrated textures are stacked per texel into spectral vectors,
restricted to the texels actually covered by the mesh (the validity mask
comes from uv-occupancy rasterization, never from background color keying).
In-memory layout is band-interleaved by texel: classification reads whole
spectra, so locality favors interleaving.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .imaging import read_pfm, write_pfm


class CubeError(ValueError):
    """Inconsistent cube inputs or a malformed cube descriptor."""


@dataclass(frozen=True)
class BandDescriptor:
    modality: str
    channel: str
    source: str


@dataclass
class SpectralCube:
    """width x height texels, each carrying a B-vector of calibrated band values.

    Attributes:
        data: (H, W, B) float64, non-negative.
        bands: ordered band descriptors, one per spectral component.
        valid: (H, W) bool occupancy mask; invalid texels carry no data.
    """

    data: np.ndarray
    bands: tuple[BandDescriptor, ...]
    valid: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        self.valid = np.ascontiguousarray(self.valid, dtype=bool)
        if self.data.ndim != 3:
            raise CubeError(f"cube data must be (H, W, B), got {self.data.shape}")
        if len(self.bands) != self.data.shape[2]:
            raise CubeError(
                f"{len(self.bands)} band descriptors for {self.data.shape[2]} bands"
            )
        if self.data.shape[2] < 2:
            raise CubeError("a spectral cube needs at least 2 bands")
        if self.valid.shape != self.data.shape[:2]:
            raise CubeError(
                f"valid mask {self.valid.shape} does not match cube {self.data.shape[:2]}"
            )
        self.data.flags.writeable = False
        self.valid.flags.writeable = False

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def n_bands(self) -> int:
        return self.data.shape[2]


def assemble(textures, valid: np.ndarray, sources=None) -> SpectralCube:
    """Stack calibrated textures into a cube, channel order preserved.

    Band order is the concatenation of the input textures' channels in the
    given order (the canonical order puts VIS R,G,B before UVF R,G,B).

    Args:
        textures: Ordered Textures with identical dimensions.
        valid: (H, W) occupancy mask from the uv rasterizer.
        sources: Optional per-texture source names for the descriptors.
    """
    textures = list(textures)
    if not textures:
        raise CubeError("no textures to assemble")
    if sources is None:
        sources = [f"texture{idx}:{t.meta.modality}" for idx, t in enumerate(textures)]
    if len(sources) != len(textures):
        raise CubeError(f"{len(sources)} sources for {len(textures)} textures")
    h, w = textures[0].height, textures[0].width
    for t in textures:
        if (t.height, t.width) != (h, w):
            raise CubeError(
                f"texture dimensions differ: {t.width}x{t.height} vs {w}x{h}"
            )
    valid = np.asarray(valid, dtype=bool)
    if valid.shape != (h, w):
        raise CubeError(f"valid mask {valid.shape} does not match atlas {w}x{h}")

    bands = []
    for tex, src in zip(textures, sources):
        for name in tex.meta.channels:
            bands.append(BandDescriptor(tex.meta.modality, name, str(src)))
    if len(bands) < 2:
        raise CubeError("a spectral cube needs at least 2 channels in total")
    data = np.concatenate([t.data for t in textures], axis=2)
    return SpectralCube(data=data, bands=tuple(bands), valid=valid)


def spectrum_at(cube: SpectralCube, texel) -> np.ndarray | None:
    """The B-vector at (col, row), or None when the texel is masked out."""
    col, row = int(texel[0]), int(texel[1])
    if not (0 <= col < cube.width and 0 <= row < cube.height):
        raise CubeError(
            f"texel ({col}, {row}) out of bounds for {cube.width}x{cube.height}"
        )
    if not cube.valid[row, col]:
        return None
    return cube.data[row, col].copy()


def neighborhood_mean(cube: SpectralCube, texel, radius: int) -> np.ndarray | None:
    """Mean spectrum over the valid texels within a square window.

    The window spans `radius` texels in each direction (clipped at the atlas
    border). Returns None when the center texel itself is invalid; radius 0
    reduces to spectrum_at.
    """
    if radius < 0:
        raise CubeError(f"radius must be >= 0, got {radius}")
    center = spectrum_at(cube, texel)
    if center is None or radius == 0:
        return center
    col, row = int(texel[0]), int(texel[1])
    c0, c1 = max(col - radius, 0), min(col + radius, cube.width - 1)
    r0, r1 = max(row - radius, 0), min(row + radius, cube.height - 1)
    window = cube.data[r0 : r1 + 1, c0 : c1 + 1]
    ok = cube.valid[r0 : r1 + 1, c0 : c1 + 1]
    return window[ok].mean(axis=0)


# ---------------------------------------------------------------------------
# Persistence: one single-channel PFM per band, a 0/1 PFM validity mask, and
# a plain-text key/value descriptor tying them together.

DESCRIPTOR_NAME = "cube.toml"
MASK_NAME = "mask.pfm"


def save_cube(cube: SpectralCube, directory) -> Path:
    """Write band files, validity mask, and descriptor into `directory`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [
        f"width = {cube.width}",
        f"height = {cube.height}",
        f'mask = "{MASK_NAME}"',
        "",
    ]
    for i, band in enumerate(cube.bands):
        fname = f"band_{i:02d}.pfm"
        write_pfm(directory / fname, cube.data[:, :, i])
        lines += [
            "[[band]]",
            f'file = "{fname}"',
            f'modality = "{band.modality}"',
            f'channel = "{band.channel}"',
            f'source = "{band.source}"',
            "",
        ]
    write_pfm(directory / MASK_NAME, cube.valid.astype(np.float32))
    descriptor = directory / DESCRIPTOR_NAME
    descriptor.write_text("\n".join(lines), encoding="utf-8")
    return descriptor


def load_cube(directory) -> SpectralCube:
    """Load a cube previously written by save_cube."""
    directory = Path(directory)
    descriptor = directory / DESCRIPTOR_NAME
    if not descriptor.is_file():
        raise CubeError(f"no cube descriptor at {descriptor}")
    try:
        doc = tomllib.loads(descriptor.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise CubeError(f"{descriptor}: malformed descriptor: {exc}") from exc
    try:
        width, height = int(doc["width"]), int(doc["height"])
        mask_name = doc["mask"]
        band_entries = doc["band"]
    except KeyError as exc:
        raise CubeError(f"{descriptor}: missing key {exc}") from exc
    if not band_entries:
        raise CubeError(f"{descriptor}: descriptor lists no bands")

    data = np.empty((height, width, len(band_entries)), dtype=np.float64)
    bands = []
    for i, entry in enumerate(band_entries):
        plane = read_pfm(directory / entry["file"])
        if plane.shape != (height, width, 1):
            raise CubeError(
                f"band {entry['file']} has shape {plane.shape[:2]}, "
                f"descriptor says {width}x{height}"
            )
        data[:, :, i] = plane[:, :, 0]
        bands.append(
            BandDescriptor(entry["modality"], entry["channel"], entry["source"])
        )
    mask = read_pfm(directory / mask_name)
    if mask.shape != (height, width, 1):
        raise CubeError(f"mask has shape {mask.shape[:2]}, expected {width}x{height}")
    return SpectralCube(data=data, bands=tuple(bands), valid=mask[:, :, 0] > 0.5)
