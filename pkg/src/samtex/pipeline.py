"""Pipeline stages wiring the modules into the capture-to-classification flow.

Each stage writes into a fresh run-stamped directory under the project
output root and repoints a `latest` symlink, so results are never silently
overwritten (restoration documentation needs provenance). File contents
carry no timestamps: reruns are byte-identical. A lock file serializes
commands per output root.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np
from filelock import FileLock, Timeout

from . import calibration, geometry, sam
from .cube import SpectralCube, assemble, load_cube, neighborhood_mean, save_cube
from .errors import UserInputError
from .geometry import FaceIdMap
from .imaging import Texture, load_texture, patch_stats, save_texture, write_png_u8
from .manifest import ProjectManifest

STAGE_CALIBRATE = "calibrate"
STAGE_CUBE = "cube"
STAGE_CLASSIFY = "classify"

VIS_CALIB_NAME = "vis_calib.pfm"
UVF_CALIB_NAME = "uvf_calib.pfm"
FACEMAP_NAME = "facemap.npy"

DEFAULT_MIN_FACE_FRACTION = 0.5


class MissingStageError(RuntimeError):
    """An upstream stage's outputs are required but absent."""


@dataclass(frozen=True)
class CalibrateResult:
    run_dir: Path
    norm: calibration.NormVector
    stray: calibration.StrayLight
    clamp_report: calibration.ClampReport


@dataclass(frozen=True)
class BuildCubeResult:
    run_dir: Path
    cube: SpectralCube
    facemap: FaceIdMap


@dataclass(frozen=True)
class ClassifyResult:
    run_dir: Path
    texel: tuple[int, int]
    uv: tuple[float, float]
    reference: np.ndarray
    angles: np.ndarray
    mask: np.ndarray
    faces: set[int]
    stats: dict


# ---------------------------------------------------------------------------
# Output directory management


def _new_run_dir(out_root: Path, stage: str) -> Path:
    base = out_root / stage
    base.mkdir(parents=True, exist_ok=True)
    while True:
        stamp = datetime.now().strftime("%Y%m%d-%H%M%S-%f")
        run_dir = base / f"run-{stamp}"
        try:
            run_dir.mkdir()
            return run_dir
        except FileExistsError:
            continue


def _point_latest(run_dir: Path) -> None:
    latest = run_dir.parent / "latest"
    tmp = run_dir.parent / ".latest.tmp"
    if tmp.is_symlink() or tmp.exists():
        tmp.unlink()
    os.symlink(run_dir.name, tmp)
    os.replace(tmp, latest)


def latest_dir(out_root: Path, stage: str) -> Path | None:
    latest = Path(out_root) / stage / "latest"
    if latest.exists():
        return latest.resolve()
    return None


def _lock(out_root: Path) -> FileLock:
    out_root.mkdir(parents=True, exist_ok=True)
    lock = FileLock(out_root / ".lock")
    try:
        lock.acquire(timeout=0)
    except Timeout:
        raise RuntimeError(
            f"another command is writing to {out_root} (lock file held)"
        )
    return lock


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")


def _resolve_out_root(manifest: ProjectManifest, out) -> Path:
    return Path(out) if out is not None else manifest.output_dir


# ---------------------------------------------------------------------------
# Stages


def _load_acquired(manifest: ProjectManifest) -> tuple[Texture, Texture]:
    vis = load_texture(manifest.vis_entry.path, "VIS")
    uvf = load_texture(manifest.uvf_entry.path, "UVF")
    expected = (manifest.atlas_height, manifest.atlas_width)
    for name, tex in (("VIS", vis), ("UVF", uvf)):
        if (tex.height, tex.width) != expected:
            raise UserInputError(
                f"{name} texture is {tex.width}x{tex.height} but the manifest "
                f"declares a {manifest.atlas_width}x{manifest.atlas_height} atlas"
            )
    if vis.channels != uvf.channels:
        raise UserInputError(
            f"VIS has {vis.channels} channels, UVF has {uvf.channels}"
        )
    return vis, uvf


def run_calibrate(manifest: ProjectManifest, out=None) -> CalibrateResult:
    """Stage 1: normalize VIS against the target patch, remove UVF stray light."""
    out_root = _resolve_out_root(manifest, out)
    lock = _lock(out_root)
    try:
        vis, uvf = _load_acquired(manifest)
        nominal = manifest.nominal_reflectance
        if len(nominal) != vis.channels:
            raise UserInputError(
                f"nominal reflectance has {len(nominal)} channels, "
                f"textures have {vis.channels}"
            )
        vis_stats = patch_stats(vis, manifest.vis_patch)
        norm = calibration.compute_norm(vis_stats, nominal)
        vis_calib = calibration.calibrate_vis(vis, norm)
        uvf_stats = patch_stats(uvf, manifest.uvf_patch)
        stray = calibration.stray_from_stats(uvf_stats)
        uvf_calib, clamp_report = calibration.calibrate_uvf(uvf, stray, vis_calib)

        run_dir = _new_run_dir(out_root, STAGE_CALIBRATE)
        save_texture(vis_calib, run_dir / VIS_CALIB_NAME)
        save_texture(uvf_calib, run_dir / UVF_CALIB_NAME)
        _write_json(
            run_dir / "report.json",
            {
                "stage": STAGE_CALIBRATE,
                "vis_patch_median": list(vis_stats.median),
                "nominal_reflectance": list(norm.nominal),
                "r_norm": list(norm.r_norm),
                "s_target": list(stray.s_target),
                "uvf_clamped_values": clamp_report.clamped_values,
                "uvf_max_undershoot": clamp_report.max_undershoot,
            },
        )
        _point_latest(run_dir)
        return CalibrateResult(run_dir, norm, stray, clamp_report)
    finally:
        lock.release()


def run_build_cube(manifest: ProjectManifest, out=None) -> BuildCubeResult:
    """Stage 2: rasterize uv occupancy and assemble the calibrated band cube."""
    out_root = _resolve_out_root(manifest, out)
    lock = _lock(out_root)
    try:
        calib_dir = latest_dir(out_root, STAGE_CALIBRATE)
        if calib_dir is None:
            raise MissingStageError(
                f"no calibrated textures under {out_root}; run `calibrate` first"
            )
        vis_calib = load_texture(calib_dir / VIS_CALIB_NAME, "VIS")
        uvf_calib = load_texture(calib_dir / UVF_CALIB_NAME, "UVF")
        mesh = geometry.load_mesh(manifest.mesh_path)
        facemap = geometry.rasterize_occupancy(
            mesh, manifest.atlas_width, manifest.atlas_height, flip_v=manifest.flip_v
        )
        textures = [vis_calib, uvf_calib]
        sources = [VIS_CALIB_NAME, UVF_CALIB_NAME]
        for entry in manifest.extra_entries:
            textures.append(load_texture(entry.path, entry.modality))
            sources.append(entry.path.name)
        for tex in textures[2:]:
            if (tex.height, tex.width) != (manifest.atlas_height, manifest.atlas_width):
                raise UserInputError(
                    f"extra band texture is {tex.width}x{tex.height}, "
                    f"expected the {manifest.atlas_width}x{manifest.atlas_height} atlas"
                )
        cube = assemble(textures, facemap.occupancy, sources=sources)

        run_dir = _new_run_dir(out_root, STAGE_CUBE)
        save_cube(cube, run_dir)
        np.save(run_dir / FACEMAP_NAME, facemap.face_id)
        _write_json(
            run_dir / "report.json",
            {
                "stage": STAGE_CUBE,
                "bands": [
                    {"modality": b.modality, "channel": b.channel, "source": b.source}
                    for b in cube.bands
                ],
                "valid_texels": int(facemap.occupancy.sum()),
                "degenerate_uv_faces": facemap.degenerate_count,
                "mesh_faces": mesh.n_faces,
                "mesh_vertices": mesh.n_vertices,
                "uv_clamped_components": mesh.uv_clamp_count,
                "dropped_faces": mesh.dropped_face_count,
            },
        )
        _point_latest(run_dir)
        return BuildCubeResult(run_dir, cube, facemap)
    finally:
        lock.release()


def load_latest_cube(manifest: ProjectManifest, out=None) -> tuple[SpectralCube, FaceIdMap]:
    """Load the most recent cube build, or raise MissingStageError."""
    out_root = _resolve_out_root(manifest, out)
    cube_dir = latest_dir(out_root, STAGE_CUBE)
    if cube_dir is None:
        raise MissingStageError(
            f"no spectral cube under {out_root}; run `build-cube` first"
        )
    cube = load_cube(cube_dir)
    face_id = np.load(cube_dir / FACEMAP_NAME)
    return cube, FaceIdMap(face_id)


def resolve_reference_texel(
    manifest: ProjectManifest, uv=None, texel=None
) -> tuple[tuple[int, int], tuple[float, float]]:
    """Turn a uv coordinate or explicit texel into (texel, echo uv)."""
    if (uv is None) == (texel is None):
        raise UserInputError("give exactly one reference: a uv coordinate or a texel")
    w, h = manifest.atlas_width, manifest.atlas_height
    if uv is not None:
        u, v = float(uv[0]), float(uv[1])
        if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
            raise UserInputError(f"uv ({u}, {v}) outside [0, 1]^2")
        return geometry.uv_to_texel((u, v), w, h, flip_v=manifest.flip_v), (u, v)
    col, row = int(texel[0]), int(texel[1])
    if not (0 <= col < w and 0 <= row < h):
        raise UserInputError(f"texel ({col}, {row}) outside the {w}x{h} atlas")
    return (col, row), geometry.texel_center_uv(col, row, w, h, flip_v=manifest.flip_v)


def classify_at_texel(
    cube: SpectralCube,
    facemap: FaceIdMap,
    texel: tuple[int, int],
    theta_max: float,
    radius: int = 0,
    workers: int = 1,
    min_face_fraction: float = DEFAULT_MIN_FACE_FRACTION,
    connected_only: bool = False,
):
    """Shared classification core for the CLI stage and the HTTP service."""
    if theta_max < 0.0:
        raise UserInputError(f"theta_max must be >= 0, got {theta_max}")
    if radius < 0:
        raise UserInputError(f"radius must be >= 0, got {radius}")
    reference = neighborhood_mean(cube, texel, radius)
    if reference is None:
        raise UserInputError(
            f"reference texel {texel} not on surface (outside the valid mask)"
        )
    if not (reference > 0.0).any():
        raise UserInputError(
            f"reference texel {texel} has a zero spectrum; angle is undefined"
        )
    angles = sam.sam_map(cube, reference, workers=workers)
    mask = sam.threshold_region(angles, theta_max)
    if connected_only:
        mask = sam.connected_region(mask, texel)
    faces = geometry.mask_to_faces(mask, facemap, min_face_fraction)
    selected = angles[mask]
    stats = {
        "texels_selected": int(mask.sum()),
        "min_angle": float(selected.min()) if selected.size else None,
        "median_angle": float(np.median(selected)) if selected.size else None,
        "faces_selected": len(faces),
    }
    return reference, angles, mask, faces, stats


def run_classify(
    manifest: ProjectManifest,
    uv=None,
    texel=None,
    theta_max=None,
    radius: int = 0,
    workers: int = 1,
    min_face_fraction: float = DEFAULT_MIN_FACE_FRACTION,
    connected_only: bool = False,
    out=None,
) -> ClassifyResult:
    """Stage 3: angle map, threshold region, overlay, and face list for one pick."""
    out_root = _resolve_out_root(manifest, out)
    theta = manifest.theta_max if theta_max is None else float(theta_max)
    cube, facemap = load_latest_cube(manifest, out)
    ref_texel, echo_uv = resolve_reference_texel(manifest, uv=uv, texel=texel)

    lock = _lock(out_root)
    try:
        reference, angles, mask, faces, stats = classify_at_texel(
            cube,
            facemap,
            ref_texel,
            theta,
            radius=radius,
            workers=workers,
            min_face_fraction=min_face_fraction,
            connected_only=connected_only,
        )
        run_dir = _new_run_dir(out_root, STAGE_CLASSIFY)
        sam.save_angle_map(run_dir / "sam.pfm", angles)
        sam.save_mask(run_dir / "region.pfm", mask)
        write_png_u8(run_dir / "overlay.png", sam.make_overlay(mask))
        (run_dir / "faces.txt").write_text(
            "".join(f"{f}\n" for f in sorted(faces)), "utf-8"
        )
        stats_out = dict(stats)
        stats_out.update(
            {
                "stage": STAGE_CLASSIFY,
                "theta_max": theta,
                "radius": radius,
                "connected_only": connected_only,
                "min_face_fraction": min_face_fraction,
                "texel": list(ref_texel),
                "uv": list(echo_uv),
                "reference_spectrum": [float(x) for x in reference],
            }
        )
        _write_json(run_dir / "stats.json", stats_out)
        _point_latest(run_dir)
        return ClassifyResult(
            run_dir=run_dir,
            texel=ref_texel,
            uv=echo_uv,
            reference=reference,
            angles=angles,
            mask=mask,
            faces=faces,
            stats=stats_out,
        )
    finally:
        lock.release()
