"""Synthetic two-material capture project with exact, independently derived
ground truth.

The scene is a flat grid mesh whose uv atlas covers the left 87.5% of the
texture; two constant-spectrum materials are painted left/right of the
midline of that strip, with a per-texel brightness jitter that the angle
measure must ignore. A 10x10 target patch sits in the unused background
strip. Ground-truth masks follow from the integer column layout alone, so
they never depend on the code under test.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Mesh, save_mesh
from .imaging import Texture, save_texture

# Base material definitions: visible reflectance and fluorescence emission
# per RGB channel. A is warm and green-fluorescing, B is its rough mirror.
RHO_A = np.array([0.6, 0.3, 0.2])
EMIT_A = np.array([0.05, 0.30, 0.10])
RHO_B = np.array([0.2, 0.3, 0.6])
EMIT_B = np.array([0.30, 0.05, 0.20])

STRAY = np.array([0.02, 0.03, 0.01])  # true stray visible light under UV
# exactly representable in float32 so the stored patch survives 32-bit I/O
PATCH_VIS_VALUE = 0.75
NOMINAL_REFLECTANCE = 0.99

MESH_U_EXTENT = 0.875  # uv columns beyond this are background
JITTER_RANGE = (0.7, 1.3)

BACKGROUND_VIS = 0.35
BACKGROUND_UVF = 0.15

GROUND_TRUTH_DIR = "ground_truth"


@dataclass(frozen=True)
class FixtureInfo:
    directory: Path
    manifest_path: Path
    mesh_path: Path
    atlas: int
    occupied_cols: int
    split_col: int
    patch_rect: tuple[int, int, int, int]
    material_a: np.ndarray  # expected calibrated 6-band spectrum, material A
    material_b: np.ndarray
    pick_uv_a: tuple[float, float]
    pick_uv_b: tuple[float, float]
    n_faces: int


def _grid_mesh(quads_u: int, quads_v: int) -> Mesh:
    """Flat grid in the z=0 plane; xy coincides with uv over [0, extent] x [0, 1]."""
    nu, nv = quads_u + 1, quads_v + 1
    xs = MESH_U_EXTENT * np.arange(nu) / quads_u
    ys = np.arange(nv) / quads_v
    vertices = np.array([[x, y, 0.0] for y in ys for x in xs])
    uvs = vertices[:, :2].copy()

    faces = []
    for j in range(quads_v):
        for i in range(quads_u):
            v00 = j * nu + i
            v10 = v00 + 1
            v01 = v00 + nu
            v11 = v01 + 1
            faces.append((v00, v10, v11))
            faces.append((v00, v11, v01))
    faces = np.array(faces, dtype=np.int64)
    uv_corners = uvs[faces]
    return Mesh(vertices, faces, uv_corners)


def calibrated_spectrum(rho: np.ndarray, emit: np.ndarray) -> np.ndarray:
    """Expected 6-band spectrum after the calibration chain.

    The measured stray light comes from the patch, whose calibrated
    reflectance is the nominal value, so a small (1 - nominal) residual of
    the true stray term survives the subtraction.
    """
    measured_stray = STRAY * NOMINAL_REFLECTANCE
    uvf = emit + STRAY * rho - measured_stray * rho
    return np.concatenate([rho, uvf])


def make_fixture(
    directory,
    atlas: int = 1024,
    quads_u: int = 25,
    quads_v: int = 10,
    seed: int = 0,
) -> FixtureInfo:
    """Generate mesh, acquired textures, manifest, and ground-truth masks.

    Defaults produce the acceptance configuration: 500 faces, a 1024x1024
    atlas, and 6 bands. Grid edges are chosen to never pass through texel
    centers, so occupancy is exactly the occupied column range.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    gt_dir = directory / GROUND_TRUTH_DIR
    gt_dir.mkdir(exist_ok=True)

    occupied = round(atlas * MESH_U_EXTENT)
    split = occupied // 2
    rng = np.random.default_rng(seed)

    mesh = _grid_mesh(quads_u, quads_v)
    mesh_path = directory / "mesh.obj"
    save_mesh(mesh, mesh_path)

    # acquired textures: value = jitter * base, identical jitter in both
    # modalities so every texel of one material is an exact positive
    # scaling of the same spectrum
    r_norm = PATCH_VIS_VALUE / NOMINAL_REFLECTANCE
    jitter = rng.uniform(*JITTER_RANGE, size=(atlas, occupied, 1))
    vis = np.full((atlas, atlas, 3), BACKGROUND_VIS)
    uvf = np.full((atlas, atlas, 3), BACKGROUND_UVF)

    vis_a = RHO_A * r_norm
    vis_b = RHO_B * r_norm
    uvf_a = EMIT_A + STRAY * RHO_A
    uvf_b = EMIT_B + STRAY * RHO_B
    vis[:, :occupied] = jitter * np.where(
        (np.arange(occupied) < split)[np.newaxis, :, np.newaxis], vis_a, vis_b
    )
    uvf[:, :occupied] = jitter * np.where(
        (np.arange(occupied) < split)[np.newaxis, :, np.newaxis], uvf_a, uvf_b
    )

    # target patch in the background strip: constant VIS value, and under UV
    # only the stray reflection off the (nominal-reflectance) patch; shrinks
    # below 10 columns when a small atlas leaves a narrow strip
    patch_w = min(10, atlas - occupied)
    p0 = occupied + (atlas - occupied - patch_w) // 2
    row0 = atlas // 10
    patch = (p0, row0, p0 + patch_w - 1, row0 + 9)
    vis[patch[1] : patch[3] + 1, patch[0] : patch[2] + 1] = PATCH_VIS_VALUE
    uvf[patch[1] : patch[3] + 1, patch[0] : patch[2] + 1] = STRAY * NOMINAL_REFLECTANCE

    vis_path = directory / "vis_acq.pfm"
    uvf_path = directory / "uvf_acq.pfm"
    save_texture(Texture(vis, "VIS"), vis_path)
    save_texture(Texture(uvf, "UVF"), uvf_path)

    # ground truth from the integer column layout only
    cols = np.arange(atlas)[np.newaxis, :]
    gt_valid = np.broadcast_to(cols < occupied, (atlas, atlas))
    gt_a = np.broadcast_to(cols < split, (atlas, atlas))
    gt_b = gt_valid & ~gt_a
    for name, mask in (("valid", gt_valid), ("material_a", gt_a), ("material_b", gt_b)):
        save_texture(
            Texture(mask.astype(np.float64), "OTHER"), gt_dir / f"gt_{name}.pfm"
        )

    manifest_path = directory / "manifest.toml"
    manifest_path.write_text(
        f"""[project]
name = "synthetic-two-material"
output_dir = "out"

[mesh]
path = "mesh.obj"

[atlas]
width = {atlas}
height = {atlas}
flip_v = false

[[textures]]
path = "vis_acq.pfm"
modality = "VIS"
role = "acquired"

[[textures]]
path = "uvf_acq.pfm"
modality = "UVF"
role = "acquired"

[calibration]
nominal_reflectance = [{NOMINAL_REFLECTANCE}, {NOMINAL_REFLECTANCE}, {NOMINAL_REFLECTANCE}]
vis_patch = [{patch[0]}, {patch[1]}, {patch[2]}, {patch[3]}]
uvf_patch = [{patch[0]}, {patch[1]}, {patch[2]}, {patch[3]}]

[classify]
theta_max = 0.15

[provenance]
note = "synthetic fixture, two constant-spectrum materials with brightness jitter"
""",
        encoding="utf-8",
    )

    (directory / "README.txt").write_text(
        f"""Synthetic two-material fixture
==============================

Layout (atlas {atlas}x{atlas}):
  columns 0..{split - 1}            material A
  columns {split}..{occupied - 1}          material B
  columns {occupied}..{atlas - 1}         background (not covered by the mesh)
  target patch              cols {patch[0]}..{patch[2]}, rows {patch[1]}..{patch[3]} (background strip)

Hand-checked calibration arithmetic:
  VIS patch value           {PATCH_VIS_VALUE} per channel (constant)
  nominal reflectance       {NOMINAL_REFLECTANCE}
  normalization             {PATCH_VIS_VALUE} / {NOMINAL_REFLECTANCE} = {PATCH_VIS_VALUE / NOMINAL_REFLECTANCE!r} per channel
  true stray light          {list(STRAY)}
  UVF patch value           stray * {NOMINAL_REFLECTANCE} = {list(STRAY * NOMINAL_REFLECTANCE)}
  (the measured stray light equals the UVF patch value)

Material base spectra (visible reflectance | fluorescence emission):
  A: {list(RHO_A)} | {list(EMIT_A)}
  B: {list(RHO_B)} | {list(EMIT_B)}

Every texel of a material is a per-texel positive scaling (jitter in
[{JITTER_RANGE[0]}, {JITTER_RANGE[1]}]) of one fixed spectrum, which the angle measure ignores.
Ground-truth masks in {GROUND_TRUTH_DIR}/ are derived from the integer column
layout above, independently of any pipeline code.
""",
        encoding="utf-8",
    )

    # picks: quad-interior points well inside each material's column range
    pick_a = (0.21875, 0.55)
    pick_b = (0.65625, 0.55)
    return FixtureInfo(
        directory=directory,
        manifest_path=manifest_path,
        mesh_path=mesh_path,
        atlas=atlas,
        occupied_cols=occupied,
        split_col=split,
        patch_rect=patch,
        material_a=calibrated_spectrum(RHO_A, EMIT_A),
        material_b=calibrated_spectrum(RHO_B, EMIT_B),
        pick_uv_a=pick_a,
        pick_uv_b=pick_b,
        n_faces=mesh.n_faces,
    )
