"""Declarative project manifest: one TOML file describing a capture project.

The manifest names the mesh, the acquired textures, the calibration target
patches, and the atlas conventions. Commands validate it fully before
touching any output.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ManifestError
from .imaging import MODALITIES, PatchRect, TextureError
from .sam import DEFAULT_THETA_MAX

ROLES = ("acquired", "extra")


@dataclass(frozen=True)
class TextureEntry:
    path: Path
    modality: str
    role: str = "acquired"


@dataclass(frozen=True)
class ProjectManifest:
    """Validated project description; all paths resolved against the manifest dir."""

    root: Path
    name: str
    output_dir: Path
    mesh_path: Path
    atlas_width: int
    atlas_height: int
    flip_v: bool
    textures: tuple[TextureEntry, ...]
    nominal_reflectance: tuple[float, ...]
    vis_patch: PatchRect
    uvf_patch: PatchRect
    theta_max: float = DEFAULT_THETA_MAX
    provenance: dict = field(default_factory=dict)

    @property
    def vis_entry(self) -> TextureEntry:
        return next(
            t for t in self.textures if t.modality == "VIS" and t.role == "acquired"
        )

    @property
    def uvf_entry(self) -> TextureEntry:
        return next(
            t for t in self.textures if t.modality == "UVF" and t.role == "acquired"
        )

    @property
    def extra_entries(self) -> tuple[TextureEntry, ...]:
        return tuple(t for t in self.textures if t.role == "extra")


def _require(doc: dict, key: str, kind, where: str):
    if key not in doc:
        raise ManifestError(f"{where}: missing required key {key!r}")
    value = doc[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ManifestError(
            f"{where}: key {key!r} must be {getattr(kind, '__name__', kind)}, "
            f"got {type(value).__name__}"
        )
    return value


def _parse_rect(values, name: str, width: int, height: int) -> PatchRect:
    if not (isinstance(values, list) and len(values) == 4) or not all(
        isinstance(v, int) and not isinstance(v, bool) for v in values
    ):
        raise ManifestError(f"{name} must be [col0, row0, col1, row1] integers")
    try:
        rect = PatchRect(*values)
    except TextureError as exc:
        raise ManifestError(f"{name}: {exc}") from exc
    if not rect.contained_in(width, height):
        raise ManifestError(
            f"{name} {values} exceeds the {width}x{height} atlas bounds"
        )
    return rect


def load_manifest(path) -> ProjectManifest:
    """Parse and fully validate a project manifest.

    Raises:
        ManifestError: On any missing or inconsistent field, or when a
            referenced mesh/texture file does not exist.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ManifestError(f"{path}: not valid TOML: {exc}") from exc
    root = path.parent

    project = _require(doc, "project", dict, str(path))
    name = _require(project, "name", str, "[project]")
    output_dir = root / _require(project, "output_dir", str, "[project]")

    mesh_tbl = _require(doc, "mesh", dict, str(path))
    mesh_path = root / _require(mesh_tbl, "path", str, "[mesh]")
    if not mesh_path.is_file():
        raise ManifestError(f"mesh file not found: {mesh_path}")

    atlas = _require(doc, "atlas", dict, str(path))
    width = _require(atlas, "width", int, "[atlas]")
    height = _require(atlas, "height", int, "[atlas]")
    if width < 1 or height < 1:
        raise ManifestError(f"atlas dimensions must be >= 1, got {width}x{height}")
    flip_v = atlas.get("flip_v", False)
    if not isinstance(flip_v, bool):
        raise ManifestError("[atlas] flip_v must be a boolean")

    raw_textures = _require(doc, "textures", list, str(path))
    entries = []
    for i, tbl in enumerate(raw_textures):
        if not isinstance(tbl, dict):
            raise ManifestError(f"[[textures]] entry {i} must be a table")
        where = f"[[textures]] entry {i}"
        tex_path = root / _require(tbl, "path", str, where)
        modality = _require(tbl, "modality", str, where)
        role = tbl.get("role", "acquired")
        if modality not in MODALITIES:
            raise ManifestError(f"{where}: unknown modality {modality!r}")
        if role not in ROLES:
            raise ManifestError(f"{where}: unknown role {role!r}")
        if not tex_path.is_file():
            raise ManifestError(f"{where}: texture file not found: {tex_path}")
        entries.append(TextureEntry(tex_path, modality, role))
    acquired_vis = [t for t in entries if t.modality == "VIS" and t.role == "acquired"]
    acquired_uvf = [t for t in entries if t.modality == "UVF" and t.role == "acquired"]
    if len(acquired_vis) != 1 or len(acquired_uvf) != 1:
        raise ManifestError(
            "manifest needs exactly one acquired VIS and one acquired UVF texture "
            f"(found {len(acquired_vis)} VIS, {len(acquired_uvf)} UVF)"
        )

    cal = _require(doc, "calibration", dict, str(path))
    nominal = cal.get("nominal_reflectance", [0.99, 0.99, 0.99])
    if isinstance(nominal, (int, float)) and not isinstance(nominal, bool):
        nominal = [float(nominal)] * 3
    if not (
        isinstance(nominal, list)
        and nominal
        and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in nominal)
    ):
        raise ManifestError("[calibration] nominal_reflectance must be numbers")
    nominal = tuple(float(v) for v in nominal)
    if any(not 0.0 < v <= 1.0 for v in nominal):
        raise ManifestError(
            f"[calibration] nominal_reflectance must be in (0, 1], got {nominal}"
        )
    vis_patch = _parse_rect(
        _require(cal, "vis_patch", list, "[calibration]"), "vis_patch", width, height
    )
    uvf_patch = _parse_rect(
        _require(cal, "uvf_patch", list, "[calibration]"), "uvf_patch", width, height
    )

    classify = doc.get("classify", {})
    theta_max = classify.get("theta_max", DEFAULT_THETA_MAX)
    if isinstance(theta_max, int) and not isinstance(theta_max, bool):
        theta_max = float(theta_max)
    if not isinstance(theta_max, float) or theta_max < 0.0:
        raise ManifestError(f"[classify] theta_max must be a float >= 0, got {theta_max!r}")

    provenance = doc.get("provenance", {})
    if not isinstance(provenance, dict):
        raise ManifestError("[provenance] must be a table")

    return ProjectManifest(
        root=root,
        name=name,
        output_dir=output_dir,
        mesh_path=mesh_path,
        atlas_width=width,
        atlas_height=height,
        flip_v=flip_v,
        textures=tuple(entries),
        nominal_reflectance=nominal,
        vis_patch=vis_patch,
        uvf_patch=uvf_patch,
        theta_max=theta_max,
        provenance=dict(provenance),
    )
