"""uv-parameterized triangle meshes: OBJ loading, ray picking, texel mapping,
and uv-atlas occupancy rasterization.

Conventions (fixed here, documented once):

* v = 0 is the BOTTOM texture row. A `flip_v` flag inverts this for atlases
  baked with the opposite convention.
* Texel (col, row) samples its center at (col + 0.5, row + 0.5) in pixel
  units, with row 0 at the top of the image in memory.
* Texel centers exactly on a shared uv edge are owned by exactly one face,
  decided by the top-left fill rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

NO_FACE = -1  # FaceIdMap sentinel for texels not covered by any uv triangle

# uv triangles with less area than this (in uv units squared) own no texel
# under center sampling and are skipped by the rasterizer.
DEGENERATE_UV_AREA = 1e-12

_BARY_EPS = 1e-12  # inclusive tolerance so edge/vertex ray hits do not fall through


class MeshLoadError(ValueError):
    """Malformed mesh file or one unusable for texture mapping."""


@dataclass
class Mesh:
    """Triangle mesh with per-corner texture coordinates.

    Attributes:
        vertices: (V, 3) float64 positions in meters.
        faces: (F, 3) int64 vertex indices.
        uv_corners: (F, 3, 2) float64 texture coordinates in [0, 1].
        uv_clamp_count: uv components clamped into [0, 1] at load time.
        dropped_face_count: point-degenerate faces dropped at load time.

    Arrays are marked read-only; a Mesh is safe to share across threads.
    """

    vertices: np.ndarray
    faces: np.ndarray
    uv_corners: np.ndarray
    uv_clamp_count: int = 0
    dropped_face_count: int = 0

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        self.uv_corners = np.ascontiguousarray(self.uv_corners, dtype=np.float64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError(f"vertices must be (V, 3), got {self.vertices.shape}")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValueError(f"faces must be (F, 3), got {self.faces.shape}")
        if self.uv_corners.shape != (len(self.faces), 3, 2):
            raise ValueError(
                f"uv_corners must be (F, 3, 2), got {self.uv_corners.shape}"
            )
        if len(self.faces) and (
            self.faces.min() < 0 or self.faces.max() >= len(self.vertices)
        ):
            raise ValueError("face references a vertex out of range")
        for arr in (self.vertices, self.faces, self.uv_corners):
            arr.flags.writeable = False

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)


@dataclass(frozen=True)
class PickResult:
    """A resolved click on the mesh surface."""

    face_id: int
    barycentric: np.ndarray  # (3,) non-negative, sums to 1
    point3d: np.ndarray  # (3,)
    uv: np.ndarray  # (2,)
    texel: tuple[int, int] | None  # (col, row); None when no atlas size was given


@dataclass
class FaceIdMap:
    """Per-texel owning face id (NO_FACE where the atlas is background)."""

    face_id: np.ndarray  # (H, W) int32
    degenerate_count: int = 0

    def __post_init__(self):
        self.face_id = np.ascontiguousarray(self.face_id, dtype=np.int32)
        if self.face_id.ndim != 2:
            raise ValueError(f"face_id must be 2-D, got {self.face_id.shape}")
        self.face_id.flags.writeable = False

    @property
    def width(self) -> int:
        return self.face_id.shape[1]

    @property
    def height(self) -> int:
        return self.face_id.shape[0]

    @property
    def occupancy(self) -> np.ndarray:
        return self.face_id != NO_FACE


# ---------------------------------------------------------------------------
# OBJ loading


def _parse_face_corner(token: str, n_v: int, n_vt: int, lineno: int):
    parts = token.split("/")
    try:
        vi = int(parts[0])
    except ValueError:
        raise MeshLoadError(f"line {lineno}: bad face corner {token!r}")
    if len(parts) < 2 or parts[1] == "":
        raise MeshLoadError(
            f"line {lineno}: face corner {token!r} has no texture coordinate; "
            "the pipeline requires a uv parameterization"
        )
    try:
        ti = int(parts[1])
    except ValueError:
        raise MeshLoadError(f"line {lineno}: bad face corner {token!r}")

    def resolve(idx: int, count: int, kind: str) -> int:
        if idx > 0:
            idx -= 1
        elif idx < 0:
            idx += count
        else:
            raise MeshLoadError(f"line {lineno}: {kind} index 0 is invalid")
        if not 0 <= idx < count:
            raise MeshLoadError(
                f"line {lineno}: {kind} index {token!r} out of range (have {count})"
            )
        return idx

    return resolve(vi, n_v, "vertex"), resolve(ti, n_vt, "uv")


def load_mesh(path) -> Mesh:
    """Load a Wavefront OBJ mesh with texture coordinates.

    Supports `v`, `vt` and `f v/vt[/vn]` records; normals and grouping
    records are ignored. Polygons are fan-triangulated in corner order.
    uv components outside [0, 1] are clamped and counted (photogrammetry
    exports routinely overshoot by an epsilon); non-finite values are a
    hard error. Faces whose three corners share one vertex are dropped
    and counted.

    Raises:
        MeshLoadError: Malformed file, or mesh without uv coordinates.
    """
    path = Path(path)
    positions: list[tuple[float, float, float]] = []
    texcoords: list[list[float]] = []
    face_corners: list[list[tuple[int, int]]] = []
    clamp_count = 0

    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            if "#" in line:
                line = line[: line.index("#")]
            fields = line.split()
            if not fields:
                continue
            rec, args = fields[0], fields[1:]
            if rec == "v":
                if len(args) < 3:
                    raise MeshLoadError(f"line {lineno}: vertex needs 3 components")
                try:
                    xyz = tuple(float(a) for a in args[:3])
                except ValueError:
                    raise MeshLoadError(f"line {lineno}: bad vertex component")
                if not all(np.isfinite(c) for c in xyz):
                    raise MeshLoadError(f"line {lineno}: non-finite vertex")
                positions.append(xyz)
            elif rec == "vt":
                if len(args) < 2:
                    raise MeshLoadError(f"line {lineno}: vt needs 2 components")
                try:
                    uv = [float(a) for a in args[:2]]
                except ValueError:
                    raise MeshLoadError(f"line {lineno}: bad uv component")
                for i, c in enumerate(uv):
                    if np.isnan(c):
                        raise MeshLoadError(f"line {lineno}: NaN uv component")
                    if c < 0.0 or c > 1.0:
                        uv[i] = min(max(c, 0.0), 1.0)
                        clamp_count += 1
                texcoords.append(uv)
            elif rec == "f":
                if len(args) < 3:
                    raise MeshLoadError(f"line {lineno}: face needs >= 3 corners")
                corners = [
                    _parse_face_corner(a, len(positions), len(texcoords), lineno)
                    for a in args
                ]
                for i in range(1, len(corners) - 1):
                    face_corners.append([corners[0], corners[i], corners[i + 1]])
            # vn, vp, o, g, s, usemtl, mtllib: ignored

    if face_corners and not texcoords:
        raise MeshLoadError(f"{path}: mesh has no texture coordinates")

    kept = []
    dropped = 0
    for tri in face_corners:
        v0, v1, v2 = (c[0] for c in tri)
        if v0 == v1 == v2:
            dropped += 1
            continue
        kept.append(tri)

    faces = np.array([[c[0] for c in tri] for tri in kept], dtype=np.int64).reshape(
        len(kept), 3
    )
    uv = np.array(
        [[texcoords[c[1]] for c in tri] for tri in kept], dtype=np.float64
    ).reshape(len(kept), 3, 2)
    vertices = np.array(positions, dtype=np.float64).reshape(len(positions), 3)
    return Mesh(vertices, faces, uv, uv_clamp_count=clamp_count, dropped_face_count=dropped)


def save_mesh(mesh: Mesh, path) -> None:
    """Write a mesh as OBJ with per-corner texture coordinates."""
    lines = []
    for x, y, z in mesh.vertices:
        lines.append(f"v {float(x)!r} {float(y)!r} {float(z)!r}")
    for f in range(mesh.n_faces):
        for c in range(3):
            u, v = mesh.uv_corners[f, c]
            lines.append(f"vt {float(u)!r} {float(v)!r}")
    for f in range(mesh.n_faces):
        a, b, c = mesh.faces[f] + 1
        t = 3 * f + 1
        lines.append(f"f {a}/{t} {b}/{t + 1} {c}/{t + 2}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


# ---------------------------------------------------------------------------
# Picking


def pick(mesh: Mesh, ray_origin, ray_dir, atlas_size=None, flip_v: bool = False):
    """Cast a ray against the mesh and return the nearest hit, or None.

    Moller-Trumbore over all faces, no back-face culling (flipped normals
    are common on sculpture scans; the nearest hit wins regardless of
    winding). Edge and vertex hits are accepted inclusively. Equal-distance
    ties go to the lowest face id.

    Args:
        mesh: Target mesh.
        ray_origin: (3,) ray origin.
        ray_dir: (3,) direction; normalized internally, must be non-zero.
        atlas_size: Optional (width, height); when given, the hit's texel
            index is filled in.
        flip_v: Atlas v-orientation flag (see module docstring).
    """
    origin = np.asarray(ray_origin, dtype=np.float64)
    direction = np.asarray(ray_dir, dtype=np.float64)
    norm = np.linalg.norm(direction)
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError("ray direction must be a non-zero finite vector")
    direction = direction / norm
    if mesh.n_faces == 0:
        return None

    v0 = mesh.vertices[mesh.faces[:, 0]]
    e1 = mesh.vertices[mesh.faces[:, 1]] - v0
    e2 = mesh.vertices[mesh.faces[:, 2]] - v0
    pvec = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    tvec = origin - v0
    qvec = np.cross(tvec, e1)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_det = 1.0 / det
        u = np.einsum("ij,ij->i", tvec, pvec) * inv_det
        v = qvec @ direction * inv_det
        t = np.einsum("ij,ij->i", e2, qvec) * inv_det
    hit = (
        np.isfinite(t)
        & (u >= -_BARY_EPS)
        & (v >= -_BARY_EPS)
        & (u + v <= 1.0 + _BARY_EPS)
        & (t > 0.0)
    )
    if not hit.any():
        return None
    t_masked = np.where(hit, t, np.inf)
    face_id = int(np.argmin(t_masked))  # exact ties resolve to the lowest id
    t_hit = t[face_id]
    weights = np.array([1.0 - u[face_id] - v[face_id], u[face_id], v[face_id]])
    weights = np.clip(weights, 0.0, None)
    weights /= weights.sum()
    point = origin + t_hit * direction
    uv = uv_of(mesh, face_id, weights)
    texel = None
    if atlas_size is not None:
        texel = uv_to_texel(uv, atlas_size[0], atlas_size[1], flip_v=flip_v)
    return PickResult(
        face_id=face_id, barycentric=weights, point3d=point, uv=uv, texel=texel
    )


def uv_of(mesh: Mesh, face_id: int, barycentric) -> np.ndarray:
    """Interpolate a face's uv corners at the given barycentric weights."""
    if not 0 <= face_id < mesh.n_faces:
        raise ValueError(f"face id {face_id} out of range (mesh has {mesh.n_faces})")
    w = np.asarray(barycentric, dtype=np.float64)
    if w.shape != (3,):
        raise ValueError("barycentric weights must have 3 components")
    if (w < 0.0).any() or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must be non-negative and sum to 1, got {w}")
    corners = mesh.uv_corners[face_id]
    return w[0] * corners[0] + w[1] * corners[1] + w[2] * corners[2]


def uv_to_texel(uv, width: int, height: int, flip_v: bool = False) -> tuple[int, int]:
    """Map a uv coordinate in [0, 1]^2 to its (col, row) texel index.

    col = min(floor(u * width), width - 1); the row mapping places v = 0 on
    the bottom texture row unless `flip_v` is set. Total on [0, 1]^2 and
    never out of range.
    """
    u, v = float(uv[0]), float(uv[1])
    if width < 1 or height < 1:
        raise ValueError("atlas dimensions must be >= 1")
    if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
        raise ValueError(f"uv ({u}, {v}) outside [0, 1]^2")
    col = min(int(np.floor(u * width)), width - 1)
    row_frac = v if flip_v else 1.0 - v
    row = min(int(np.floor(row_frac * height)), height - 1)
    return col, row


def texel_center_uv(
    col: int, row: int, width: int, height: int, flip_v: bool = False
) -> tuple[float, float]:
    """uv coordinate of a texel center (inverse of uv_to_texel up to rounding)."""
    if not (0 <= col < width and 0 <= row < height):
        raise ValueError(f"texel ({col}, {row}) outside {width}x{height}")
    u = (col + 0.5) / width
    frac = (row + 0.5) / height
    v = frac if flip_v else 1.0 - frac
    return u, v


# ---------------------------------------------------------------------------
# Occupancy rasterization
#
# A texel center q is owned by a triangle when, for all three edges of the
# positively-oriented triangle, the edge function
#     E(q) = (bx - ax) * (qy - ay) - (by - ay) * (qx - ax)
# is > 0, or == 0 on a top or left edge (y grows downward in pixel space:
# top edge: ay == by and bx > ax; left edge: by < ay). Overlapping uv
# triangles resolve to the lowest face id, which keeps the result
# independent of row partitioning.


def _pixel_corners(mesh: Mesh, width: int, height: int, flip_v: bool) -> np.ndarray:
    uv = mesh.uv_corners
    px = uv[:, :, 0] * width
    vfrac = uv[:, :, 1] if flip_v else 1.0 - uv[:, :, 1]
    py = vfrac * height
    return np.stack([px, py], axis=-1)  # (F, 3, 2)


def _edge_is_top_left(ax: float, ay: float, bx: float, by: float) -> bool:
    return (ay == by and bx > ax) or (by < ay)


def rasterize_occupancy(
    mesh: Mesh, width: int, height: int, flip_v: bool = False
) -> FaceIdMap:
    """Assign every texel center to the uv triangle containing it.

    Degenerate uv triangles (area below DEGENERATE_UV_AREA) are skipped and
    counted. Edge ties follow the top-left fill rule so each covered texel
    has exactly one owner.
    """
    if width < 1 or height < 1:
        raise ValueError("atlas dimensions must be >= 1")
    fid = np.full((height, width), NO_FACE, dtype=np.int32)
    if mesh.n_faces == 0:
        return FaceIdMap(fid, degenerate_count=0)

    corners = _pixel_corners(mesh, width, height, flip_v)
    uv = mesh.uv_corners
    uv_area2 = (uv[:, 1, 0] - uv[:, 0, 0]) * (uv[:, 2, 1] - uv[:, 0, 1]) - (
        uv[:, 1, 1] - uv[:, 0, 1]
    ) * (uv[:, 2, 0] - uv[:, 0, 0])
    degenerate = np.abs(uv_area2) / 2.0 < DEGENERATE_UV_AREA

    degenerate_count = 0
    for f in range(mesh.n_faces):
        if degenerate[f]:
            degenerate_count += 1
            continue
        p = corners[f]
        area2 = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (
            p[2, 0] - p[0, 0]
        )
        if area2 == 0.0:
            degenerate_count += 1
            continue
        if area2 < 0.0:
            p = p[[0, 2, 1]]

        # texel centers c + 0.5 within the uv bounding box
        c0 = max(int(np.ceil(p[:, 0].min() - 0.5)), 0)
        c1 = min(int(np.floor(p[:, 0].max() - 0.5)), width - 1)
        r0 = max(int(np.ceil(p[:, 1].min() - 0.5)), 0)
        r1 = min(int(np.floor(p[:, 1].max() - 0.5)), height - 1)
        if c0 > c1 or r0 > r1:
            continue
        qx = np.arange(c0, c1 + 1, dtype=np.float64) + 0.5
        qy = (np.arange(r0, r1 + 1, dtype=np.float64) + 0.5)[:, np.newaxis]

        inside = None
        for a, b in ((0, 1), (1, 2), (2, 0)):
            ax, ay = p[a]
            bx, by = p[b]
            e = (bx - ax) * (qy - ay) - (by - ay) * (qx - ax)
            if _edge_is_top_left(ax, ay, bx, by):
                ok = e >= 0.0
            else:
                ok = e > 0.0
            inside = ok if inside is None else (inside & ok)
        sub = fid[r0 : r1 + 1, c0 : c1 + 1]
        sub[inside & (sub == NO_FACE)] = f
    return FaceIdMap(fid, degenerate_count=degenerate_count)


def mask_to_faces(mask: np.ndarray, facemap: FaceIdMap, min_fraction: float) -> set[int]:
    """Faces whose owned texels are masked at ratio >= min_fraction.

    Faces owning zero texels are never selected.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != facemap.face_id.shape:
        raise ValueError(
            f"mask shape {mask.shape} != face map shape {facemap.face_id.shape}"
        )
    if not 0.0 <= min_fraction <= 1.0:
        raise ValueError(f"min_fraction must be in [0, 1], got {min_fraction}")
    ids = facemap.face_id
    owned_ids = ids[ids != NO_FACE]
    if owned_ids.size == 0:
        return set()
    owned = np.bincount(owned_ids)
    selected = np.bincount(ids[(ids != NO_FACE) & mask], minlength=owned.size)
    with np.errstate(invalid="ignore", divide="ignore"):
        keep = (owned > 0) & (selected / owned >= min_fraction)
    return set(int(i) for i in np.nonzero(keep)[0])
