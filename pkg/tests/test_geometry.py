import numpy as np
import pytest

from samtex.geometry import (
    NO_FACE,
    FaceIdMap,
    Mesh,
    MeshLoadError,
    load_mesh,
    mask_to_faces,
    pick,
    rasterize_occupancy,
    save_mesh,
    texel_center_uv,
    uv_of,
    uv_to_texel,
)


def write_obj(tmp_path, text, name="m.obj"):
    path = tmp_path / name
    path.write_text(text, encoding="ascii")
    return path


def single_triangle(z=0.0):
    vertices = np.array([[0, 0, z], [1, 0, z], [0, 1, z]], dtype=float)
    faces = np.array([[0, 1, 2]])
    uv = np.array([[[0, 0], [1, 0], [0, 1]]], dtype=float)
    return Mesh(vertices, faces, uv)


# ---------------------------------------------------------------------------
# Brute-force occupancy oracle: evaluates every texel center against every
# triangle on the full grid (no bounding boxes, no incremental fill), first
# owning face in ascending id order wins.


def brute_force_facemap(mesh, width, height, flip_v=False):
    fid = np.full((height, width), NO_FACE, dtype=np.int32)
    qx = np.arange(width, dtype=np.float64) + 0.5
    qy = (np.arange(height, dtype=np.float64) + 0.5)[:, None]
    degenerate = 0
    claims = np.zeros((height, width), dtype=np.int32)
    for f in range(mesh.n_faces):
        uv = mesh.uv_corners[f]
        area2_uv = (uv[1, 0] - uv[0, 0]) * (uv[2, 1] - uv[0, 1]) - (
            uv[1, 1] - uv[0, 1]
        ) * (uv[2, 0] - uv[0, 0])
        if abs(area2_uv) / 2.0 < 1e-12:
            degenerate += 1
            continue
        px = uv[:, 0] * width
        vfrac = uv[:, 1] if flip_v else 1.0 - uv[:, 1]
        py = vfrac * height
        p = np.stack([px, py], axis=-1)
        area2 = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (
            p[2, 0] - p[0, 0]
        )
        if area2 == 0.0:
            degenerate += 1
            continue
        if area2 < 0.0:
            p = p[[0, 2, 1]]
        inside = np.ones((height, width), dtype=bool)
        for a, b in ((0, 1), (1, 2), (2, 0)):
            ax, ay = p[a]
            bx, by = p[b]
            e = (bx - ax) * (qy - ay) - (by - ay) * (qx - ax)
            top_left = (ay == by and bx > ax) or (by < ay)
            inside &= (e >= 0.0) if top_left else (e > 0.0)
        claims += inside
        fid[inside & (fid == NO_FACE)] = f
    return fid, degenerate, claims


def random_uv_mesh(rng, n_faces):
    """Triangles with random uv; 3D positions mirror uv in the z=0 plane."""
    uv = rng.uniform(0, 1, size=(n_faces, 3, 2))
    vertices = np.concatenate(
        [uv.reshape(-1, 2), np.zeros((n_faces * 3, 1))], axis=1
    )
    faces = np.arange(n_faces * 3).reshape(n_faces, 3)
    return Mesh(vertices, faces, uv)


# ---------------------------------------------------------------------------
# Loading


def test_load_single_triangle(tmp_path):
    path = write_obj(
        tmp_path,
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf 1/1 2/2 3/3\n",
    )
    mesh = load_mesh(path)
    assert mesh.n_faces == 1 and mesh.n_vertices == 3
    assert mesh.uv_clamp_count == 0
    assert np.array_equal(mesh.uv_corners[0], [[0, 0], [1, 0], [0, 1]])


def test_load_clamps_out_of_range_uv(tmp_path):
    path = write_obj(
        tmp_path,
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1.25 0\nvt 0 1\nf 1/1 2/2 3/3\n",
    )
    mesh = load_mesh(path)
    assert mesh.uv_clamp_count == 1
    assert mesh.uv_corners[0, 1, 0] == 1.0


def test_load_rejects_out_of_range_vertex(tmp_path):
    path = write_obj(
        tmp_path,
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 99/1 2/1 3/1\n",
    )
    with pytest.raises(MeshLoadError, match="out of range"):
        load_mesh(path)


def test_load_rejects_missing_uv(tmp_path):
    path = write_obj(tmp_path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    with pytest.raises(MeshLoadError, match="uv|texture coordinate"):
        load_mesh(path)
    path2 = write_obj(
        tmp_path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n", "m2.obj"
    )
    with pytest.raises(MeshLoadError, match="uv|texture coordinate"):
        load_mesh(path2)


def test_load_fan_triangulates_quads(tmp_path):
    path = write_obj(
        tmp_path,
        "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
        "vt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\n"
        "f 1/1 2/2 3/3 4/4\n",
    )
    mesh = load_mesh(path)
    assert mesh.n_faces == 2
    assert np.array_equal(mesh.faces, [[0, 1, 2], [0, 2, 3]])


def test_load_negative_indices(tmp_path):
    path = write_obj(
        tmp_path,
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf -3/-3 -2/-2 -1/-1\n",
    )
    mesh = load_mesh(path)
    assert np.array_equal(mesh.faces, [[0, 1, 2]])


def test_load_drops_point_degenerate_faces(tmp_path):
    path = write_obj(
        tmp_path,
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\n"
        "f 1/1 1/2 1/3\nf 1/1 2/2 3/3\n",
    )
    mesh = load_mesh(path)
    assert mesh.n_faces == 1
    assert mesh.dropped_face_count == 1


def test_load_rejects_nan_uv(tmp_path):
    path = write_obj(
        tmp_path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt nan 0\nvt 1 0\nvt 0 1\nf 1/1 2/2 3/3\n"
    )
    with pytest.raises(MeshLoadError, match="NaN"):
        load_mesh(path)


def test_save_load_roundtrip(tmp_path, rng):
    mesh = random_uv_mesh(rng, 7)
    save_mesh(mesh, tmp_path / "rt.obj")
    back = load_mesh(tmp_path / "rt.obj")
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.faces, mesh.faces)
    assert np.array_equal(back.uv_corners, mesh.uv_corners)


# ---------------------------------------------------------------------------
# Picking


def test_pick_basic_hit():
    mesh = single_triangle()
    hit = pick(mesh, (0.25, 0.25, 1.0), (0, 0, -1))
    assert hit is not None and hit.face_id == 0
    assert np.allclose(hit.point3d, [0.25, 0.25, 0.0], atol=1e-12)
    assert np.allclose(hit.barycentric, [0.5, 0.25, 0.25], atol=1e-12)


def test_pick_parallel_ray_misses():
    mesh = single_triangle()
    assert pick(mesh, (0, 0, 1.0), (1, 0, 0)) is None


def test_pick_nearest_of_stacked_faces():
    vertices = np.array(
        [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 0.5], [1, 0, 0.5], [0, 1, 0.5]],
        dtype=float,
    )
    faces = np.array([[0, 1, 2], [3, 4, 5]])
    uv = np.tile(np.array([[[0, 0], [1, 0], [0, 1]]], dtype=float), (2, 1, 1))
    mesh = Mesh(vertices, faces, uv)
    hit = pick(mesh, (0.25, 0.25, 1.0), (0, 0, -1))
    assert hit.face_id == 1
    assert hit.point3d[2] == pytest.approx(0.5)


def test_pick_ignores_winding():
    vertices = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
    flipped = Mesh(
        vertices, np.array([[0, 2, 1]]), np.array([[[0, 0], [0, 1], [1, 0]]], float)
    )
    assert pick(flipped, (0.25, 0.25, 1.0), (0, 0, -1)) is not None


def test_pick_normalizes_direction_and_rejects_zero():
    mesh = single_triangle()
    hit = pick(mesh, (0.25, 0.25, 1.0), (0, 0, -10.0))
    assert hit.point3d[2] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError, match="non-zero"):
        pick(mesh, (0, 0, 1), (0, 0, 0))


def test_pick_empty_mesh():
    mesh = Mesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int), np.zeros((0, 3, 2)))
    assert pick(mesh, (0, 0, 1), (0, 0, -1)) is None


def test_pick_fills_texel_when_atlas_given():
    mesh = single_triangle()
    hit = pick(mesh, (0.25, 0.25, 1.0), (0, 0, -1), atlas_size=(8, 8))
    assert hit.texel == uv_to_texel(hit.uv, 8, 8)


def test_pick_round_trip_on_disjoint_grid(rng):
    from samtex.fixture import _grid_mesh

    mesh = _grid_mesh(5, 4)
    for _ in range(50):
        face = int(rng.integers(mesh.n_faces))
        w = rng.dirichlet([2.0, 2.0, 2.0])
        target = (
            w[0] * mesh.vertices[mesh.faces[face, 0]]
            + w[1] * mesh.vertices[mesh.faces[face, 1]]
            + w[2] * mesh.vertices[mesh.faces[face, 2]]
        )
        hit = pick(mesh, target + np.array([0, 0, 1.0]), (0, 0, -1))
        assert hit is not None
        if hit.face_id != face:
            continue  # hit landed on a shared edge; ownership tie is fine
        assert np.allclose(hit.barycentric, w, atol=1e-6)
        assert np.allclose(hit.point3d, target, atol=1e-6)


# ---------------------------------------------------------------------------
# uv interpolation and texel mapping


def test_uv_of_vertex_weights_exact():
    mesh = single_triangle()
    for corner, w in enumerate(np.eye(3)):
        assert np.array_equal(uv_of(mesh, 0, w), mesh.uv_corners[0, corner])


def test_uv_of_centroid_and_interpolation():
    mesh = single_triangle()
    third = 1.0 / 3.0
    assert np.allclose(uv_of(mesh, 0, [third] * 3), [third, third], atol=1e-15)
    assert np.allclose(uv_of(mesh, 0, [0.5, 0.25, 0.25]), [0.25, 0.25], atol=1e-15)


def test_uv_of_validation():
    mesh = single_triangle()
    with pytest.raises(ValueError, match="face id"):
        uv_of(mesh, 5, [1, 0, 0])
    with pytest.raises(ValueError, match="sum to 1"):
        uv_of(mesh, 0, [0.5, 0.5, 0.5])
    with pytest.raises(ValueError, match="non-negative|sum"):
        uv_of(mesh, 0, [1.5, -0.5, 0.0])


def test_uv_to_texel_corners_8192():
    assert uv_to_texel((0, 1), 8192, 8192) == (0, 0)
    assert uv_to_texel((1, 0), 8192, 8192) == (8191, 8191)
    assert uv_to_texel((0.5, 0.5), 8192, 8192) == (4096, 4096)


def test_uv_to_texel_total_and_in_range(rng):
    for _ in range(500):
        u, v = rng.uniform(0, 1, 2)
        w = int(rng.integers(1, 64))
        h = int(rng.integers(1, 64))
        col, row = uv_to_texel((u, v), w, h)
        assert 0 <= col < w and 0 <= row < h


def test_uv_to_texel_flip_v():
    assert uv_to_texel((0, 0), 4, 4, flip_v=True) == (0, 0)
    assert uv_to_texel((0, 1), 4, 4, flip_v=True) == (0, 3)


def test_texel_center_uv_roundtrip(rng):
    for flip in (False, True):
        for _ in range(100):
            w = int(rng.integers(1, 32))
            h = int(rng.integers(1, 32))
            col = int(rng.integers(w))
            row = int(rng.integers(h))
            uv = texel_center_uv(col, row, w, h, flip_v=flip)
            assert uv_to_texel(uv, w, h, flip_v=flip) == (col, row)


# ---------------------------------------------------------------------------
# Rasterization


def test_rasterize_lower_left_half_matches_oracle():
    vertices = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
    mesh = Mesh(
        vertices, np.array([[0, 1, 2]]), np.array([[[0, 0], [1, 0], [0, 1]]], float)
    )
    fm = rasterize_occupancy(mesh, 4, 4)
    oracle, deg, claims = brute_force_facemap(mesh, 4, 4)
    assert np.array_equal(fm.face_id, oracle)
    assert fm.degenerate_count == deg == 0
    # the lower-left uv half covers strictly below the anti-diagonal
    assert fm.face_id[3, 0] == 0  # bottom-left texel
    assert fm.face_id[0, 3] == NO_FACE


def test_rasterize_empty_mesh_all_none():
    mesh = Mesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int), np.zeros((0, 3, 2)))
    fm = rasterize_occupancy(mesh, 5, 3)
    assert (fm.face_id == NO_FACE).all()


def test_rasterize_shared_edge_through_centers_single_owner():
    # unit-square quad split along the diagonal, which passes exactly
    # through the 4x4 texel centers
    vertices = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
    faces = np.array([[0, 1, 2], [0, 2, 3]])
    uv = np.array(
        [[[0, 0], [1, 0], [1, 1]], [[0, 0], [1, 1], [0, 1]]], dtype=float
    )
    mesh = Mesh(vertices, faces, uv)
    fm = rasterize_occupancy(mesh, 4, 4)
    oracle, _, claims = brute_force_facemap(mesh, 4, 4)
    assert np.array_equal(fm.face_id, oracle)
    assert (fm.face_id != NO_FACE).all()  # full coverage
    assert claims.max() == 1  # no texel claimed twice under the tie rule


def test_rasterize_degenerate_faces_skipped():
    vertices = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
    faces = np.array([[0, 1, 2], [0, 1, 2]])
    uv = np.array(
        [[[0.2, 0.2], [0.8, 0.2], [0.2, 0.2]], [[0, 0], [1, 0], [0, 1]]], dtype=float
    )
    mesh = Mesh(vertices, faces, uv)
    fm = rasterize_occupancy(mesh, 8, 8)
    assert fm.degenerate_count == 1
    assert set(np.unique(fm.face_id)) == {NO_FACE, 1}


def test_rasterize_matches_oracle_on_random_meshes(rng):
    for _ in range(10):
        mesh = random_uv_mesh(rng, int(rng.integers(1, 51)))
        fm = rasterize_occupancy(mesh, 64, 64)
        oracle, deg, _ = brute_force_facemap(mesh, 64, 64)
        assert np.array_equal(fm.face_id, oracle)
        assert fm.degenerate_count == deg


def test_rasterize_flip_v():
    vertices = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
    mesh = Mesh(
        vertices,
        np.array([[0, 1, 2]]),
        np.array([[[0, 0], [0.5, 0], [0, 0.5]]], float),
    )
    fm = rasterize_occupancy(mesh, 4, 4)
    fm_flipped = rasterize_occupancy(mesh, 4, 4, flip_v=True)
    assert np.array_equal(fm.face_id, fm_flipped.face_id[::-1])


# ---------------------------------------------------------------------------
# mask_to_faces


def make_facemap(ids):
    return FaceIdMap(np.asarray(ids, dtype=np.int32))


def test_mask_to_faces_full_face():
    ids = np.full((4, 4), NO_FACE)
    ids[1:3, 1:3] = 7
    fm = make_facemap(ids)
    mask = ids == 7
    assert mask_to_faces(mask, fm, 1.0) == {7}


def test_mask_to_faces_empty_mask():
    ids = np.zeros((4, 4))
    fm = make_facemap(ids)
    assert mask_to_faces(np.zeros((4, 4), bool), fm, 0.5) == set()


def test_mask_to_faces_threshold_boundary():
    ids = np.full((2, 10), NO_FACE)
    ids[0, :10] = 3  # face 3 owns 10 texels
    fm = make_facemap(ids)
    mask = np.zeros((2, 10), bool)
    mask[0, :4] = True  # 4 of 10 masked
    assert mask_to_faces(mask, fm, 0.5) == set()
    assert mask_to_faces(mask, fm, 0.4) == {3}


def test_mask_to_faces_dimension_mismatch():
    fm = make_facemap(np.zeros((2, 2)))
    with pytest.raises(ValueError, match="shape"):
        mask_to_faces(np.zeros((3, 3), bool), fm, 0.5)


def test_mask_to_faces_zero_owner_never_selected():
    fm = make_facemap(np.full((2, 2), NO_FACE))
    assert mask_to_faces(np.ones((2, 2), bool), fm, 0.0) == set()
