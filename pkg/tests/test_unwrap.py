"""Cube-projection unwrapping: face choice, layering, packing, layout IO."""

from dataclasses import replace

import numpy as np
import pytest

from conftest import box_mesh, flat_quad, uv_sphere
from meshbake.mesh import IndexedMesh, MeshError, face_normals, make_mesh
from meshbake.tetra import make_grid, marching_tetrahedra, sample_grid, sdf_torus
from meshbake.unwrap import (
    FACE_AXES,
    FACE_U,
    FACE_V,
    Layer,
    UnwrapConfig,
    UvLayout,
    align_dominant_axes,
    assign_cube_faces,
    detect_occlusions,
    layout_atlas,
    layout_to_svg,
    load_layout,
    project_to_face,
    save_layout,
    signed_uv_areas,
    triangles_overlap_2d,
    unwrap,
)


# ------------------------------------------------------- independent oracles

def clip_overlap_area(tri_a, tri_b):
    """Intersection area via Sutherland-Hodgman clipping (tri_b must be CCW)."""
    poly = [tuple(p) for p in np.asarray(tri_a, dtype=float)]
    b = np.asarray(tri_b, dtype=float)
    for k in range(3):
        if not poly:
            break
        p0, p1 = b[k], b[(k + 1) % 3]
        nx, ny = -(p1[1] - p0[1]), p1[0] - p0[0]  # CCW interior is >= 0 side

        def side(pt):
            return nx * (pt[0] - p0[0]) + ny * (pt[1] - p0[1])

        out = []
        prev = poly[-1]
        dprev = side(prev)
        for cur in poly:
            dcur = side(cur)
            if dcur >= 0.0:
                if dprev < 0.0:
                    t = dprev / (dprev - dcur)
                    out.append(
                        (prev[0] + t * (cur[0] - prev[0]),
                         prev[1] + t * (cur[1] - prev[1]))
                    )
                out.append(cur)
            elif dprev >= 0.0:
                t = dprev / (dprev - dcur)
                out.append(
                    (prev[0] + t * (cur[0] - prev[0]),
                     prev[1] + t * (cur[1] - prev[1]))
                )
            prev, dprev = cur, dcur
        poly = out
    area = 0.0
    for (x0, y0), (x1, y1) in zip(poly, poly[1:] + poly[:1]):
        area += x0 * y1 - x1 * y0
    return 0.5 * abs(area)


def point_in_triangle(point, tri, eps=1e-12):
    """Strict interior test via CCW edge half-planes."""
    p = np.asarray(point, dtype=float)
    t = np.asarray(tri, dtype=float)
    for k in range(3):
        e = t[(k + 1) % 3] - t[k]
        n = np.array([-e[1], e[0]])
        if n @ (p - t[k]) <= eps:
            return False
    return True


def assert_zero_overlaps(layout):
    """Exhaustive-within-reach pairwise intersection scan over final UVs.

    A uniform grid over triangle centers (cell = 2 * max radius) is a
    provably sound candidate superset; survivors of a bbox check go
    through the exact clipping-area oracle.
    """
    uv = layout.corner_uvs
    centers = uv.mean(axis=1)
    radii = np.linalg.norm(uv - centers[:, None, :], axis=2).max(axis=1)
    cell = max(2.0 * float(radii.max()), 1e-9)
    grid = {}
    for idx, key in enumerate(map(tuple, np.floor(centers / cell).astype(int))):
        grid.setdefault(key, []).append(idx)

    lo = uv.min(axis=1)
    hi = uv.max(axis=1)
    checked = 0
    for (cx, cy), members in grid.items():
        neighborhood = []
        for ox in (-1, 0, 1):
            for oy in (-1, 0, 1):
                neighborhood.extend(grid.get((cx + ox, cy + oy), ()))
        for i in members:
            for j in neighborhood:
                if j <= i:
                    continue
                if (lo[i, 0] >= hi[j, 0] or lo[j, 0] >= hi[i, 0]
                        or lo[i, 1] >= hi[j, 1] or lo[j, 1] >= hi[i, 1]):
                    continue
                area = clip_overlap_area(uv[i], uv[j])
                assert area <= 1e-12, (
                    f"triangles {i} and {j} overlap with area {area}"
                )
                checked += 1
    return checked


def oriented_triangle_positions(normal):
    """One CCW triangle whose geometric normal is exactly `normal`."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    helper = np.array([1.0, 0.0, 0.0])
    if abs(n @ helper) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    a = np.cross(n, helper)
    a /= np.linalg.norm(a)
    b = np.cross(n, a)
    return np.stack([np.zeros(3), a, b])


def stacked_quads(count):
    """`count` unit quads facing +Z; quad k sits at z = -k (0 is nearest)."""
    base = flat_quad()
    positions = []
    indices = []
    for k in range(count):
        offset = np.array([0.0, 0.0, -float(k)])
        positions.append(base.positions + offset)
        indices.append(base.indices + 4 * k)
    return make_mesh(np.concatenate(positions), np.concatenate(indices))


def octahedron():
    """Regular octahedron: exactly isotropic area-weighted normal covariance."""
    positions = np.array(
        [
            [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0], [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0], [0.0, 0.0, -1.0],
        ]
    )
    indices = np.array(
        [
            [0, 2, 4], [1, 4, 2], [0, 4, 3], [1, 3, 4],
            [0, 5, 2], [1, 2, 5], [0, 3, 5], [1, 5, 3],
        ]
    )
    return make_mesh(positions, indices)


# ------------------------------------------------------------------ fixtures

def test_box_helper_is_closed_and_outward():
    mesh = box_mesh()
    tri = mesh.positions[mesh.indices]
    volume = np.einsum(
        "ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])
    ).sum() / 6.0
    assert volume == pytest.approx(1.0, rel=1e-12)
    normals = face_normals(mesh)
    assert np.allclose(np.abs(normals).max(axis=1), 1.0, atol=1e-12)


def test_face_frames_are_right_handed():
    for f in range(6):
        assert np.allclose(np.cross(FACE_U[f], FACE_V[f]), FACE_AXES[f])
        assert np.isclose(np.linalg.norm(FACE_U[f]), 1.0)
        assert np.isclose(FACE_U[f] @ FACE_V[f], 0.0)


def test_side_faces_map_world_z_to_plus_v():
    # +-X and +-Y islands keep world +Z pointing along atlas +V.
    for f in range(4):
        assert np.allclose(FACE_V[f], [0.0, 0.0, 1.0])
    assert np.allclose(FACE_U[4], [1.0, 0.0, 0.0])
    assert np.allclose(FACE_U[5], [1.0, 0.0, 0.0])


# ---------------------------------------------------------------------- config

def test_config_rejects_overlapping_regions():
    bad = UnwrapConfig(occlusion_region=(0.0, 0.5, 0.5, 1.0),
                       remainder_region=(0.4, 0.6, 1.0, 1.0))
    with pytest.raises(MeshError, match="overlap"):
        bad.validate()


def test_config_rejects_malformed_boxes_and_scalars():
    with pytest.raises(MeshError, match="box"):
        UnwrapConfig(visible_region=(0.5, 0.0, 0.2, 0.5)).validate()
    with pytest.raises(MeshError, match="slack"):
        UnwrapConfig(proximity_slack=0.9).validate()
    with pytest.raises(MeshError, match="padding"):
        UnwrapConfig(island_padding=-0.01).validate()
    with pytest.raises(MeshError, match="threshold"):
        UnwrapConfig(normal_threshold=1.0).validate()
    with pytest.raises(MeshError, match="cell"):
        UnwrapConfig(remainder_min_cell=0.0).validate()


def test_default_regions_cover_expected_bands():
    config = UnwrapConfig()
    config.validate()
    assert config.visible_region == (0.0, 0.0, 1.0, 2.0 / 3.0)
    assert config.occlusion_region == (0.0, 2.0 / 3.0, 1.0 / 3.0, 1.0)
    assert config.remainder_region == (1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0)


# ------------------------------------------------------------ face assignment

def test_axis_aligned_normals_pick_their_faces():
    tris = [oriented_triangle_positions(a) for a in FACE_AXES]
    positions = np.concatenate(tris)
    indices = np.arange(18).reshape(6, 3)
    faces = assign_cube_faces(make_mesh(positions, indices))
    assert faces.tolist() == [0, 1, 2, 3, 4, 5]


def test_ties_prefer_earlier_axis():
    cases = [
        (np.array([1.0, 1.0, 0.0]), 0),   # +X beats +Y
        (np.array([0.0, 1.0, 1.0]), 2),   # +Y beats +Z
        (np.array([-1.0, 0.0, 1.0]), 1),  # -X beats +Z
    ]
    for normal, expected in cases:
        mesh = make_mesh(oriented_triangle_positions(normal), [[0, 1, 2]])
        assert assign_cube_faces(mesh)[0] == expected


def test_flat_quad_assigns_plus_z():
    assert assign_cube_faces(flat_quad()).tolist() == [4, 4]


def test_degenerate_triangle_inherits_neighbor_face():
    positions = np.array(
        [
            [0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.5, 0.5],  # on the (1, 2) edge: triangle 1 is degenerate
        ]
    )
    mesh = make_mesh(positions, [[0, 1, 2], [1, 3, 2]])
    assert assign_cube_faces(mesh).tolist() == [0, 0]


def test_isolated_degenerate_triangle_falls_back_to_plus_z():
    positions = np.array(
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]
    )
    mesh = make_mesh(positions, [[0, 1, 2]])
    assert assign_cube_faces(mesh).tolist() == [4]


def test_sphere_assignment_matches_bruteforce_argmax():
    mesh = uv_sphere(rings=10, segments=20)
    faces = assign_cube_faces(mesh)
    normals = face_normals(mesh)
    for t in range(mesh.num_triangles):
        best_face, best_dot = 0, -np.inf
        for f in range(6):
            d = normals[t] @ FACE_AXES[f]
            if d > best_dot:
                best_face, best_dot = f, d
        assert faces[t] == best_face
    for f in range(6):
        members = faces == f
        assert np.any(members)
        mean = normals[members].mean(axis=0)
        mean /= np.linalg.norm(mean)
        assert mean @ FACE_AXES[f] >= np.cos(np.radians(45.0))


# ------------------------------------------------------------- 2D overlap test

def test_overlap_hand_cases():
    a = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    same = np.stack([a, a])
    shifted = a + np.array([2.0, 0.0])
    inner = np.array([[0.1, 0.1], [0.3, 0.1], [0.1, 0.3]])
    shared_edge = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    corner_touch = np.array([[1.0, 0.0], [2.0, 0.0], [1.0, 1.0]])
    sliver = np.array([[-0.5, 0.2], [1.5, 0.2], [0.5, 0.2]])  # collinear

    pairs_b = np.stack([a, shifted, inner, shared_edge, corner_touch, sliver])
    pairs_a = np.stack([a] * 6)
    got = triangles_overlap_2d(pairs_a, pairs_b, eps=1e-9)
    assert got.tolist() == [True, False, True, False, False, False]
    assert clip_overlap_area(a, a) == pytest.approx(0.5)
    assert clip_overlap_area(a, shared_edge) <= 1e-15
    assert clip_overlap_area(inner, a) == pytest.approx(0.02)


def test_overlap_agrees_with_clipping_oracle(rng):
    tri_a, tri_b = [], []
    for _ in range(500):
        a = rng.uniform(0.0, 1.0, size=(3, 2))
        b = rng.uniform(0.0, 1.0, size=(3, 2)) + rng.uniform(-0.8, 0.8, size=2)
        for t in (a, b):
            if signed_uv_areas(t[None])[0] < 0.0:
                t[[1, 2]] = t[[2, 1]]
        tri_a.append(a)
        tri_b.append(b)
    tri_a, tri_b = np.stack(tri_a), np.stack(tri_b)
    got = triangles_overlap_2d(tri_a, tri_b, eps=1e-9)
    for k in range(len(tri_a)):
        area = clip_overlap_area(tri_a[k], tri_b[k])
        if area > 1e-8:
            assert got[k], f"pair {k}: clip area {area} but no overlap reported"
        elif area < 1e-14:
            assert not got[k], f"pair {k}: clip area {area} but overlap reported"


# ----------------------------------------------------------------- occlusions

def test_single_quad_all_visible():
    mesh = flat_quad()
    layers = detect_occlusions(mesh, assign_cube_faces(mesh))
    assert layers.tolist() == [Layer.VISIBLE, Layer.VISIBLE]


def test_two_stacked_quads_layering():
    mesh = stacked_quads(2)
    layers = detect_occlusions(mesh, assign_cube_faces(mesh))
    assert layers[:2].tolist() == [Layer.VISIBLE, Layer.VISIBLE]
    assert layers[2:].tolist() == [Layer.FIRST_OCCLUSION, Layer.FIRST_OCCLUSION]


def covering_layers_oracle(mesh, faces):
    """Expected layer = min(#strictly nearer triangles over the centroid, 2)."""
    tri = mesh.positions[mesh.indices]
    layers = np.zeros(len(faces), dtype=int)
    for f in range(6):
        ids = np.nonzero(faces == f)[0]
        uv = project_to_face(tri[ids], f)
        depth = tri[ids].mean(axis=1) @ FACE_AXES[f]
        for i, t in enumerate(ids):
            centroid = uv[i].mean(axis=0)
            hits = sum(
                1
                for j in range(len(ids))
                if j != i and depth[j] > depth[i]
                and point_in_triangle(centroid, uv[j])
            )
            layers[t] = min(hits, 2)
    return layers


def test_three_stacked_quads_match_ray_oracle():
    mesh = stacked_quads(3)
    faces = assign_cube_faces(mesh)
    expected = covering_layers_oracle(mesh, faces)
    assert expected[:2].tolist() == [0, 0]
    assert expected[2:4].tolist() == [1, 1]
    assert expected[4:].tolist() == [2, 2]
    got = detect_occlusions(mesh, faces)
    assert got.tolist() == expected.tolist()


def test_coplanar_depth_tie_resolves_by_lower_index():
    positions = np.array(
        [
            [0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 2.0, 0.0],
            [0.5, 0.5, 0.0], [2.5, 0.5, 0.0], [0.5, 2.5, 0.0],
        ]
    )
    mesh = make_mesh(positions, [[0, 1, 2], [3, 4, 5]])
    layers = detect_occlusions(mesh, assign_cube_faces(mesh))
    assert layers.tolist() == [Layer.VISIBLE, Layer.FIRST_OCCLUSION]


def test_box_and_sphere_have_no_occlusion():
    for mesh in (box_mesh(), uv_sphere(rings=10, segments=20)):
        layers = detect_occlusions(mesh, assign_cube_faces(mesh))
        assert np.all(layers == Layer.VISIBLE)


def test_proximity_filter_is_only_an_accelerator(rng):
    mesh = uv_sphere(rings=8, segments=16)
    noisy = make_mesh(
        mesh.positions + rng.normal(scale=0.05, size=mesh.positions.shape),
        mesh.indices,
    )
    for probe in (noisy, stacked_quads(3)):
        faces = assign_cube_faces(probe)
        tight = detect_occlusions(probe, faces, UnwrapConfig())
        loose = detect_occlusions(
            probe, faces, replace(UnwrapConfig(), proximity_slack=1e9)
        )
        assert np.array_equal(tight, loose)


# ------------------------------------------------------------------ alignment

def test_alignment_identity_for_axis_aligned_unequal_box():
    mesh = box_mesh((1.0, 1.4, 2.2))
    aligned, rotation, flagged = align_dominant_axes(mesh)
    assert not flagged
    assert np.allclose(rotation, np.eye(3), atol=1e-9)
    assert np.allclose(aligned.positions, mesh.positions)


def test_alignment_recovers_rotated_box():
    mesh = box_mesh((1.0, 1.4, 2.2))
    angle = np.radians(30.0)
    c, s = np.cos(angle), np.sin(angle)
    rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    rotated = make_mesh(mesh.positions @ rz.T, mesh.indices)

    aligned, rotation, flagged = align_dominant_axes(rotated)
    assert not flagged
    assert np.linalg.det(rotation) == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(rotation @ rotation.T, np.eye(3), atol=1e-9)
    # Inverse rotation recovers the input.
    assert np.allclose(aligned.positions @ rotation, rotated.positions,
                       atol=1e-9)
    # Face normals are axis-aligned again (modulo the box's 90 degree symmetry).
    normals = face_normals(aligned)
    assert np.allclose(np.abs(normals).max(axis=1), 1.0, atol=1e-6)


def test_alignment_flags_isotropic_shapes():
    for mesh in (box_mesh(), octahedron()):
        aligned, rotation, flagged = align_dominant_axes(mesh)
        assert flagged
        assert np.allclose(rotation, np.eye(3))
        assert np.allclose(aligned.positions, mesh.positions)


def test_alignment_rotates_vertex_normals_too():
    mesh = flat_quad()
    normals = np.tile([0.0, 0.0, 1.0], (4, 1))
    mesh = replace(mesh, vertex_normals=normals)
    aligned, rotation, _ = align_dominant_axes(mesh)
    assert np.allclose(aligned.vertex_normals, normals @ rotation.T)
    aligned.validate()


# ------------------------------------------------------------------- layouts

def in_region(uvs, region, tol=1e-9):
    u0, v0, u1, v1 = region
    u = uvs[..., 0]
    v = uvs[..., 1]
    return bool(
        np.all(u >= u0 - tol) and np.all(u <= u1 + tol)
        and np.all(v >= v0 - tol) and np.all(v <= v1 + tol)
    )


def test_unwrap_flat_quad_layout():
    layout = unwrap(flat_quad())
    layout.validate()
    assert np.all(layout.triangle_layer == Layer.VISIBLE)
    assert in_region(layout.corner_uvs, UnwrapConfig().visible_region)
    assert np.all(signed_uv_areas(layout.corner_uvs) > 0.0)


def test_unwrap_conformality_on_flat_patch():
    mesh = flat_quad()
    layout = unwrap(mesh)
    tri3d = mesh.positions[mesh.indices]
    ratios = []
    for t in range(mesh.num_triangles):
        for k in range(3):
            d3 = np.linalg.norm(tri3d[t, (k + 1) % 3] - tri3d[t, k])
            d2 = np.linalg.norm(
                layout.corner_uvs[t, (k + 1) % 3] - layout.corner_uvs[t, k]
            )
            ratios.append(d2 / d3)
    ratios = np.asarray(ratios)
    assert np.all(np.abs(ratios / ratios[0] - 1.0) < 1e-6)


def test_unwrap_box_six_visible_islands_with_area():
    layout = unwrap(box_mesh())
    layout.validate()
    assert np.all(layout.triangle_layer == Layer.VISIBLE)
    assert sorted(np.unique(layout.triangle_cube_face)) == [0, 1, 2, 3, 4, 5]
    assert_zero_overlaps(layout)
    total_area = signed_uv_areas(layout.corner_uvs).sum()
    assert total_area >= 0.30


def test_stacked_quads_land_in_their_regions():
    config = UnwrapConfig()
    layout = unwrap(stacked_quads(3), config)
    layout.validate()
    assert layout.triangle_layer.tolist() == [0, 0, 1, 1, 2, 2]
    assert in_region(layout.corner_uvs[:2], config.visible_region)
    assert in_region(layout.corner_uvs[2:4], config.occlusion_region)
    assert in_region(layout.corner_uvs[4:], config.remainder_region)
    assert_zero_overlaps(layout)


def test_empty_mesh_raises():
    mesh = IndexedMesh(
        positions=np.zeros((0, 3)), indices=np.zeros((0, 3), dtype=np.int32)
    )
    with pytest.raises(MeshError, match="empty mesh"):
        unwrap(mesh)


def test_hundred_loose_remainder_triangles_form_square_grid():
    count = 100
    positions = []
    for k in range(count):
        positions += [
            [2.0 * k, 0.0, 0.0], [2.0 * k + 1.0, 0.0, 0.0], [2.0 * k, 1.0, 0.0]
        ]
    mesh = make_mesh(np.array(positions), np.arange(3 * count).reshape(-1, 3))
    config = UnwrapConfig(
        visible_region=(0.0, 0.0, 1.0, 0.5),
        occlusion_region=(0.0, 0.5, 0.5, 1.0),
        remainder_region=(0.5, 0.5, 1.0, 1.0),
    )
    layers = np.full(count, Layer.REMAINDER, dtype=np.uint8)
    faces = np.full(count, 4, dtype=np.int8)
    layout = layout_atlas(mesh, layers, faces, config)

    u0, v0, u1, v1 = config.remainder_region
    cw = (u1 - u0) / 10.0
    ch = (v1 - v0) / 10.0
    for k in range(count):
        col, row = k % 10, k // 10
        cell = (u0 + col * cw, v0 + row * ch, u0 + (col + 1) * cw,
                v0 + (row + 1) * ch)
        assert in_region(layout.corner_uvs[k], cell), f"triangle {k} left its cell"


def test_remainder_grid_overflow_reports_count():
    mesh = stacked_quads(1)
    layers = np.full(2, Layer.REMAINDER, dtype=np.uint8)
    faces = np.full(2, 4, dtype=np.int8)
    config = UnwrapConfig(remainder_min_cell=0.5)
    with pytest.raises(MeshError, match="2 triangles"):
        layout_atlas(mesh, layers, faces, config)


def test_normal_threshold_forces_remainder():
    # The quad dominates the alignment covariance, so the slanted
    # triangle keeps its diagonal normal after alignment.
    quad = flat_quad()
    slanted = oriented_triangle_positions([1.0, 1.0, 1.0]) + np.array(
        [50.0, 0.0, 0.0]
    )
    mesh = make_mesh(
        np.concatenate([quad.positions * 10.0, slanted]),
        np.concatenate([quad.indices, [[4, 5, 6]]]),
    )
    layout = unwrap(mesh, UnwrapConfig(normal_threshold=0.9))
    assert layout.triangle_layer[:2].tolist() == [Layer.VISIBLE, Layer.VISIBLE]
    assert layout.triangle_layer[2] == Layer.REMAINDER


def test_unwrap_noisy_sphere_has_zero_overlaps(rng):
    mesh = uv_sphere(rings=12, segments=24)
    noisy = make_mesh(
        mesh.positions + rng.normal(scale=0.08, size=mesh.positions.shape),
        mesh.indices,
    )
    layout = unwrap(noisy)
    layout.validate()
    checked = assert_zero_overlaps(layout)
    assert checked > 0  # the scan actually exercised adjacent pairs


def test_unwrap_extracted_torus_zero_overlaps_and_determinism():
    field = sdf_torus(major=0.6, minor=0.25)
    grid = sample_grid(field, 32)
    mesh = marching_tetrahedra(grid)
    layout = unwrap(mesh)
    layout.validate()
    assert_zero_overlaps(layout)

    again = unwrap(mesh)
    threaded = unwrap(mesh, threads=4)
    for other in (again, threaded):
        assert layout.corner_uvs.tobytes() == other.corner_uvs.tobytes()
        assert np.array_equal(layout.triangle_layer, other.triangle_layer)
        assert np.array_equal(layout.triangle_cube_face, other.triangle_cube_face)


def test_layout_validate_rejects_bad_data():
    good = unwrap(flat_quad())
    flipped = replace(good, corner_uvs=good.corner_uvs[:, ::-1, :].copy())
    with pytest.raises(MeshError, match="flipped"):
        flipped.validate()
    outside = replace(good, corner_uvs=good.corner_uvs + 2.0)
    with pytest.raises(MeshError, match="out of"):
        outside.validate()


# ----------------------------------------------------------------- IO and SVG

def test_layout_roundtrip_and_determinism(tmp_path):
    layout = unwrap(box_mesh())
    path = tmp_path / "box.uvl"
    save_layout(path, layout)
    save_layout(tmp_path / "box2.uvl", layout)
    assert path.read_bytes() == (tmp_path / "box2.uvl").read_bytes()

    loaded = load_layout(path)
    assert np.array_equal(loaded.corner_uvs, layout.corner_uvs)
    assert np.array_equal(loaded.triangle_layer, layout.triangle_layer)
    assert np.array_equal(loaded.triangle_cube_face, layout.triangle_cube_face)
    assert np.array_equal(loaded.alignment_rotation, layout.alignment_rotation)
    assert loaded.isotropy_flagged == layout.isotropy_flagged


def test_layout_load_rejects_truncated_blob(tmp_path):
    layout = unwrap(flat_quad())
    path = tmp_path / "quad.uvl"
    save_layout(path, layout)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(MeshError, match="bytes"):
        load_layout(path)


def test_svg_dump_contains_every_triangle():
    layout = unwrap(box_mesh())
    svg = layout_to_svg(layout)
    assert svg.startswith("<svg")
    assert svg.count("<polygon") == layout.num_triangles
