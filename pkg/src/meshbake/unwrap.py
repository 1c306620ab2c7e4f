"""Cube-projection UV unwrapping with occlusion layering.

Every triangle picks one of the six signed axis directions by its normal
and is projected orthographically onto that cube face.  Triangles whose
projections overlap inside a face would alias their textures, so overlap
groups are layered by depth: the nearest stays Visible, the next becomes
FirstOcclusion, anything deeper goes to Remainder.  The atlas is then
split into three rectangular regions, one per layer: Visible islands are
packed into the top band, FirstOcclusion islands bottom-left, and
Remainder triangles into a uniform grid bottom-right.

Atlas convention: v runs top-down (image row order), and the projection
frames are chosen so side-face islands map world +Z to +V while the
+-Z faces map world +X to +U.  Each frame satisfies u x v = axis, which
makes every projected triangle counter-clockwise in UV.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import IntEnum
from pathlib import Path

import numpy as np

from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .mesh import (
    IndexedMesh,
    MeshError,
    adjacent_face_pairs,
    face_cross,
    face_normals,
)
from .parallel import split_ranges, thread_map


class Layer(IntEnum):
    VISIBLE = 0
    FIRST_OCCLUSION = 1
    REMAINDER = 2


# Signed axes in tie-break priority order: +X, -X, +Y, -Y, +Z, -Z.
FACE_AXES = np.array(
    [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ]
)
# Per-face projection frames with u x v = axis.
FACE_U = np.array(
    [
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [-1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
    ]
)
FACE_V = np.array(
    [
        [0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
    ]
)

_DEFAULT_VISIBLE = (0.0, 0.0, 1.0, 2.0 / 3.0)
_DEFAULT_OCCLUSION = (0.0, 2.0 / 3.0, 1.0 / 3.0, 1.0)
_DEFAULT_REMAINDER = (1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0)


@dataclass
class UnwrapConfig:
    """Knobs for face assignment, occlusion layering, and packing.

    Regions are (u0, v0, u1, v1) fractions of the atlas; padding and the
    remainder cell floor are fractions of atlas width.  normal_threshold
    (0 disables it) sends triangles whose best axis alignment |n . axis|
    falls below the threshold straight to the Remainder layer.
    """

    normal_threshold: float = 0.0
    visible_region: tuple = _DEFAULT_VISIBLE
    occlusion_region: tuple = _DEFAULT_OCCLUSION
    remainder_region: tuple = _DEFAULT_REMAINDER
    island_padding: float = 4.0 / 1024.0
    proximity_slack: float = 1.05
    remainder_min_cell: float = 4.0 / 1024.0

    def validate(self) -> None:
        regions = {
            "visible_region": self.visible_region,
            "occlusion_region": self.occlusion_region,
            "remainder_region": self.remainder_region,
        }
        for name, (u0, v0, u1, v1) in regions.items():
            if not (0.0 <= u0 < u1 <= 1.0 and 0.0 <= v0 < v1 <= 1.0):
                raise MeshError(f"{name} {u0, v0, u1, v1} is not a box in [0,1]^2")
        items = list(regions.items())
        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                (na, a), (nb, b) = items[i], items[j]
                if a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]:
                    raise MeshError(f"atlas regions {na} and {nb} overlap")
        if self.island_padding < 0.0 or self.island_padding > 0.2:
            raise MeshError("island_padding must be in [0, 0.2]")
        if self.proximity_slack < 1.0:
            raise MeshError("proximity_slack below 1 would drop true overlaps")
        if not 0.0 <= self.normal_threshold < 1.0:
            raise MeshError("normal_threshold must be in [0, 1)")
        if self.remainder_min_cell <= 0.0:
            raise MeshError("remainder_min_cell must be positive")


@dataclass
class UvLayout:
    """Per-corner UVs plus the layering metadata that produced them."""

    corner_uvs: np.ndarray        # (T, 3, 2) float64 in [0,1]^2
    triangle_layer: np.ndarray    # (T,) uint8, Layer values
    triangle_cube_face: np.ndarray  # (T,) int8, index into FACE_AXES
    alignment_rotation: np.ndarray  # (3, 3) applied before projection
    isotropy_flagged: bool = False

    @property
    def num_triangles(self) -> int:
        return int(self.corner_uvs.shape[0])

    def validate(self) -> None:
        t = self.num_triangles
        if self.corner_uvs.shape != (t, 3, 2):
            raise MeshError(f"corner_uvs must be (T, 3, 2), got {self.corner_uvs.shape}")
        if self.triangle_layer.shape != (t,) or self.triangle_cube_face.shape != (t,):
            raise MeshError("per-triangle layer/face arrays must have length T")
        if self.alignment_rotation.shape != (3, 3):
            raise MeshError("alignment_rotation must be 3x3")
        uv = self.corner_uvs
        if uv.size and (uv.min() < -1e-9 or uv.max() > 1.0 + 1e-9):
            raise MeshError(
                f"UVs out of [0,1]^2: range [{uv.min()}, {uv.max()}]"
            )
        if np.any(signed_uv_areas(uv) < -1e-15):
            raise MeshError("layout contains flipped (negative-area) UV triangles")


def signed_uv_areas(corner_uvs: np.ndarray) -> np.ndarray:
    """(T,) signed area of each UV triangle (positive = counter-clockwise)."""
    a, b, c = corner_uvs[:, 0], corner_uvs[:, 1], corner_uvs[:, 2]
    ab = b - a
    ac = c - a
    return 0.5 * (ab[:, 0] * ac[:, 1] - ab[:, 1] * ac[:, 0])


# ------------------------------------------------------------------ alignment

def align_dominant_axes(mesh: IndexedMesh):
    """Rotate the mesh so its dominant normal directions hit world axes.

    Returns (rotated mesh, rotation, isotropy_flagged).  The rotation R
    maps input positions p to R @ p; rows are the area-weighted normal
    covariance eigenvectors in descending eigenvalue order with signs
    fixed so the largest component of each is positive, last row flipped
    if needed for det +1.  Near-isotropic normal distributions (sphere,
    cube) keep the identity and set the flag.
    """
    mesh.validate()
    cross = face_cross(mesh)
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    total = areas.sum()
    if total <= 0.0:
        return mesh.copy(), np.eye(3), True
    normals = np.divide(
        cross, 2.0 * areas[:, None], out=np.zeros_like(cross),
        where=areas[:, None] > 0,
    )
    cov = (normals * areas[:, None]).T @ normals / total
    eigvals, eigvecs = np.linalg.eigh(cov)  # ascending
    if eigvals[-1] - eigvals[0] < 1e-9 * max(1.0, eigvals[-1]):
        return mesh.copy(), np.eye(3), True

    rows = eigvecs[:, ::-1].T.copy()
    for r in range(3):
        lead = np.argmax(np.abs(rows[r]))
        if rows[r, lead] < 0.0:
            rows[r] = -rows[r]
    if np.linalg.det(rows) < 0.0:
        rows[2] = -rows[2]

    rotated = replace(
        mesh,
        positions=mesh.positions @ rows.T,
        vertex_normals=None if mesh.vertex_normals is None
        else mesh.vertex_normals @ rows.T,
    )
    return rotated, rows, False


# ------------------------------------------------------------ face assignment

def assign_cube_faces(mesh: IndexedMesh) -> np.ndarray:
    """(T,) int8: best signed axis per triangle, ties to the earlier axis.

    Zero-area triangles inherit the axis of their lowest-indexed
    non-degenerate edge neighbor, falling back to +Z.
    """
    normals = face_normals(mesh)
    dots = normals @ FACE_AXES.T
    faces = np.argmax(dots, axis=1).astype(np.int8)

    degenerate = ~np.any(normals != 0.0, axis=1)
    if np.any(degenerate):
        pairs = adjacent_face_pairs(mesh.indices)
        best = np.full(mesh.num_triangles, np.iinfo(np.int64).max)
        for a, b in ((0, 1), (1, 0)):
            m = degenerate[pairs[:, a]] & ~degenerate[pairs[:, b]]
            np.minimum.at(best, pairs[m, a], pairs[m, b])
        found = degenerate & (best < np.iinfo(np.int64).max)
        faces[found] = faces[best[found]]
        faces[degenerate & ~found] = 4  # +Z fallback
    return faces


# ---------------------------------------------------------- occlusion testing

def project_to_face(positions: np.ndarray, face: int) -> np.ndarray:
    """Project points onto the given cube face's (u, v) frame."""
    return np.stack(
        [positions @ FACE_U[face], positions @ FACE_V[face]], axis=-1
    )


def _doubled_areas(t: np.ndarray) -> np.ndarray:
    """|cross| of the edge vectors for (N, 3, 2) triangles."""
    return np.abs(
        (t[:, 1, 0] - t[:, 0, 0]) * (t[:, 2, 1] - t[:, 0, 1])
        - (t[:, 1, 1] - t[:, 0, 1]) * (t[:, 2, 0] - t[:, 0, 0])
    )


def triangles_overlap_2d(tri_a: np.ndarray, tri_b: np.ndarray, eps: float,
                         area2_a: np.ndarray | None = None,
                         area2_b: np.ndarray | None = None) -> np.ndarray:
    """Pairwise interior-overlap test for CCW 2D triangles.

    tri_a, tri_b: (P, 3, 2).  Shared edges and single-point contacts are
    not overlaps; degenerate (near-zero-area) triangles never overlap.
    Separating-axis test over the 6 edge normals.  Callers that already
    know the doubled triangle areas can pass them to skip recomputation.
    """
    if area2_a is None:
        area2_a = _doubled_areas(tri_a)
    if area2_b is None:
        area2_b = _doubled_areas(tri_b)
    # Pairs already separated by an earlier axis drop out of the remaining
    # axis tests, which carries most of the work on adjacency-heavy meshes.
    alive = np.nonzero((area2_a > 2.0 * eps) & (area2_b > 2.0 * eps))[0]
    for tris, others in ((tri_a, tri_b), (tri_b, tri_a)):
        for k in range(3):
            if not len(alive):
                break
            v0 = tris[alive, k]
            edge = tris[alive, (k + 1) % 3] - v0
            normal = np.stack([-edge[:, 1], edge[:, 0]], axis=1)  # inward
            proj = np.einsum(
                "pc,pvc->pv", normal, others[alive] - v0[:, None, :]
            )
            alive = alive[proj.max(axis=1) > eps]
    overlap = np.zeros(tri_a.shape[0], dtype=bool)
    overlap[alive] = True
    return overlap


def _candidate_pairs(centers: np.ndarray, radii: np.ndarray,
                     slack: float) -> np.ndarray:
    """(P, 2) local index pairs with center distance <= slack*(r_i+r_j).

    A KD-tree radius query over triangle centers prunes the quadratic
    search.  Triangles far above the bulk of the size distribution would
    inflate the shared query radius, so they are matched with per-point
    radii instead; the union stays a strict superset of the true overlap
    set.
    """
    n = len(centers)
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    if n <= 600:
        pairs = np.stack(np.triu_indices(n, k=1), axis=1)
    else:
        big_cut = max(4.0 * float(np.quantile(radii, 0.95)), 1e-12)
        big = np.nonzero(radii > big_cut)[0]
        small = np.nonzero(radii <= big_cut)[0]
        chunks = []
        if len(small) > 1:
            tree = cKDTree(centers[small])
            near = tree.query_pairs(
                2.0 * slack * float(radii[small].max()), output_type="ndarray"
            )
            chunks.append(small[near])
        if len(big):
            hits = cKDTree(centers).query_ball_point(
                centers[big], slack * (radii[big] + float(radii.max()))
            )
            a = np.repeat(big, [len(h) for h in hits])
            b = np.concatenate([np.asarray(h, dtype=np.int64) for h in hits])
            mixed = np.sort(np.stack([a, b], axis=1)[a != b], axis=1)
            chunks.append(np.unique(mixed, axis=0))
        if not chunks:
            return np.zeros((0, 2), dtype=np.int64)
        pairs = np.concatenate(chunks)

    dist = np.linalg.norm(centers[pairs[:, 0]] - centers[pairs[:, 1]], axis=1)
    keep = dist <= slack * (radii[pairs[:, 0]] + radii[pairs[:, 1]])
    return pairs[keep]


def detect_occlusions(
    mesh: IndexedMesh,
    faces: np.ndarray,
    config: UnwrapConfig | None = None,
    forced_remainder: np.ndarray | None = None,
    threads: int = 1,
) -> np.ndarray:
    """(T,) uint8 layer per triangle.

    Within each cube-face bucket, overlapping projected triangles are
    resolved nearest-first (depth = centroid coordinate along the face
    axis, ties to the lower triangle index): a triangle overlapped by no
    Visible triangle stays Visible, one overlapped only by Visible
    becomes FirstOcclusion, deeper ones go to Remainder.
    """
    config = config or UnwrapConfig()
    num = mesh.num_triangles
    layers = np.zeros(num, dtype=np.uint8)
    if forced_remainder is not None:
        layers[forced_remainder] = Layer.REMAINDER

    tri_positions = mesh.positions[mesh.indices]
    for face in range(6):
        in_bucket = faces == face
        if forced_remainder is not None:
            in_bucket &= ~forced_remainder
        ids = np.nonzero(in_bucket)[0]
        if len(ids) < 2:
            continue
        uv = project_to_face(tri_positions[ids], face)
        depth = tri_positions[ids].mean(axis=1) @ FACE_AXES[face]
        centers = uv.mean(axis=1)
        radii = np.linalg.norm(uv - centers[:, None, :], axis=2).max(axis=1)

        pairs = _candidate_pairs(centers, radii, config.proximity_slack)
        if not len(pairs):
            continue
        span = uv.reshape(-1, 2)
        eps = 1e-9 * max(float(span.max() - span.min()), 1e-12)
        area2 = _doubled_areas(uv)
        chunks = [
            (uv[pairs[a:b, 0]], uv[pairs[a:b, 1]], eps,
             area2[pairs[a:b, 0]], area2[pairs[a:b, 1]])
            for a, b in split_ranges(len(pairs), max(1, threads) * 4)
        ]
        hit = np.concatenate(
            thread_map(lambda c: triangles_overlap_2d(*c), chunks, threads)
        )
        pairs = pairs[hit]
        if not len(pairs):
            continue

        both = np.concatenate([pairs, pairs[:, ::-1]])
        srt = both[np.argsort(both[:, 0], kind="stable")]
        starts = np.searchsorted(srt[:, 0], np.arange(len(ids)))
        ends = np.searchsorted(srt[:, 0], np.arange(len(ids)) + 1)

        # Triangles with no overlap partner stay Visible and never affect
        # anyone else, so only the involved ones need the sequential pass.
        involved = np.unique(pairs)
        order = involved[np.lexsort((ids[involved], -depth[involved]))]
        local_layer = np.zeros(len(ids), dtype=np.int64)
        done = np.zeros(len(ids), dtype=bool)
        for t in order:
            near = srt[starts[t]:ends[t], 1]
            near = near[done[near]]
            if len(near):
                seen = local_layer[near]
                covered_visible = np.any(seen == Layer.VISIBLE)
                covered_first = np.any(seen == Layer.FIRST_OCCLUSION)
                if covered_visible and covered_first:
                    local_layer[t] = Layer.REMAINDER
                elif covered_visible:
                    local_layer[t] = Layer.FIRST_OCCLUSION
            done[t] = True
        layers[ids] = local_layer.astype(np.uint8)
    return layers


# -------------------------------------------------------------------- packing

def _component_labels(indices: np.ndarray, faces: np.ndarray,
                      layers: np.ndarray) -> np.ndarray:
    """(T,) component label; triangles join when they share a mesh edge
    and sit on the same cube face in the same layer."""
    num = indices.shape[0]
    pairs = adjacent_face_pairs(indices)
    if len(pairs):
        same = (faces[pairs[:, 0]] == faces[pairs[:, 1]]) \
            & (layers[pairs[:, 0]] == layers[pairs[:, 1]])
        pairs = pairs[same]
    graph = coo_matrix(
        (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(num, num)
    )
    return connected_components(graph, directed=False)[1]


def _split_islands(members: np.ndarray, component: np.ndarray) -> list:
    """Group ascending member ids by component, ordered by smallest id."""
    labels = component[members]
    uniq, first = np.unique(labels, return_index=True)
    return [members[labels == uniq[k]] for k in np.argsort(first)]


def _shelf_layout(sizes: np.ndarray, scale: float, width: float, height: float,
                  pad: float):
    """Place boxes (already sorted) on shelves; None when they do not fit."""
    offsets = np.zeros_like(sizes)
    x, y, shelf = pad, pad, 0.0
    for i, (w, h) in enumerate(sizes * scale):
        if x + w > width - pad + 1e-12:
            x = pad
            y += shelf + pad
            shelf = 0.0
        if x + w > width - pad + 1e-12 or y + h > height - pad + 1e-12:
            return None
        offsets[i] = (x, y)
        x += w + pad
        shelf = max(shelf, h)
    return offsets


def _pack_islands(bboxes: np.ndarray, region: tuple, pad: float):
    """Uniformly scale and place island bboxes (n, 2) inside a region.

    Returns (scale, offsets (n, 2) absolute atlas positions).  Islands
    are shelf-packed tallest-first at the largest scale found by
    bisection; placement order is deterministic.
    """
    u0, v0, u1, v1 = region
    width, height = u1 - u0, v1 - v0
    sizes = np.maximum(bboxes, 1e-12)
    order = np.lexsort((np.arange(len(sizes)), -sizes[:, 1]))
    sorted_sizes = sizes[order]

    hi = min((width - 2 * pad) / sizes[:, 0].max(),
             (height - 2 * pad) / sizes[:, 1].max())
    if hi <= 0.0:
        raise MeshError("island_padding leaves no room inside the region")
    if _shelf_layout(sorted_sizes, hi, width, height, pad) is not None:
        best = hi
    else:
        lo, best = 0.0, 0.0
        for _ in range(48):
            mid = 0.5 * (lo + hi)
            if _shelf_layout(sorted_sizes, mid, width, height, pad) is not None:
                best, lo = mid, mid
            else:
                hi = mid
        if best == 0.0:
            raise MeshError("islands do not fit their atlas region")
    placed = _shelf_layout(sorted_sizes, best, width, height, pad)
    offsets = np.zeros_like(placed)
    offsets[order] = placed + (u0, v0)
    return best, offsets


def layout_atlas(
    mesh: IndexedMesh,
    layers: np.ndarray,
    faces: np.ndarray,
    config: UnwrapConfig | None = None,
    alignment_rotation: np.ndarray | None = None,
    isotropy_flagged: bool = False,
) -> UvLayout:
    """Pack projected triangles into their per-layer atlas regions."""
    config = config or UnwrapConfig()
    config.validate()
    num = mesh.num_triangles
    tri_positions = mesh.positions[mesh.indices]
    out_uvs = np.zeros((num, 3, 2))

    # Islands for the two chart-based layers, region-packed per layer.
    component = _component_labels(mesh.indices, faces, layers)
    for layer, region in (
        (Layer.VISIBLE, config.visible_region),
        (Layer.FIRST_OCCLUSION, config.occlusion_region),
    ):
        islands = []
        for face in range(6):
            members = np.nonzero((faces == face) & (layers == layer))[0]
            if len(members):
                islands += [(face, part) for part in
                            _split_islands(members, component)]
        if not islands:
            continue
        raw = [project_to_face(tri_positions[part], face)
               for face, part in islands]
        mins = np.array([r.reshape(-1, 2).min(axis=0) for r in raw])
        maxs = np.array([r.reshape(-1, 2).max(axis=0) for r in raw])
        scale, offsets = _pack_islands(maxs - mins, region,
                                       config.island_padding)
        for k, (face, part) in enumerate(islands):
            out_uvs[part] = (raw[k] - mins[k]) * scale + offsets[k]

    # Remainder: per-triangle cells in a near-square grid.
    rem = np.nonzero(layers == Layer.REMAINDER)[0]
    if len(rem):
        u0, v0, u1, v1 = config.remainder_region
        width, height = u1 - u0, v1 - v0
        cols = max(1, int(np.ceil(np.sqrt(len(rem) * width / height))))
        rows = int(np.ceil(len(rem) / cols))
        cw, ch = width / cols, height / rows
        if min(cw, ch) < config.remainder_min_cell:
            raise MeshError(
                f"remainder grid overflow: {len(rem)} triangles need "
                f"{cols}x{rows} cells below the {config.remainder_min_cell} floor"
            )
        margin = 0.1 * min(cw, ch)
        tp = tri_positions[rem]
        raw = np.stack(
            [
                np.einsum("rkc,rc->rk", tp, FACE_U[faces[rem]]),
                np.einsum("rkc,rc->rk", tp, FACE_V[faces[rem]]),
            ],
            axis=-1,
        )
        mins = raw.min(axis=1)
        spans = raw.max(axis=1) - mins
        s = np.minimum(
            (cw - 2 * margin) / np.maximum(spans[:, 0], 1e-12),
            (ch - 2 * margin) / np.maximum(spans[:, 1], 1e-12),
        )
        cells = np.arange(len(rem))
        origin = np.stack(
            [u0 + (cells % cols) * cw, v0 + (cells // cols) * ch], axis=1
        )
        centered = origin + 0.5 * np.array([cw, ch]) - 0.5 * spans * s[:, None]
        out_uvs[rem] = (raw - mins[:, None, :]) * s[:, None, None] \
            + centered[:, None, :]

    layout = UvLayout(
        corner_uvs=out_uvs,
        triangle_layer=layers.astype(np.uint8),
        triangle_cube_face=faces.astype(np.int8),
        alignment_rotation=np.eye(3) if alignment_rotation is None
        else alignment_rotation,
        isotropy_flagged=isotropy_flagged,
    )
    layout.validate()
    return layout


def unwrap(mesh: IndexedMesh, config: UnwrapConfig | None = None,
           threads: int = 1) -> UvLayout:
    """Full unwrap: align, assign faces, layer occlusions, pack the atlas."""
    config = config or UnwrapConfig()
    config.validate()
    mesh.validate()
    if mesh.num_triangles == 0:
        raise MeshError("empty mesh: nothing to unwrap")

    aligned, rotation, flagged = align_dominant_axes(mesh)
    faces = assign_cube_faces(aligned)

    forced = None
    if config.normal_threshold > 0.0:
        best = np.max(face_normals(aligned) @ FACE_AXES.T, axis=1)
        forced = best < config.normal_threshold

    layers = detect_occlusions(aligned, faces, config, forced, threads)
    return layout_atlas(aligned, layers, faces, config, rotation, flagged)


# ----------------------------------------------------------------- layout IO

def save_layout(path, layout: UvLayout) -> None:
    """Raw little-endian arrays plus a JSON sidecar, byte-deterministic."""
    layout.validate()
    path = Path(path)
    blob = (
        layout.corner_uvs.astype("<f8").tobytes()
        + layout.triangle_layer.astype("u1").tobytes()
        + layout.triangle_cube_face.astype("i1").tobytes()
    )
    path.write_bytes(blob)
    sidecar = {
        "triangles": layout.num_triangles,
        "alignment_rotation": layout.alignment_rotation.tolist(),
        "isotropy_flagged": bool(layout.isotropy_flagged),
    }
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar, indent=2) + "\n", encoding="utf-8"
    )


def load_layout(path) -> UvLayout:
    path = Path(path)
    meta = json.loads(
        path.with_suffix(path.suffix + ".json").read_text(encoding="utf-8")
    )
    t = int(meta["triangles"])
    blob = path.read_bytes()
    expect = t * 6 * 8 + t + t
    if len(blob) != expect:
        raise MeshError(f"layout blob is {len(blob)} bytes, expected {expect}")
    uvs = np.frombuffer(blob[: t * 48], dtype="<f8").reshape(t, 3, 2).copy()
    layer = np.frombuffer(blob[t * 48: t * 49], dtype="u1").copy()
    face = np.frombuffer(blob[t * 49:], dtype="i1").copy()
    layout = UvLayout(
        corner_uvs=uvs,
        triangle_layer=layer,
        triangle_cube_face=face,
        alignment_rotation=np.asarray(meta["alignment_rotation"], dtype=np.float64),
        isotropy_flagged=bool(meta.get("isotropy_flagged", False)),
    )
    layout.validate()
    return layout


_LAYER_COLORS = {
    Layer.VISIBLE: "#4e88c7",
    Layer.FIRST_OCCLUSION: "#d9873a",
    Layer.REMAINDER: "#b04a4a",
}


def layout_to_svg(layout: UvLayout, size: int = 1024) -> str:
    """Atlas debug rendering: triangles colored by layer, region outlines."""
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
        f'height="{size}" viewBox="0 0 1 1">',
        '<rect x="0" y="0" width="1" height="1" fill="#f5f5f0"/>',
    ]
    for layer in Layer:
        color = _LAYER_COLORS[layer]
        for t in np.nonzero(layout.triangle_layer == layer)[0]:
            pts = " ".join(f"{u:.6f},{v:.6f}" for u, v in layout.corner_uvs[t])
            lines.append(
                f'<polygon points="{pts}" fill="{color}" fill-opacity="0.55" '
                f'stroke="{color}" stroke-width="0.0008"/>'
            )
    lines.append("</svg>")
    return "\n".join(lines)
