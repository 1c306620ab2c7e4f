"""Indexed triangle mesh container plus normal and quality utilities."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np


class MeshError(ValueError):
    """Invalid mesh topology, geometry, or an operation that cannot proceed."""


# Fixed direction used when probing a normal field at x and at x + eps.
# Any unit vector works; this one avoids the coordinate axes so axis-aligned
# fields still see a displacement in every component.
_PROBE_DIR = np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0)


@dataclass
class IndexedMesh:
    """Triangle mesh with shared vertices.

    positions       (V, 3) float64 vertex coordinates
    indices         (T, 3) int32 vertex indices, counter-clockwise winding
    vertex_normals  optional (V, 3) float64 unit normals
    corner_uvs      optional (T, 3, 2) float64 per-corner texture coordinates

    UVs live on corners rather than vertices so that atlas seams do not
    require duplicating positions.
    """

    positions: np.ndarray
    indices: np.ndarray
    vertex_normals: Optional[np.ndarray] = None
    corner_uvs: Optional[np.ndarray] = None

    @property
    def num_vertices(self) -> int:
        return int(self.positions.shape[0])

    @property
    def num_triangles(self) -> int:
        return int(self.indices.shape[0])

    def validate(self) -> None:
        """Raise MeshError if the mesh violates its structural invariants."""
        p, f = self.positions, self.indices
        if p.ndim != 2 or p.shape[1] != 3:
            raise MeshError(f"positions must be (V, 3), got {p.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshError(f"indices must be (T, 3), got {f.shape}")
        if not np.issubdtype(f.dtype, np.integer):
            raise MeshError(f"indices must be integral, got dtype {f.dtype}")
        if not np.all(np.isfinite(p)):
            raise MeshError("positions contain non-finite values")
        if f.size and (f.min() < 0 or f.max() >= p.shape[0]):
            raise MeshError(
                f"index out of range: valid [0, {p.shape[0]}), "
                f"found [{f.min()}, {f.max()}]"
            )
        repeated = (
            (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
        )
        if np.any(repeated):
            raise MeshError(
                f"{int(repeated.sum())} triangle(s) repeat a vertex id"
            )
        if self.vertex_normals is not None:
            n = self.vertex_normals
            if n.shape != p.shape:
                raise MeshError(f"vertex_normals shape {n.shape} != {p.shape}")
            if not np.all(np.isfinite(n)):
                raise MeshError("vertex_normals contain non-finite values")
            lengths = np.linalg.norm(n, axis=1)
            if np.any(np.abs(lengths - 1.0) > 1e-4):
                raise MeshError("vertex_normals must be unit length (tol 1e-4)")
        if self.corner_uvs is not None:
            uv = self.corner_uvs
            if uv.shape != (f.shape[0], 3, 2):
                raise MeshError(
                    f"corner_uvs must be (T, 3, 2), got {uv.shape}"
                )
            if not np.all(np.isfinite(uv)):
                raise MeshError("corner_uvs contain non-finite values")

    def copy(self) -> "IndexedMesh":
        return IndexedMesh(
            positions=self.positions.copy(),
            indices=self.indices.copy(),
            vertex_normals=None if self.vertex_normals is None
            else self.vertex_normals.copy(),
            corner_uvs=None if self.corner_uvs is None
            else self.corner_uvs.copy(),
        )


def make_mesh(positions, indices, vertex_normals=None, corner_uvs=None) -> IndexedMesh:
    """Build an IndexedMesh, coercing dtypes, and validate it."""
    mesh = IndexedMesh(
        positions=np.ascontiguousarray(positions, dtype=np.float64),
        indices=np.ascontiguousarray(indices, dtype=np.int32),
        vertex_normals=None if vertex_normals is None
        else np.ascontiguousarray(vertex_normals, dtype=np.float64),
        corner_uvs=None if corner_uvs is None
        else np.ascontiguousarray(corner_uvs, dtype=np.float64),
    )
    mesh.validate()
    return mesh


def face_cross(mesh: IndexedMesh) -> np.ndarray:
    """(T, 3) un-normalized face normals: (v1 - v0) x (v2 - v0)."""
    tri = mesh.positions[mesh.indices]
    return np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])


def face_areas(mesh: IndexedMesh) -> np.ndarray:
    return 0.5 * np.linalg.norm(face_cross(mesh), axis=1)


def face_normals(mesh: IndexedMesh) -> np.ndarray:
    """(T, 3) unit face normals; zero vector for degenerate faces."""
    cross = face_cross(mesh)
    norm = np.linalg.norm(cross, axis=1, keepdims=True)
    return np.divide(cross, norm, out=np.zeros_like(cross), where=norm > 0.0)


def undirected_edges(indices: np.ndarray) -> np.ndarray:
    """(3T, 2) edge list, each row sorted so (lo, hi); one row per corner."""
    e = np.concatenate(
        [indices[:, [0, 1]], indices[:, [1, 2]], indices[:, [2, 0]]], axis=0
    )
    return np.sort(e, axis=1)


def adjacent_face_pairs(indices: np.ndarray) -> np.ndarray:
    """(P, 2) pairs of face ids sharing an edge.

    Edges used by k > 2 faces contribute k - 1 consecutive pairs in face-id
    order, which keeps the result deterministic on non-manifold input.
    """
    num_faces = indices.shape[0]
    edges = undirected_edges(indices)
    owner = np.tile(np.arange(num_faces, dtype=np.int64), 3)
    key = edges[:, 0].astype(np.int64) * (indices.max() + 1 if indices.size else 1) \
        + edges[:, 1].astype(np.int64)
    order = np.lexsort((owner, key))
    key, owner = key[order], owner[order]
    same = key[1:] == key[:-1]
    return np.stack([owner[:-1][same], owner[1:][same]], axis=1)


def compute_geometry_normals(mesh: IndexedMesh) -> IndexedMesh:
    """Area-weighted vertex normals from triangle geometry.

    Returns a new mesh; the input is left untouched.  A vertex whose
    incident triangles are all degenerate has no defined direction and
    raises.  Vertices referenced by no triangle default to +Z.
    """
    cross = face_cross(mesh)  # magnitude 2*area: area weighting for free
    accum = np.zeros_like(mesh.positions)
    for c in range(3):
        np.add.at(accum, mesh.indices[:, c], cross)
    norms = np.linalg.norm(accum, axis=1)

    referenced = np.zeros(mesh.num_vertices, dtype=bool)
    referenced[mesh.indices.ravel()] = True
    bad = referenced & (norms < 1e-20)
    if np.any(bad):
        raise MeshError(
            f"undefined normal at {int(bad.sum())} vertex(es) whose incident "
            "triangles are all degenerate"
        )
    normals = np.zeros_like(accum)
    normals[referenced] = accum[referenced] / norms[referenced, None]
    normals[~referenced] = (0.0, 0.0, 1.0)
    return replace(mesh, vertex_normals=normals)


def slerp_normals(a: np.ndarray, b: np.ndarray, t) -> np.ndarray:
    """Spherical interpolation between unit vector arrays a and b.

    t may be scalar or broadcastable to the leading shape.  Antipodal
    pairs (angle within 1e-6 of pi) have no unique interpolation plane
    and raise MeshError.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    dot = np.clip(np.sum(a * b, axis=-1), -1.0, 1.0)
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    angle = np.arctan2(cross, dot)
    if np.any(np.pi - angle < 1e-6):
        raise MeshError("ambiguous slerp plane: normals are antipodal")

    t = np.asarray(t, dtype=np.float64)
    sin = np.sin(angle)
    # Near-parallel vectors: fall back to normalized lerp, exact in the limit.
    small = sin < 1e-9
    safe_sin = np.where(small, 1.0, sin)
    wa = np.where(small, 1.0 - t, np.sin((1.0 - t) * angle) / safe_sin)
    wb = np.where(small, t, np.sin(t * angle) / safe_sin)
    out = wa[..., None] * a + wb[..., None] * b
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


@dataclass
class MetricWeights:
    """Per-term weights for the training-style quality objective.

    The defaults mirror the weighting used when these penalties steer an
    optimization: image terms dominate, geometric regularizers are gentle.
    """

    mse: float = 10.0
    lpips: float = 2.0
    mask: float = 10.0
    laplacian: float = 0.01
    normal_consistency: float = 0.001
    offset: float = 0.1
    normal_replication: float = 0.2
    normal_smoothness: float = 0.02
    demodulation: float = 0.01

    def validate(self) -> None:
        for name, value in vars(self).items():
            if not np.isfinite(value) or value < 0.0:
                raise MeshError(f"weight {name!r} must be a nonnegative scalar")


@dataclass
class MeshQualityReport:
    laplacian: float
    normal_consistency: float
    offset_reg: float
    normal_replication: float
    normal_smoothness: float
    degenerate_faces: int

    def weighted_total(self, weights: MetricWeights = MetricWeights()) -> float:
        return (
            weights.laplacian * self.laplacian
            + weights.normal_consistency * self.normal_consistency
            + weights.offset * self.offset_reg
            + weights.normal_replication * self.normal_replication
            + weights.normal_smoothness * self.normal_smoothness
        )


def uniform_laplacian(mesh: IndexedMesh) -> np.ndarray:
    """(V, 3) umbrella operator: mean of edge-neighbors minus the vertex.

    Vertices with no neighbors get zero.
    """
    edges = np.unique(undirected_edges(mesh.indices), axis=0)
    accum = np.zeros_like(mesh.positions)
    count = np.zeros(mesh.num_vertices)
    np.add.at(accum, edges[:, 0], mesh.positions[edges[:, 1]])
    np.add.at(accum, edges[:, 1], mesh.positions[edges[:, 0]])
    np.add.at(count, edges[:, 0], 1.0)
    np.add.at(count, edges[:, 1], 1.0)
    has = count > 0
    lap = np.zeros_like(accum)
    lap[has] = accum[has] / count[has, None] - mesh.positions[has]
    return lap


def mesh_quality(
    mesh: IndexedMesh,
    offsets: Optional[np.ndarray] = None,
    predicted_normals: Optional[np.ndarray] = None,
    normal_field: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    epsilon: float = 1e-2,
) -> MeshQualityReport:
    """Geometric smoothness and fidelity metrics for a mesh.

    laplacian           mean squared norm of the uniform Laplacian
    normal_consistency  mean (1 - cos angle) over adjacent face normal pairs
    offset_reg          mean squared norm of per-vertex offsets (0 if absent)
    normal_replication  mean (1 - n . n_hat) between geometry normals and
                        predicted_normals (0 if absent)
    normal_smoothness   mean squared difference of normal_field sampled at
                        each vertex and at vertex + epsilon along a fixed
                        diagonal direction (0 if absent)

    Degenerate faces are excluded from normal_consistency and counted in
    the report.
    """
    mesh.validate()
    lap = uniform_laplacian(mesh)
    laplacian = float(np.mean(np.sum(lap * lap, axis=1))) if mesh.num_vertices else 0.0

    fn = face_normals(mesh)
    degenerate = ~np.any(fn != 0.0, axis=1)
    pairs = adjacent_face_pairs(mesh.indices)
    if pairs.size:
        ok = ~degenerate[pairs[:, 0]] & ~degenerate[pairs[:, 1]]
        pairs = pairs[ok]
    if pairs.size:
        cos = np.sum(fn[pairs[:, 0]] * fn[pairs[:, 1]], axis=1)
        consistency = float(np.mean(1.0 - cos))
    else:
        consistency = 0.0

    offset_reg = 0.0
    if offsets is not None:
        offsets = np.asarray(offsets, dtype=np.float64)
        if offsets.shape != mesh.positions.shape:
            raise MeshError(
                f"offsets shape {offsets.shape} != {mesh.positions.shape}"
            )
        offset_reg = float(np.mean(np.sum(offsets * offsets, axis=1)))

    replication = 0.0
    if predicted_normals is not None:
        predicted_normals = np.asarray(predicted_normals, dtype=np.float64)
        if predicted_normals.shape != mesh.positions.shape:
            raise MeshError(
                f"predicted_normals shape {predicted_normals.shape} "
                f"!= {mesh.positions.shape}"
            )
        ref = mesh.vertex_normals
        if ref is None:
            ref = compute_geometry_normals(mesh).vertex_normals
        replication = float(np.mean(1.0 - np.sum(ref * predicted_normals, axis=1)))

    smoothness = 0.0
    if normal_field is not None:
        at = np.asarray(normal_field(mesh.positions), dtype=np.float64)
        shifted = np.asarray(
            normal_field(mesh.positions + epsilon * _PROBE_DIR), dtype=np.float64
        )
        diff = shifted - at
        smoothness = float(np.mean(np.sum(diff * diff, axis=1)))

    return MeshQualityReport(
        laplacian=laplacian,
        normal_consistency=consistency,
        offset_reg=offset_reg,
        normal_replication=replication,
        normal_smoothness=smoothness,
        degenerate_faces=int(degenerate.sum()),
    )


def euler_characteristic(mesh: IndexedMesh) -> int:
    """V - E + F over referenced vertices and unique undirected edges."""
    referenced = np.unique(mesh.indices.ravel()).size
    edges = np.unique(undirected_edges(mesh.indices), axis=0).shape[0]
    return int(referenced - edges + mesh.num_triangles)


def is_watertight(mesh: IndexedMesh) -> bool:
    """True when every undirected edge is used by exactly two triangles."""
    edges = undirected_edges(mesh.indices)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    return bool(edges.size) and bool(np.all(counts == 2))
