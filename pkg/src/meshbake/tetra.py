"""Marching-tetrahedra isosurface extraction from a scalar grid.

Each grid cube is split into the six tetrahedra sharing the cube's main
diagonal (corner 0 to corner 7), one per axis-order walk.  Neighboring
cubes then agree on the diagonals of shared faces, which makes the output
watertight on closed isosurfaces.  Surface vertices are deduplicated by a
canonical (min-node, max-node) edge key.

Sign convention: grid nodes with value >= 0 form the "positive" class
(exact zeros included, a fixed tie rule) and triangle windings put normals
on the positive side.  With conventional signed distance fields (negative
inside) that means outward normals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .mesh import IndexedMesh, MeshError
from .parallel import split_ranges, thread_map

# Cube corner c = dx + 2*dy + 4*dz; row c holds (dx, dy, dz).
_CORNER_OFFSETS = np.array(
    [[dx, dy, dz] for dz in (0, 1) for dy in (0, 1) for dx in (0, 1)]
)

# Six tets around the 0-7 diagonal, corner order fixed so each tet is
# positively oriented (det of edge vectors from corner 0 is +1).
_CUBE_TETS = np.array(
    [
        [0, 1, 3, 7],
        [0, 1, 7, 5],
        [0, 2, 7, 3],
        [0, 2, 6, 7],
        [0, 4, 5, 7],
        [0, 4, 7, 6],
    ]
)

# Tet edges by local corner pair; edge id is the index into this table.
_EDGE_CORNERS = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])

# Per sign case (bit i set when corner i >= 0): up to two triangles of
# edge ids, wound so normals point toward the positive corners.  Derived
# by enumerating the cut polygon of the reference tet for each case and
# checking the cross product against the positive side; complements are
# reversals.
_CASE_TRIS = -np.ones((16, 2, 3), dtype=np.int64)
_CASE_COUNT = np.zeros(16, dtype=np.int64)
for _case, _tris in {
    1: [(0, 2, 1)],
    2: [(0, 3, 4)],
    3: [(1, 3, 4), (1, 4, 2)],
    4: [(1, 5, 3)],
    5: [(2, 5, 3), (2, 3, 0)],
    6: [(0, 5, 4), (0, 1, 5)],
    7: [(2, 5, 4)],
    8: [(2, 4, 5)],
    9: [(0, 4, 5), (0, 5, 1)],
    10: [(2, 3, 5), (2, 0, 3)],
    11: [(1, 3, 5)],
    12: [(1, 4, 3), (1, 2, 4)],
    13: [(0, 4, 3)],
    14: [(0, 1, 2)],
}.items():
    _CASE_COUNT[_case] = len(_tris)
    for _slot, _tri in enumerate(_tris):
        _CASE_TRIS[_case, _slot] = _tri


class GridError(MeshError):
    pass


@dataclass
class DensityGrid:
    """Scalar samples on a regular grid over an axis-aligned box.

    values  (nx, ny, nz) array, C order; iso-level is 0
    bounds  (2, 3) array: lower corner, upper corner in world units
    """

    values: np.ndarray
    bounds: np.ndarray

    @property
    def resolution(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.values.shape)

    @property
    def cell_size(self) -> np.ndarray:
        res = np.array(self.values.shape, dtype=np.float64)
        return (self.bounds[1] - self.bounds[0]) / (res - 1.0)

    @property
    def min_cell_size(self) -> float:
        return float(self.cell_size.min())

    def validate(self) -> None:
        v = self.values
        if v.ndim != 3 or any(n < 2 for n in v.shape):
            raise GridError(f"grid must be 3D with every side >= 2, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise GridError("grid contains non-finite values")
        b = np.asarray(self.bounds, dtype=np.float64)
        if b.shape != (2, 3) or not np.all(np.isfinite(b)):
            raise GridError(f"bounds must be a finite (2, 3) box, got {b!r}")
        if not np.all(b[1] > b[0]):
            raise GridError("bounds upper corner must exceed lower corner")

    def node_coordinates(self, axis: int) -> np.ndarray:
        return np.linspace(
            self.bounds[0][axis], self.bounds[1][axis], self.values.shape[axis]
        )


def make_grid(values, bounds) -> DensityGrid:
    grid = DensityGrid(
        values=np.ascontiguousarray(values, dtype=np.float64),
        bounds=np.asarray(bounds, dtype=np.float64).reshape(2, 3),
    )
    grid.validate()
    return grid


def _emit_chunk(args):
    """Triangle edge keys for a contiguous slice of active cubes.

    Chunking is over cubes only; per-cube work is independent, so
    concatenating chunk outputs in order reproduces the single-chunk
    result exactly.
    """
    flat_values, node_ids, tet_offsets = args
    # node ids of the 4 corners of all 6 tets per cube: (A, 6, 4)
    tets = node_ids[:, None, None] + tet_offsets[None, :, :]
    vals = flat_values[tets]
    bits = (vals >= 0.0).astype(np.int64)
    cases = bits[..., 0] + 2 * bits[..., 1] + 4 * bits[..., 2] + 8 * bits[..., 3]

    active = (cases != 0) & (cases != 15)
    tets = tets[active]            # (K, 4)
    cases = cases[active]          # (K,)

    counts = _CASE_COUNT[cases]
    tri_edges = _CASE_TRIS[cases]  # (K, 2, 3) edge ids, -1 padded
    keep = np.arange(2)[None, :] < counts[:, None]
    tri_edges = tri_edges[keep]    # (Ktri, 3) in (cube, tet, slot) order
    owner = np.broadcast_to(np.arange(len(tets))[:, None], keep.shape)[keep]

    corner_a = _EDGE_CORNERS[tri_edges, 0]  # (Ktri, 3) local corner ids
    corner_b = _EDGE_CORNERS[tri_edges, 1]
    node_a = np.take_along_axis(tets[owner], corner_a, axis=1)
    node_b = np.take_along_axis(tets[owner], corner_b, axis=1)
    lo = np.minimum(node_a, node_b)
    hi = np.maximum(node_a, node_b)
    return lo * np.int64(flat_values.shape[0]) + hi


def marching_tetrahedra(grid: DensityGrid, threads: int = 1) -> IndexedMesh:
    """Extract the zero isosurface of a density grid as a triangle mesh."""
    grid.validate()
    nx, ny, nz = grid.resolution
    values = grid.values
    sign = values >= 0.0
    if sign.all() or not sign.any():
        raise GridError("empty isosurface: grid values never change sign")

    # Cubes whose 8 corners straddle the iso-level.
    s = sign.astype(np.uint8)
    corner_sum = (
        s[:-1, :-1, :-1] + s[1:, :-1, :-1] + s[:-1, 1:, :-1] + s[1:, 1:, :-1]
        + s[:-1, :-1, 1:] + s[1:, :-1, 1:] + s[:-1, 1:, 1:] + s[1:, 1:, 1:]
    )
    ci, cj, ck = np.nonzero((corner_sum > 0) & (corner_sum < 8))
    node_ids = (ci.astype(np.int64) * ny + cj) * nz + ck

    # Flat node-id offset of each tet corner relative to the cube origin.
    off = _CORNER_OFFSETS[_CUBE_TETS]  # (6, 4, 3) in (dx, dy, dz)
    tet_offsets = (off[..., 0] * ny + off[..., 1]) * nz + off[..., 2]
    tet_offsets = tet_offsets.astype(np.int64)

    flat_values = values.reshape(-1)
    chunks = [
        (flat_values, node_ids[a:b], tet_offsets)
        for a, b in split_ranges(len(node_ids), max(1, threads) * 4)
    ]
    keys = np.concatenate(
        [k.reshape(-1, 3) for k in thread_map(_emit_chunk, chunks, threads)]
        or [np.zeros((0, 3), np.int64)]
    )
    if keys.size == 0:
        raise GridError("empty isosurface: no cut tetrahedra")

    unique_keys, inverse = np.unique(keys.reshape(-1), return_inverse=True)
    num_nodes = np.int64(flat_values.shape[0])
    node_lo = unique_keys // num_nodes
    node_hi = unique_keys % num_nodes

    d0 = flat_values[node_lo]
    d1 = flat_values[node_hi]
    t = d0 / (d0 - d1)  # endpoints are in different sign classes, so d0 != d1

    def node_pos(node):
        k = node % nz
        j = (node // nz) % ny
        i = node // (ny * nz)
        frac = np.stack([i, j, k], axis=1).astype(np.float64)
        frac /= np.array([nx - 1, ny - 1, nz - 1], dtype=np.float64)
        return grid.bounds[0] + frac * (grid.bounds[1] - grid.bounds[0])

    p0 = node_pos(node_lo)
    p1 = node_pos(node_hi)
    positions = p0 + t[:, None] * (p1 - p0)

    mesh = IndexedMesh(
        positions=positions,
        indices=inverse.reshape(-1, 3).astype(np.int32),
    )
    mesh.validate()
    return mesh


@dataclass
class OffsetField:
    """Per-point displacement sampler, clamped relative to the grid scale.

    sampler    maps (N, 3) world points to (N, 3) offset vectors
    cell_size  reference length for the clamp (typically grid.min_cell_size)
    """

    sampler: Callable[[np.ndarray], np.ndarray]
    cell_size: float


def apply_offsets(
    mesh: IndexedMesh, field: OffsetField, max_fraction: float = 0.5
) -> IndexedMesh:
    """Displace vertices by the field, capping each offset's length.

    The cap is max_fraction * field.cell_size with max_fraction in
    (0, 0.5], so vertices can never cross more than half a cell.
    """
    if not 0.0 < max_fraction <= 0.5:
        raise MeshError(f"max_fraction must be in (0, 0.5], got {max_fraction}")
    offsets = np.asarray(field.sampler(mesh.positions), dtype=np.float64)
    if offsets.shape != mesh.positions.shape:
        raise MeshError(
            f"offset sampler returned shape {offsets.shape}, "
            f"expected {mesh.positions.shape}"
        )
    cap = max_fraction * field.cell_size
    norms = np.linalg.norm(offsets, axis=1)
    over = norms > cap
    scale = np.ones_like(norms)
    scale[over] = cap / norms[over]
    return replace(mesh, positions=mesh.positions + offsets * scale[:, None])


# ----------------------------------------------------------------- grid IO

def save_grid(path, grid: DensityGrid) -> None:
    """Raw little-endian float32 values plus a JSON sidecar next to them."""
    grid.validate()
    path = Path(path)
    grid.values.astype("<f4").tofile(path)
    sidecar = {
        "resolution": list(grid.resolution),
        "bounds": np.asarray(grid.bounds, dtype=float).tolist(),
        "dtype": "<f4",
        "order": "C",
    }
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar, indent=2) + "\n", encoding="utf-8"
    )


def load_grid(path) -> DensityGrid:
    path = Path(path)
    sidecar_path = path.with_suffix(path.suffix + ".json")
    if not sidecar_path.exists():
        raise GridError(f"missing grid sidecar {sidecar_path}")
    meta = json.loads(sidecar_path.read_text(encoding="utf-8"))
    res = tuple(int(n) for n in meta["resolution"])
    values = np.fromfile(path, dtype=meta.get("dtype", "<f4"))
    if values.size != res[0] * res[1] * res[2]:
        raise GridError(
            f"grid file holds {values.size} values, expected {res[0] * res[1] * res[2]}"
        )
    return make_grid(values.reshape(res), meta["bounds"])


# ------------------------------------------------------- analytic SDF shapes

def sdf_sphere(radius: float = 0.8, center=(0.0, 0.0, 0.0)):
    center = np.asarray(center, dtype=np.float64)

    def field(p):
        return np.linalg.norm(p - center, axis=-1) - radius

    return field


def sdf_box(half_extents=(0.6, 0.6, 0.6), center=(0.0, 0.0, 0.0)):
    half = np.asarray(half_extents, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)

    def field(p):
        q = np.abs(p - center) - half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside

    return field


def sdf_torus(major: float = 0.6, minor: float = 0.25, center=(0.0, 0.0, 0.0)):
    center = np.asarray(center, dtype=np.float64)

    def field(p):
        q = p - center
        ring = np.hypot(q[..., 0], q[..., 1]) - major
        return np.hypot(ring, q[..., 2]) - minor

    return field


def sdf_union(*fields):
    def field(p):
        return np.minimum.reduce([f(p) for f in fields])

    return field


def sdf_intersect(*fields):
    def field(p):
        return np.maximum.reduce([f(p) for f in fields])

    return field


def sample_grid(field, resolution, bounds=((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))) -> DensityGrid:
    """Evaluate an SDF on a regular grid."""
    if np.isscalar(resolution):
        resolution = (int(resolution),) * 3
    bounds = np.asarray(bounds, dtype=np.float64).reshape(2, 3)
    axes = [np.linspace(bounds[0][a], bounds[1][a], resolution[a]) for a in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([gx, gy, gz], axis=-1)
    return make_grid(field(pts), bounds)


def shape_from_spec(spec: dict):
    """Build an SDF callable from a config-style dictionary.

    kinds: sphere(radius, center), box(half_extents, center),
    torus(major, minor, center), union(parts), intersect(parts).
    """
    kind = spec.get("kind")
    if kind == "sphere":
        return sdf_sphere(spec.get("radius", 0.8), spec.get("center", (0, 0, 0)))
    if kind == "box":
        return sdf_box(spec.get("half_extents", (0.6, 0.6, 0.6)),
                       spec.get("center", (0, 0, 0)))
    if kind == "torus":
        return sdf_torus(spec.get("major", 0.6), spec.get("minor", 0.25),
                         spec.get("center", (0, 0, 0)))
    if kind in ("union", "intersect"):
        parts = [shape_from_spec(part) for part in spec.get("parts", [])]
        if not parts:
            raise GridError(f"{kind} needs at least one part")
        return sdf_union(*parts) if kind == "union" else sdf_intersect(*parts)
    raise GridError(f"unknown shape kind {kind!r}")
