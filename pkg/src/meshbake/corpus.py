"""Deterministic mesh zoo for property tests and benchmarks.

Analytic surfaces (lat-long spheres, tori, gridded boxes, capped
cylinders), isosurface extractions of the built-in distance fields, and
seeded noise-perturbed variants of each family.  Every entry rebuilds
bit-identically from its spec, so corpus-wide checks are reproducible
without shipping mesh files.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import IndexedMesh, make_mesh
from .tetra import marching_tetrahedra, sample_grid, shape_from_spec


def _quad_strip(ring_a: np.ndarray, ring_b: np.ndarray) -> np.ndarray:
    """(2S, 3) CCW triangles joining two same-length vertex-id rings."""
    s = len(ring_a)
    nxt = np.roll(np.arange(s), -1)
    first = np.stack([ring_a, ring_b, ring_b[nxt]], axis=1)
    second = np.stack([ring_a, ring_b[nxt], ring_a[nxt]], axis=1)
    return np.concatenate([first, second])


def parametric_sphere(segments: int, bands: int,
                      radius: float = 1.0) -> IndexedMesh:
    """Lat-long sphere with 2 * segments * bands triangles.

    `bands` latitude bands between the poles; interior rings carry
    `segments` vertices each, poles are single fan apices.
    """
    if segments < 3 or bands < 2:
        raise ValueError("sphere needs segments >= 3 and bands >= 2")
    theta = np.pi * np.arange(1, bands) / bands
    phi = 2.0 * np.pi * np.arange(segments) / segments
    st = np.sin(theta)[:, None]
    rings = radius * np.stack(
        [
            st * np.cos(phi)[None, :],
            st * np.sin(phi)[None, :],
            np.broadcast_to(np.cos(theta)[:, None], (bands - 1, segments)),
        ],
        axis=-1,
    )
    north = [[0.0, 0.0, radius]]
    south = [[0.0, 0.0, -radius]]
    positions = np.concatenate([north, rings.reshape(-1, 3), south])

    ring_ids = 1 + np.arange((bands - 1) * segments).reshape(bands - 1, segments)
    south_id = len(positions) - 1
    nxt = np.roll(np.arange(segments), -1)
    top = np.stack(
        [np.zeros(segments, dtype=np.int64), ring_ids[0], ring_ids[0][nxt]],
        axis=1,
    )
    bottom = np.stack(
        [np.full(segments, south_id), ring_ids[-1][nxt], ring_ids[-1]], axis=1
    )
    middle = [_quad_strip(ring_ids[k], ring_ids[k + 1])
              for k in range(bands - 2)]
    indices = np.concatenate([top] + middle + [bottom])
    return make_mesh(positions, indices)


def parametric_torus(major_segments: int, minor_segments: int,
                     major: float = 1.0, minor: float = 0.4) -> IndexedMesh:
    """Torus of revolution with 2 * major_segments * minor_segments tris."""
    if major_segments < 3 or minor_segments < 3:
        raise ValueError("torus needs at least 3 segments on each loop")
    u = 2.0 * np.pi * np.arange(major_segments) / major_segments
    v = 2.0 * np.pi * np.arange(minor_segments) / minor_segments
    cu, su = np.cos(u)[:, None], np.sin(u)[:, None]
    ring = major + minor * np.cos(v)[None, :]
    positions = np.stack(
        [
            cu * ring,
            su * ring,
            np.broadcast_to(minor * np.sin(v)[None, :],
                            (major_segments, minor_segments)),
        ],
        axis=-1,
    ).reshape(-1, 3)
    ids = np.arange(major_segments * minor_segments).reshape(
        major_segments, minor_segments
    )
    chunks = [
        _quad_strip(ids[k], ids[(k + 1) % major_segments])
        for k in range(major_segments)
    ]
    return make_mesh(positions, np.concatenate(chunks))


def gridded_box(divisions: int,
                extents=(1.6, 1.2, 1.0)) -> IndexedMesh:
    """Axis-aligned box, each face an n x n quad grid: 12 n^2 triangles.

    Shared face-boundary vertices are merged, so the result is watertight.
    """
    if divisions < 1:
        raise ValueError("box needs at least one division per face")
    n = divisions
    half = 0.5 * np.asarray(extents, dtype=np.float64)
    lin = np.linspace(-1.0, 1.0, n + 1)
    faces = []
    for axis in range(3):
        u_axis, v_axis = (axis + 1) % 3, (axis + 2) % 3
        for sign in (1.0, -1.0):
            gu, gv = np.meshgrid(lin, lin, indexing="ij")
            pts = np.zeros((n + 1, n + 1, 3))
            pts[..., axis] = sign
            pts[..., u_axis] = gu
            pts[..., v_axis] = sign * gv  # mirror keeps winding outward
            faces.append(pts * half)
    positions = np.concatenate([f.reshape(-1, 3) for f in faces])
    quads = []
    for k in range(6):
        ids = k * (n + 1) ** 2 + np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
        a = ids[:-1, :-1].ravel()
        b = ids[1:, :-1].ravel()
        c = ids[1:, 1:].ravel()
        d = ids[:-1, 1:].ravel()
        quads.append(np.stack([a, b, c], axis=1))
        quads.append(np.stack([a, c, d], axis=1))
    indices = np.concatenate(quads)

    # Merge duplicated edge/corner vertices so edges are manifold.
    rounded = np.round(positions, 9)
    _, first, inverse = np.unique(
        rounded.view([("x", "f8"), ("y", "f8"), ("z", "f8")]).ravel(),
        return_index=True,
        return_inverse=True,
    )
    return make_mesh(positions[first], inverse[indices])


def capped_cylinder(segments: int, rings: int, radius: float = 0.7,
                    height: float = 1.8) -> IndexedMesh:
    """Closed cylinder along Z: 2 * segments * (rings + 1) triangles."""
    if segments < 3 or rings < 1:
        raise ValueError("cylinder needs segments >= 3 and rings >= 1")
    phi = 2.0 * np.pi * np.arange(segments) / segments
    z = np.linspace(-0.5 * height, 0.5 * height, rings + 1)
    side = np.stack(
        [
            np.broadcast_to(radius * np.cos(phi)[None, :], (rings + 1, segments)),
            np.broadcast_to(radius * np.sin(phi)[None, :], (rings + 1, segments)),
            np.broadcast_to(z[:, None], (rings + 1, segments)),
        ],
        axis=-1,
    ).reshape(-1, 3)
    positions = np.concatenate(
        [side, [[0.0, 0.0, z[0]], [0.0, 0.0, z[-1]]]]
    )
    ids = np.arange((rings + 1) * segments).reshape(rings + 1, segments)
    chunks = [_quad_strip(ids[k + 1], ids[k]) for k in range(rings)]
    nxt = np.roll(np.arange(segments), -1)
    bottom_id, top_id = len(side), len(side) + 1
    chunks.append(np.stack(
        [np.full(segments, bottom_id), ids[0][nxt], ids[0]], axis=1
    ))
    chunks.append(np.stack(
        [np.full(segments, top_id), ids[-1], ids[-1][nxt]], axis=1
    ))
    return make_mesh(positions, np.concatenate(chunks))


def extracted_shape(kind: str, resolution: int) -> IndexedMesh:
    """Isosurface of a built-in distance field on a symmetric grid."""
    params = {
        "sphere": {"kind": "sphere", "radius": 0.8},
        "torus": {"kind": "torus", "major": 0.55, "minor": 0.24},
        "box": {"kind": "box", "half_extents": (0.62, 0.5, 0.44)},
    }
    if kind not in params:
        raise ValueError(f"unknown extracted shape {kind!r}")
    grid = sample_grid(shape_from_spec(params[kind]), resolution)
    return marching_tetrahedra(grid)


def perturb_vertices(mesh: IndexedMesh, amplitude: float,
                     seed: int) -> IndexedMesh:
    """Displace vertices along their normals by seeded Gaussian noise.

    `amplitude` is the noise standard deviation as a fraction of the mean
    edge length, so perturbation strength tracks mesh density.
    """
    from .mesh import compute_geometry_normals, undirected_edges

    edges = undirected_edges(mesh.indices)
    lengths = np.linalg.norm(
        mesh.positions[edges[:, 0]] - mesh.positions[edges[:, 1]], axis=1
    )
    sigma = amplitude * float(lengths.mean())
    normals = compute_geometry_normals(mesh).vertex_normals
    rng = np.random.default_rng(seed)
    offsets = rng.normal(0.0, sigma, size=len(mesh.positions))
    return make_mesh(mesh.positions + offsets[:, None] * normals, mesh.indices)


@dataclass(frozen=True)
class CorpusEntry:
    """One reproducible corpus mesh: a builder, its arguments, and an
    optional noise pass (amplitude as a fraction of mean edge length)."""

    name: str
    kind: str
    params: tuple
    noise: float = 0.0


_BASE_ENTRIES = [
    ("sphere", (50, 11)),
    ("sphere", (50, 25)),
    ("sphere", (100, 25)),
    ("sphere", (100, 50)),
    ("sphere", (100, 100)),
    ("sphere", (150, 100)),
    ("sphere", (200, 125)),
    ("torus", (25, 20)),
    ("torus", (50, 25)),
    ("torus", (50, 50)),
    ("torus", (100, 50)),
    ("torus", (100, 100)),
    ("torus", (160, 100)),
    ("torus", (250, 100)),
    ("box", (10,)),
    ("box", (15,)),
    ("box", (20,)),
    ("box", (25,)),
    ("box", (32,)),
    ("box", (45,)),
    ("box", (64,)),
    ("cylinder", (25, 19)),
    ("cylinder", (50, 24)),
    ("cylinder", (100, 24)),
    ("cylinder", (100, 49)),
    ("cylinder", (125, 79)),
    ("cylinder", (200, 99)),
    ("sdf-sphere", (24,)),
    ("sdf-sphere", (32,)),
    ("sdf-torus", (28,)),
    ("sdf-torus", (36,)),
    ("sdf-box", (24,)),
]

_NOISY_PICKS = [0, 2, 4, 5, 7, 9, 11, 12, 14, 16, 18, 19, 21, 23, 25, 27, 29, 31]


def corpus_entries() -> list[CorpusEntry]:
    """Fifty deterministic corpus entries spanning 1K-50K triangles:
    the analytic and extracted bases plus noise-perturbed variants."""
    entries = [
        CorpusEntry(f"{kind}-{'x'.join(map(str, params))}", kind, params)
        for kind, params in _BASE_ENTRIES
    ]
    for pick in _NOISY_PICKS:
        base = entries[pick]
        entries.append(CorpusEntry(base.name + "-noisy", base.kind,
                                   base.params, noise=0.15))
    return entries


def build_entry(entry: CorpusEntry, seed: int = 0) -> IndexedMesh:
    """Materialize a corpus entry; `seed` offsets the noise streams so
    independent corpora can be drawn without touching the specs."""
    builders = {
        "sphere": parametric_sphere,
        "torus": parametric_torus,
        "box": gridded_box,
        "cylinder": capped_cylinder,
    }
    if entry.kind in builders:
        mesh = builders[entry.kind](*entry.params)
    elif entry.kind.startswith("sdf-"):
        mesh = extracted_shape(entry.kind[4:], *entry.params)
    else:
        raise ValueError(f"unknown corpus kind {entry.kind!r}")
    if entry.noise:
        # Per-entry stream from the name bytes; str hash is process-salted.
        stream = int(np.frombuffer(entry.name.encode(), dtype=np.uint8).sum())
        mesh = perturb_vertices(mesh, entry.noise, seed * 100003 + stream)
    return mesh


def benchmark_mesh() -> IndexedMesh:
    """The standing timing subject: a 30K-triangle lat-long sphere."""
    return parametric_sphere(150, 100)
