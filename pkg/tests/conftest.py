"""Shared geometry builders for the test suite."""

import sys

import numpy as np
import pytest

from meshbake.mesh import make_mesh


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance verdict lines after the run, pass or fail."""
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "VERDICTS", None) if module else None
    if lines:
        terminalreporter.write_sep("-", "acceptance verdicts")
        for line in lines:
            terminalreporter.write_line(line)


def unit_tetrahedron():
    """Regular-ish tetrahedron with outward CCW winding."""
    positions = np.array(
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    indices = np.array(
        [
            [0, 2, 1],
            [0, 1, 3],
            [0, 3, 2],
            [1, 2, 3],
        ]
    )
    return make_mesh(positions, indices)


def flat_quad():
    """Unit square in the z=0 plane, two triangles, +Z winding."""
    positions = np.array(
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
        ]
    )
    indices = np.array([[0, 1, 2], [0, 2, 3]])
    return make_mesh(positions, indices)


def uv_sphere(radius=1.0, rings=16, segments=32, center=(0.0, 0.0, 0.0)):
    """Latitude/longitude sphere triangulation with outward winding."""
    theta = np.linspace(0.0, np.pi, rings + 1)
    phi = np.linspace(0.0, 2.0 * np.pi, segments, endpoint=False)
    verts = [np.array([0.0, 0.0, radius])]
    for t in theta[1:-1]:
        st, ct = np.sin(t), np.cos(t)
        for p in phi:
            verts.append(radius * np.array([st * np.cos(p), st * np.sin(p), ct]))
    verts.append(np.array([0.0, 0.0, -radius]))
    verts = np.array(verts) + np.asarray(center, dtype=np.float64)

    faces = []
    def ring_start(r):
        return 1 + (r - 1) * segments

    for s in range(segments):
        s2 = (s + 1) % segments
        faces.append([0, ring_start(1) + s, ring_start(1) + s2])
    for r in range(1, rings - 1):
        a, b = ring_start(r), ring_start(r + 1)
        for s in range(segments):
            s2 = (s + 1) % segments
            faces.append([a + s, b + s, b + s2])
            faces.append([a + s, b + s2, a + s2])
    last = len(verts) - 1
    a = ring_start(rings - 1)
    for s in range(segments):
        s2 = (s + 1) % segments
        faces.append([last, a + s2, a + s])
    return make_mesh(verts, np.array(faces))


def box_mesh(extents=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)):
    """Axis-aligned box, 12 triangles, outward CCW winding."""
    half = 0.5 * np.asarray(extents, dtype=np.float64)
    corners = np.array(
        [[x, y, z] for z in (-1.0, 1.0) for y in (-1.0, 1.0) for x in (-1.0, 1.0)]
    )
    positions = corners * half + np.asarray(center, dtype=np.float64)
    quads = [
        (1, 3, 7, 5),  # +x
        (0, 4, 6, 2),  # -x
        (2, 6, 7, 3),  # +y
        (0, 1, 5, 4),  # -y
        (4, 5, 7, 6),  # +z
        (0, 2, 3, 1),  # -z
    ]
    indices = np.array(
        [tri for a, b, c, d in quads for tri in ((a, b, c), (a, c, d))]
    )
    return make_mesh(positions, indices)


def random_rotation(rng):
    """Uniform-ish random rotation matrix via QR of a Gaussian sample."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
