"""Mesh file IO: OBJ reader/writer and PLY reader (ASCII + binary LE).

Only what the pipeline needs to get meshes in and debug output out.
Unknown OBJ statements are skipped; polygonal faces are fan-triangulated.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .mesh import IndexedMesh, MeshError, make_mesh


def read_obj(path) -> IndexedMesh:
    positions: list[list[float]] = []
    texcoords: list[list[float]] = []
    normals: list[list[float]] = []
    # Each face corner is (vertex, texcoord or -1, normal or -1).
    corners: list[tuple[int, int, int]] = []
    face_sizes: list[int] = []

    def resolve(token: str, count: int) -> int:
        idx = int(token)
        return idx - 1 if idx > 0 else count + idx

    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag, args = parts[0], parts[1:]
            if tag == "v":
                positions.append([float(x) for x in args[:3]])
            elif tag == "vt":
                texcoords.append([float(x) for x in args[:2]])
            elif tag == "vn":
                normals.append([float(x) for x in args[:3]])
            elif tag == "f":
                if len(args) < 3:
                    raise MeshError(f"face with {len(args)} corners in {path}")
                for token in args:
                    fields = token.split("/")
                    v = resolve(fields[0], len(positions))
                    vt = (
                        resolve(fields[1], len(texcoords))
                        if len(fields) > 1 and fields[1]
                        else -1
                    )
                    vn = (
                        resolve(fields[2], len(normals))
                        if len(fields) > 2 and fields[2]
                        else -1
                    )
                    corners.append((v, vt, vn))
                face_sizes.append(len(args))
            # everything else (o, g, s, mtllib, usemtl, ...) is ignored

    tris: list[tuple[int, int, int]] = []  # corner-list indices per triangle
    base = 0
    for size in face_sizes:
        for k in range(1, size - 1):
            tris.append((base, base + k, base + k + 1))
        base += size
    tri_corners = np.array(
        [[corners[a], corners[b], corners[c]] for a, b, c in tris],
        dtype=np.int64,
    ).reshape(-1, 3, 3)

    indices = tri_corners[:, :, 0] if tri_corners.size else np.zeros((0, 3), np.int64)

    corner_uvs = None
    if texcoords and tri_corners.size and np.all(tri_corners[:, :, 1] >= 0):
        uv = np.asarray(texcoords, dtype=np.float64)
        corner_uvs = uv[tri_corners[:, :, 1]]

    vertex_normals = None
    if normals and tri_corners.size and np.all(tri_corners[:, :, 2] >= 0):
        nrm = np.asarray(normals, dtype=np.float64)
        vertex_normals = np.zeros((len(positions), 3))
        vertex_normals[:, 2] = 1.0  # default for unreferenced vertices
        flat_v = tri_corners[:, :, 0].ravel()
        flat_n = tri_corners[:, :, 2].ravel()
        vertex_normals[flat_v] = nrm[flat_n]
        lengths = np.linalg.norm(vertex_normals, axis=1, keepdims=True)
        vertex_normals = np.divide(
            vertex_normals, lengths,
            out=np.tile(np.array([0.0, 0.0, 1.0]), (len(positions), 1)),
            where=lengths > 0,
        )

    return make_mesh(np.asarray(positions, dtype=np.float64).reshape(-1, 3),
                     indices, vertex_normals, corner_uvs)


def write_obj(path, mesh: IndexedMesh) -> None:
    mesh.validate()
    lines = ["# meshbake OBJ export"]
    for p in mesh.positions:
        lines.append(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}")
    if mesh.vertex_normals is not None:
        for n in mesh.vertex_normals:
            lines.append(f"vn {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}")
    has_uv = mesh.corner_uvs is not None
    if has_uv:
        for tri_uv in mesh.corner_uvs:
            for u, v in tri_uv:
                lines.append(f"vt {u:.9g} {v:.9g}")
    has_n = mesh.vertex_normals is not None
    for t, tri in enumerate(mesh.indices):
        refs = []
        for c, v in enumerate(tri):
            vi = v + 1
            ti = 3 * t + c + 1 if has_uv else ""
            if has_n and has_uv:
                refs.append(f"{vi}/{ti}/{vi}")
            elif has_uv:
                refs.append(f"{vi}/{ti}")
            elif has_n:
                refs.append(f"{vi}//{vi}")
            else:
                refs.append(f"{vi}")
        lines.append("f " + " ".join(refs))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_PLY_DTYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def read_ply(path) -> IndexedMesh:
    """Read ASCII or binary little-endian PLY with triangle faces.

    Vertex properties x/y/z are required; nx/ny/nz and u/v (or s/t) are
    picked up when present.  Polygonal faces are fan-triangulated.
    """
    with open(path, "rb") as fh:
        data = fh.read()

    if not data.startswith(b"ply"):
        raise MeshError(f"{path}: not a PLY file")
    end = data.find(b"end_header\n")
    if end < 0:
        raise MeshError(f"{path}: unterminated PLY header")
    header = data[:end].decode("ascii", errors="replace").splitlines()
    body = data[end + len(b"end_header\n"):]

    fmt = None
    elements = []  # (name, count, [(kind, dtype, count_dtype, prop_name)])
    for line in header[1:]:
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise MeshError(f"{path}: property before element")
            if parts[1] == "list":
                elements[-1][2].append(
                    ("list", _PLY_DTYPES[parts[3]], _PLY_DTYPES[parts[2]], parts[4])
                )
            else:
                elements[-1][2].append(("scalar", _PLY_DTYPES[parts[1]], None, parts[2]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise MeshError(f"{path}: unsupported PLY format {fmt!r}")

    parsed: dict[str, dict[str, list]] = {}
    if fmt == "ascii":
        tokens = body.decode("ascii", errors="replace").split()
        cursor = 0
        for name, count, props in elements:
            cols: dict[str, list] = {p[3]: [] for p in props}
            for _ in range(count):
                for kind, dt, _cdt, pname in props:
                    if kind == "list":
                        n = int(tokens[cursor]); cursor += 1
                        cols[pname].append(
                            [float(tokens[cursor + i]) for i in range(n)]
                        )
                        cursor += n
                    else:
                        cols[pname].append(float(tokens[cursor])); cursor += 1
            parsed[name] = cols
    else:
        offset = 0
        for name, count, props in elements:
            cols = {p[3]: [] for p in props}
            fixed = all(k == "scalar" for k, *_ in props)
            if fixed:
                rec = np.dtype([(p[3], "<" + p[1]) for p in props])
                arr = np.frombuffer(body, dtype=rec, count=count, offset=offset)
                offset += rec.itemsize * count
                for p in props:
                    cols[p[3]] = arr[p[3]].tolist()
            else:
                for _ in range(count):
                    for kind, dt, cdt, pname in props:
                        if kind == "list":
                            (n,) = np.frombuffer(body, "<" + cdt, 1, offset)
                            offset += np.dtype(cdt).itemsize
                            vals = np.frombuffer(body, "<" + dt, int(n), offset)
                            offset += np.dtype(dt).itemsize * int(n)
                            cols[pname].append(vals.tolist())
                        else:
                            (v,) = np.frombuffer(body, "<" + dt, 1, offset)
                            offset += np.dtype(dt).itemsize
                            cols[pname].append(float(v))
            parsed[name] = cols

    if "vertex" not in parsed or "face" not in parsed:
        raise MeshError(f"{path}: PLY missing vertex or face element")
    vert = parsed["vertex"]
    try:
        positions = np.stack(
            [np.asarray(vert[c], dtype=np.float64) for c in ("x", "y", "z")], axis=1
        )
    except KeyError as exc:
        raise MeshError(f"{path}: PLY vertex missing coordinate {exc}") from exc

    vertex_normals = None
    if all(c in vert for c in ("nx", "ny", "nz")):
        vertex_normals = np.stack(
            [np.asarray(vert[c], dtype=np.float64) for c in ("nx", "ny", "nz")], axis=1
        )
        lens = np.linalg.norm(vertex_normals, axis=1, keepdims=True)
        vertex_normals = np.divide(
            vertex_normals, lens, out=np.zeros_like(vertex_normals), where=lens > 0
        )
        vertex_normals[lens[:, 0] == 0] = (0.0, 0.0, 1.0)

    uv_names = next(
        (pair for pair in (("u", "v"), ("s", "t"), ("texture_u", "texture_v"))
         if all(c in vert for c in pair)),
        None,
    )

    face_cols = parsed["face"]
    list_name = next(
        (n for n in ("vertex_indices", "vertex_index") if n in face_cols), None
    )
    if list_name is None:
        raise MeshError(f"{path}: PLY face element has no vertex index list")
    tris = []
    for poly in face_cols[list_name]:
        poly = [int(v) for v in poly]
        if len(poly) < 3:
            raise MeshError(f"{path}: face with {len(poly)} vertices")
        for k in range(1, len(poly) - 1):
            tris.append((poly[0], poly[k], poly[k + 1]))
    indices = np.asarray(tris, dtype=np.int64).reshape(-1, 3)

    corner_uvs = None
    if uv_names is not None:
        u = np.asarray(vert[uv_names[0]], dtype=np.float64)
        v = np.asarray(vert[uv_names[1]], dtype=np.float64)
        per_vertex = np.stack([u, v], axis=1)
        corner_uvs = per_vertex[indices]

    return make_mesh(positions, indices, vertex_normals, corner_uvs)
