"""Binary glTF (GLB) packing and unpacking.

One mesh, one material, PNG textures embedded in the BIN chunk.  Corners
are deduplicated on exact (vertex id, uv) pairs, so chart seams split
vertices while chart interiors stay shared.  Buffer views are tightly
packed (no interleaving) and 4-byte aligned; the JSON chunk is padded
with spaces, the BIN chunk with zeros, which keeps output byte-stable
for identical inputs.
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .bake import TextureImage, encode_texture_png
from .material import PbrMaterial
from .mesh import IndexedMesh, MeshError, compute_geometry_normals
from .parallel import thread_map

_MAGIC = b"glTF"
_JSON_CHUNK = b"JSON"
_BIN_CHUNK = b"BIN\x00"

_UNSIGNED_SHORT = 5123
_UNSIGNED_INT = 5125
_FLOAT = 5126
_ARRAY_BUFFER = 34962
_ELEMENT_ARRAY_BUFFER = 34963


class GlbError(MeshError):
    """Malformed GLB container or unexportable asset."""


def _pad4(blob: bytes, fill: bytes) -> bytes:
    remainder = len(blob) % 4
    return blob if remainder == 0 else blob + fill * (4 - remainder)


def _dedupe_corners(mesh: IndexedMesh):
    """Collapse (vertex id, uv) corner pairs into glTF vertices.

    Returns (positions, normals, uvs, indices); ordering follows the
    sorted unique keys, so identical meshes produce identical layouts.
    """
    tris = mesh.indices.shape[0]
    records = np.zeros(
        tris * 3, dtype=[("v", np.int64), ("u", np.float64), ("w", np.float64)]
    )
    records["v"] = mesh.indices.ravel()
    records["u"] = mesh.corner_uvs[:, :, 0].ravel()
    records["w"] = mesh.corner_uvs[:, :, 1].ravel()
    unique, inverse = np.unique(records, return_inverse=True)

    if mesh.vertex_normals is not None:
        normals = mesh.vertex_normals
    else:
        normals = compute_geometry_normals(mesh).vertex_normals
    positions = mesh.positions[unique["v"]].astype("<f4")
    out_normals = normals[unique["v"]].astype("<f4")
    uvs = np.stack([unique["u"], unique["w"]], axis=1).astype("<f4")
    indices = inverse.reshape(tris, 3)
    return positions, out_normals, uvs, indices


def export_glb(
    mesh: IndexedMesh,
    albedo: TextureImage,
    normal_map: TextureImage,
    material: PbrMaterial,
    path,
    orm_texture: TextureImage | None = None,
    threads: int = 1,
) -> int:
    """Write a GLB with POSITION/NORMAL/TEXCOORD_0, PNG textures, and
    metallic-roughness factors.  Returns the file size in bytes.

    `orm_texture`, when given, is embedded as the metallicRoughnessTexture
    alongside the scalar factors.  `threads` parallelizes the PNG encodes
    (the compressor releases the GIL); output bytes do not depend on it.
    """
    mesh.validate()
    if mesh.corner_uvs is None:
        raise GlbError("missing UVs: export needs per-corner texture coordinates")
    images = [("albedo", albedo, True), ("normal", normal_map, False)]
    if orm_texture is not None:
        images.append(("metallic-roughness", orm_texture, False))
    dims = {(img.width, img.height) for _, img, _ in images}
    if len(dims) != 1:
        raise GlbError(
            "texture dimension mismatch: "
            + ", ".join(f"{n} {img.width}x{img.height}" for n, img, _ in images)
        )

    positions, normals, uvs, indices = _dedupe_corners(mesh)
    vertex_count = positions.shape[0]
    if vertex_count < 65536:
        index_array = indices.astype("<u2")
        index_type = _UNSIGNED_SHORT
    else:
        index_array = indices.astype("<u4")
        index_type = _UNSIGNED_INT

    blobs = [
        _pad4(index_array.tobytes(), b"\x00"),
        positions.tobytes(),
        normals.tobytes(),
        uvs.tobytes(),
    ]
    png_payloads = thread_map(
        lambda item: encode_texture_png(item[1], srgb=item[2]), images, threads
    )
    blobs.extend(_pad4(p, b"\x00") for p in png_payloads)

    views = []
    offset = 0
    for k, blob in enumerate(blobs):
        view = {"buffer": 0, "byteOffset": offset, "byteLength": len(blob)}
        if k == 0:
            view["byteLength"] = index_array.nbytes
            view["target"] = _ELEMENT_ARRAY_BUFFER
        elif k <= 3:
            view["target"] = _ARRAY_BUFFER
        else:
            view["byteLength"] = len(png_payloads[k - 4])
        views.append(view)
        offset += len(blob)
    binary = b"".join(blobs)

    pos_min = positions.min(axis=0) if vertex_count else np.zeros(3, "<f4")
    pos_max = positions.max(axis=0) if vertex_count else np.zeros(3, "<f4")
    accessors = [
        {
            "bufferView": 0,
            "componentType": index_type,
            "count": int(indices.size),
            "type": "SCALAR",
        },
        {
            "bufferView": 1,
            "componentType": _FLOAT,
            "count": vertex_count,
            "type": "VEC3",
            "min": [float(x) for x in pos_min],
            "max": [float(x) for x in pos_max],
        },
        {
            "bufferView": 2,
            "componentType": _FLOAT,
            "count": vertex_count,
            "type": "VEC3",
        },
        {
            "bufferView": 3,
            "componentType": _FLOAT,
            "count": vertex_count,
            "type": "VEC2",
        },
    ]

    pbr = {
        "baseColorTexture": {"index": 0},
        "metallicFactor": material.metallic,
        "roughnessFactor": material.roughness,
    }
    if orm_texture is not None:
        pbr["metallicRoughnessTexture"] = {"index": 2}
    document = {
        "asset": {"version": "2.0", "generator": "meshbake"},
        "scene": 0,
        "scenes": [{"nodes": [0]}],
        "nodes": [{"mesh": 0}],
        "meshes": [
            {
                "primitives": [
                    {
                        "attributes": {
                            "POSITION": 1,
                            "NORMAL": 2,
                            "TEXCOORD_0": 3,
                        },
                        "indices": 0,
                        "material": 0,
                        "mode": 4,
                    }
                ]
            }
        ],
        "materials": [
            {
                "pbrMetallicRoughness": pbr,
                "normalTexture": {"index": 1},
            }
        ],
        "textures": [
            {"sampler": 0, "source": k} for k in range(len(images))
        ],
        "images": [
            {
                "bufferView": 4 + k,
                "mimeType": "image/png",
            }
            for k in range(len(images))
        ],
        "samplers": [{"wrapS": 10497, "wrapT": 10497}],
        "accessors": accessors,
        "bufferViews": views,
        "buffers": [{"byteLength": len(binary)}],
    }

    json_blob = _pad4(
        json.dumps(document, separators=(",", ":")).encode("utf-8"), b" "
    )
    total = 12 + 8 + len(json_blob) + 8 + len(binary)
    with open(Path(path), "wb") as handle:
        handle.write(struct.pack("<4sII", _MAGIC, 2, total))
        handle.write(struct.pack("<I4s", len(json_blob), _JSON_CHUNK))
        handle.write(json_blob)
        handle.write(struct.pack("<I4s", len(binary), _BIN_CHUNK))
        handle.write(binary)
    return total


# -------------------------------------------------------------------- reading

_COMPONENT_DTYPES = {
    5120: np.int8,
    5121: np.uint8,
    5122: np.int16,
    5123: np.uint16,
    5125: np.uint32,
    5126: np.dtype("<f4"),
}
_TYPE_WIDTHS = {"SCALAR": 1, "VEC2": 2, "VEC3": 3, "VEC4": 4, "MAT4": 16}


def _read_chunks(data: bytes):
    if len(data) < 12:
        raise GlbError("truncated GLB: missing header")
    magic, version, total = struct.unpack_from("<4sII", data, 0)
    if magic != _MAGIC:
        raise GlbError("not a GLB: bad magic bytes")
    if version != 2:
        raise GlbError(f"unsupported GLB container version {version}")
    if total != len(data):
        raise GlbError(
            f"truncated GLB: header says {total} bytes, file has {len(data)}"
        )
    chunks = {}
    cursor = 12
    while cursor < len(data):
        if cursor + 8 > len(data):
            raise GlbError("truncated GLB: dangling chunk header")
        length, kind = struct.unpack_from("<I4s", data, cursor)
        cursor += 8
        if cursor + length > len(data):
            raise GlbError("truncated GLB: chunk exceeds file length")
        chunks[kind] = data[cursor: cursor + length]
        cursor += length
    if _JSON_CHUNK not in chunks:
        raise GlbError("GLB has no JSON chunk")
    return chunks


def _accessor_array(document, binary, accessor_id):
    accessor = document["accessors"][accessor_id]
    view = document["bufferViews"][accessor["bufferView"]]
    dtype = np.dtype(_COMPONENT_DTYPES[accessor["componentType"]])
    width = _TYPE_WIDTHS[accessor["type"]]
    start = view.get("byteOffset", 0) + accessor.get("byteOffset", 0)
    count = accessor["count"]
    raw = np.frombuffer(binary, dtype=dtype, count=count * width, offset=start)
    return raw.reshape(count, width) if width > 1 else raw


def import_glb(path):
    """Parse a GLB produced by export_glb (or any tightly packed file
    with a single textured primitive).

    Returns (mesh, textures, material) where textures maps
    "albedo"/"normal"/"metallic-roughness" to decoded TextureImages for
    whichever images the file embeds.
    """
    data = Path(path).read_bytes()
    chunks = _read_chunks(data)
    document = json.loads(chunks[_JSON_CHUNK].decode("utf-8"))
    binary = chunks.get(_BIN_CHUNK, b"")

    primitive = document["meshes"][0]["primitives"][0]
    attributes = primitive["attributes"]
    positions = _accessor_array(document, binary, attributes["POSITION"])
    indices = _accessor_array(document, binary, primitive["indices"])
    indices = np.asarray(indices, dtype=np.int64).reshape(-1, 3)

    normals = None
    if "NORMAL" in attributes:
        normals = np.asarray(
            _accessor_array(document, binary, attributes["NORMAL"]),
            dtype=np.float64,
        )
    corner_uvs = None
    if "TEXCOORD_0" in attributes:
        uv = np.asarray(
            _accessor_array(document, binary, attributes["TEXCOORD_0"]),
            dtype=np.float64,
        )
        corner_uvs = uv[indices]

    mesh = IndexedMesh(
        positions=np.asarray(positions, dtype=np.float64),
        indices=np.asarray(indices, dtype=np.int32),
        vertex_normals=normals,
        corner_uvs=corner_uvs,
    )

    textures = {}
    names = ["albedo", "normal", "metallic-roughness"]
    for k, image in enumerate(document.get("images", [])):
        view = document["bufferViews"][image["bufferView"]]
        start = view.get("byteOffset", 0)
        payload = binary[start: start + view["byteLength"]]
        with Image.open(io.BytesIO(payload)) as pil:
            pixels = np.asarray(pil, dtype=np.float64) / 255.0
        if pixels.ndim == 2:
            pixels = pixels[:, :, None]
        name = names[k] if k < len(names) else f"image{k}"
        textures[name] = TextureImage(
            pixels, np.ones(pixels.shape[:2], dtype=bool)
        )

    material = PbrMaterial()
    if document.get("materials"):
        pbr = document["materials"][0].get("pbrMetallicRoughness", {})
        material = PbrMaterial(
            metallic=float(pbr.get("metallicFactor", 1.0)),
            roughness=float(pbr.get("roughnessFactor", 1.0)),
        )
    return mesh, textures, material
