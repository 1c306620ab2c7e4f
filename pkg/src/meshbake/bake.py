"""Texture baking: rasterize UV layouts into G-buffers and attribute maps.

The rasterizer is a center-sample scanline pass over pixel rows: a texel
belongs to a triangle when its center lies inside the half-open span
[edge_lo, edge_hi) x [y_min, y_max), which assigns every texel on a
shared chart edge to exactly one owner.  Because the layout guarantees
non-overlapping charts, triangles own disjoint texel sets and all
scatter writes are race-free.

Field samplers are plain callables `f(positions, normals) -> values`
evaluated on the baked world positions; the second argument carries the
geometric normal of the owning triangle as a hint.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, PngImagePlugin

from .mesh import IndexedMesh, MeshError, face_normals
from .parallel import split_ranges, thread_map
from .unwrap import UvLayout

_MIN_RESOLUTION = 64
_MAX_RESOLUTION = 8192


def default_dilation(resolution: int) -> int:
    """Margin iterations scale with resolution so seams stay protected."""
    return max(4, resolution // 256)


@dataclass
class TextureImage:
    """Float image with an explicit occupancy mask."""

    pixels: np.ndarray      # (H, W, C) float64
    occupancy: np.ndarray   # (H, W) bool

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def channels(self) -> int:
        return int(self.pixels.shape[2])

    def validate(self) -> None:
        if self.pixels.ndim != 3:
            raise MeshError(f"pixels must be (H, W, C), got {self.pixels.shape}")
        if not 1 <= self.channels <= 4:
            raise MeshError(f"channel count {self.channels} outside 1..4")
        if self.occupancy.shape != self.pixels.shape[:2]:
            raise MeshError("occupancy mask shape does not match pixels")
        if self.occupancy.dtype != np.bool_:
            raise MeshError("occupancy must be boolean")
        if not np.all(np.isfinite(self.pixels)):
            raise MeshError("pixels contain non-finite values")

    def copy(self) -> "TextureImage":
        return TextureImage(self.pixels.copy(), self.occupancy.copy())


@dataclass
class GBuffer:
    """World-position image plus the triangle that owns each texel."""

    position: TextureImage
    triangle_id: np.ndarray  # (H, W) int32, -1 where unoccupied

    @property
    def resolution(self) -> int:
        return self.position.width

    def validate(self) -> None:
        self.position.validate()
        if self.position.channels != 3:
            raise MeshError("position buffer must have 3 channels")
        if self.triangle_id.shape != self.position.occupancy.shape:
            raise MeshError("triangle_id shape does not match occupancy")
        if np.any((self.triangle_id >= 0) != self.position.occupancy):
            raise MeshError("triangle_id and occupancy disagree")


def _check_resolution(resolution: int) -> None:
    if (
        resolution < _MIN_RESOLUTION
        or resolution > _MAX_RESOLUTION
        or resolution & (resolution - 1)
    ):
        raise MeshError(
            f"resolution {resolution} must be a power of two in "
            f"[{_MIN_RESOLUTION}, {_MAX_RESOLUTION}]"
        )


def _expand_counts(starts: np.ndarray, counts: np.ndarray):
    """Ragged range expansion: concatenate arange(s, s+c) for each row."""
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    owner = np.repeat(np.arange(len(counts)), counts)
    offsets = np.cumsum(counts) - counts
    seq = np.arange(total) - np.repeat(offsets, counts)
    return owner, np.repeat(starts, counts) + seq


def _rasterize_chunk(args):
    """Scanline-rasterize a block of triangles at texel centers.

    Returns flat pixel indices, owning local triangle ids, and clamped
    barycentric weights; the caller scatters them into images.
    """
    uv_px, res = args
    ys = uv_px[:, :, 1]
    r0 = np.clip(np.ceil(ys.min(axis=1) - 0.5), 0, res).astype(np.int64)
    r1 = np.clip(np.ceil(ys.max(axis=1) - 0.5), 0, res).astype(np.int64)
    tri_of_row, row = _expand_counts(r0, np.maximum(r1 - r0, 0))
    if not len(row):
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros((0, 3))

    yc = row + 0.5
    lo = np.full(len(row), np.inf)
    hi = np.full(len(row), -np.inf)
    verts = uv_px[tri_of_row]
    for k in range(3):
        a = verts[:, k]
        b = verts[:, (k + 1) % 3]
        swap = a[:, 1] > b[:, 1]
        p = np.where(swap[:, None], b, a)
        q = np.where(swap[:, None], a, b)
        valid = (p[:, 1] <= yc) & (yc < q[:, 1])
        dy = q[:, 1] - p[:, 1]
        t = np.divide(yc - p[:, 1], dy, out=np.zeros_like(yc), where=dy != 0)
        x = p[:, 0] + t * (q[:, 0] - p[:, 0])
        lo = np.where(valid, np.minimum(lo, x), lo)
        hi = np.where(valid, np.maximum(hi, x), hi)

    ok = np.isfinite(lo) & np.isfinite(hi)
    c0 = np.clip(np.ceil(np.where(ok, lo, 0.0) - 0.5), 0, res).astype(np.int64)
    c1 = np.clip(np.ceil(np.where(ok, hi, 0.0) - 0.5), 0, res).astype(np.int64)
    pix_of_row, col = _expand_counts(c0, np.maximum(c1 - c0, 0))
    if not len(col):
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros((0, 3))

    pix_tri = tri_of_row[pix_of_row]
    pix_row = row[pix_of_row]
    tri = uv_px[pix_tri]
    point = np.stack([col + 0.5, pix_row + 0.5], axis=1)
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    d = point - tri[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    safe = det != 0.0
    b1 = np.divide(d[:, 0] * e2[:, 1] - d[:, 1] * e2[:, 0], det,
                   out=np.zeros_like(det), where=safe)
    b2 = np.divide(e1[:, 0] * d[:, 1] - e1[:, 1] * d[:, 0], det,
                   out=np.zeros_like(det), where=safe)
    # Clamp: centers are inside their triangle, so this only rescales
    # roundoff and keeps sliver charts finite.
    b1 = np.clip(b1, 0.0, 1.0)
    b2 = np.clip(b2, 0.0, 1.0)
    b0 = np.clip(1.0 - b1 - b2, 0.0, 1.0)
    norm = b0 + b1 + b2
    norm[norm == 0.0] = 1.0
    bary = np.stack([b0, b1, b2], axis=1) / norm[:, None]
    return pix_row * res + col, pix_tri, bary


def bake_gbuffer(mesh: IndexedMesh, layout: UvLayout, resolution: int,
                 threads: int = 1) -> GBuffer:
    """Rasterize world positions and occupancy into an atlas-sized buffer."""
    _check_resolution(resolution)
    layout.validate()
    if layout.num_triangles != mesh.num_triangles:
        raise MeshError("layout triangle count does not match the mesh")

    positions = np.zeros((resolution, resolution, 3))
    occupancy = np.zeros((resolution, resolution), dtype=bool)
    triangle_id = np.full((resolution, resolution), -1, dtype=np.int32)

    uv_px = layout.corner_uvs * resolution
    ranges = split_ranges(layout.num_triangles, max(1, threads) * 4)
    chunk_args = [(uv_px[a:b], resolution) for a, b in ranges]
    starts = [a for a, _ in ranges]
    results = thread_map(_rasterize_chunk, chunk_args, threads)

    corners = mesh.positions[mesh.indices]
    flat_pos = positions.reshape(-1, 3)
    flat_occ = occupancy.reshape(-1)
    flat_tid = triangle_id.reshape(-1)
    for start, (idx, local_tri, bary) in zip(starts, results):
        if not len(idx):
            continue
        tri = local_tri + start
        world = np.einsum("pk,pkc->pc", bary, corners[tri])
        flat_pos[idx] = world
        flat_occ[idx] = True
        flat_tid[idx] = tri
    gbuffer = GBuffer(TextureImage(positions, occupancy), triangle_id)
    gbuffer.validate()
    return gbuffer


# ------------------------------------------------------------------ attributes

def constant_field(value):
    """Sampler returning the same value for every query point."""
    value = np.asarray(value, dtype=np.float64)

    def sampler(positions, normals=None):
        return np.broadcast_to(value, positions.shape[:-1] + value.shape).copy()

    return sampler


def geometry_normal_field(positions, normals=None):
    """Sampler that passes the geometric normal hint through."""
    if normals is None:
        raise MeshError("geometry normal field needs the normal hint")
    return normals


def _orthonormal_tangent(normal):
    """(K, 3) deterministic tangent perpendicular to each unit normal."""
    helper = np.zeros_like(normal)
    helper[np.arange(len(normal)), np.argmin(np.abs(normal), axis=1)] = 1.0
    t = np.cross(helper, normal)
    return t / np.linalg.norm(t, axis=1, keepdims=True)


def _tangent_frames(mesh, layout):
    """Per-triangle orthonormal (tangent, bitangent, normal) from UV deltas.

    Returns (tangent, bitangent, normal, degenerate_uv mask).  Where the
    UV parameterization collapses, the frame falls back to a tangent
    built from the geometry alone.
    """
    tri3 = mesh.positions[mesh.indices]
    e1 = tri3[:, 1] - tri3[:, 0]
    e2 = tri3[:, 2] - tri3[:, 0]
    uv = layout.corner_uvs
    du1 = uv[:, 1, 0] - uv[:, 0, 0]
    dv1 = uv[:, 1, 1] - uv[:, 0, 1]
    du2 = uv[:, 2, 0] - uv[:, 0, 0]
    dv2 = uv[:, 2, 1] - uv[:, 0, 1]
    det = du1 * dv2 - du2 * dv1
    edge_scale = np.maximum(
        np.maximum(np.abs(du1), np.abs(dv1)),
        np.maximum(np.abs(du2), np.abs(dv2)),
    )
    degenerate = np.abs(det) <= 1e-9 * np.maximum(edge_scale, 1e-12) ** 2

    normal = face_normals(mesh)
    flat = ~np.any(normal != 0.0, axis=1)
    normal[flat] = (0.0, 0.0, 1.0)

    safe_det = np.where(degenerate, 1.0, det)
    raw_t = (dv2[:, None] * e1 - dv1[:, None] * e2) / safe_det[:, None]
    raw_t[degenerate] = e1[degenerate]
    raw_t -= np.einsum("tc,tc->t", raw_t, normal)[:, None] * normal
    norms = np.linalg.norm(raw_t, axis=1)
    bad = norms <= 1e-12
    if np.any(bad):
        raw_t[bad] = _orthonormal_tangent(normal[bad])
        norms = np.linalg.norm(raw_t, axis=1)
        degenerate = degenerate | bad
    tangent = raw_t / norms[:, None]
    bitangent = np.cross(normal, tangent)
    return tangent, bitangent, normal, degenerate


def bake_attributes(gbuffer: GBuffer, albedo_field, normal_field,
                    mesh: IndexedMesh, layout: UvLayout,
                    diagnostics: dict | None = None):
    """Sample albedo and tangent-space normal maps over the G-buffer.

    Tangent normals are encoded as RGB = n * 0.5 + 0.5 in per-triangle
    (T, B, N) frames; unoccupied texels stay zero.  When `diagnostics`
    is given, the number of baked triangles whose UV frame needed the
    geometry fallback lands under "degenerate_uv_triangles".
    """
    gbuffer.validate()
    occ = gbuffer.position.occupancy
    res_shape = occ.shape
    albedo = np.zeros(res_shape + (3,))
    normal_img = np.zeros(res_shape + (3,))

    tid = gbuffer.triangle_id[occ]
    if len(tid):
        points = gbuffer.position.pixels[occ]
        tangent, bitangent, tri_normal, degenerate = _tangent_frames(mesh, layout)
        hint = tri_normal[tid]

        colors = np.clip(np.asarray(albedo_field(points, hint), dtype=np.float64),
                         0.0, 1.0)
        albedo[occ] = colors

        world_n = np.asarray(normal_field(points, hint), dtype=np.float64)
        lengths = np.linalg.norm(world_n, axis=1, keepdims=True)
        world_n = np.where(lengths > 1e-12, world_n / np.maximum(lengths, 1e-12),
                           hint)
        local = np.stack(
            [
                np.einsum("pc,pc->p", world_n, tangent[tid]),
                np.einsum("pc,pc->p", world_n, bitangent[tid]),
                np.einsum("pc,pc->p", world_n, tri_normal[tid]),
            ],
            axis=1,
        )
        local /= np.linalg.norm(local, axis=1, keepdims=True)
        normal_img[occ] = local * 0.5 + 0.5
        if diagnostics is not None:
            baked = np.unique(tid)
            diagnostics["degenerate_uv_triangles"] = int(
                degenerate[baked].sum()
            )
    elif diagnostics is not None:
        diagnostics["degenerate_uv_triangles"] = 0

    albedo_img = TextureImage(albedo, occ.copy())
    normal_tex = TextureImage(normal_img, occ.copy())
    albedo_img.validate()
    normal_tex.validate()
    return albedo_img, normal_tex


# -------------------------------------------------------------------- dilation

_NEIGHBOR_SHIFTS = [
    (dr, dc)
    for dr in (-1, 0, 1)
    for dc in (-1, 0, 1)
    if (dr, dc) != (0, 0)
]


def _shift2d(arr: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """Shift with zero fill; the (dr, dc) neighbor lands at each texel."""
    out = np.zeros_like(arr)
    src_r = slice(max(0, dr), arr.shape[0] + min(0, dr))
    dst_r = slice(max(0, -dr), arr.shape[0] + min(0, -dr))
    src_c = slice(max(0, dc), arr.shape[1] + min(0, dc))
    dst_c = slice(max(0, -dc), arr.shape[1] + min(0, -dc))
    out[dst_r, dst_c] = arr[src_r, src_c]
    return out


def dilate_margins(image: TextureImage, iterations: int) -> TextureImage:
    """Grow chart borders: each pass fills the 3x3 ring of new texels with
    the mean of their already-occupied neighbors.  Existing texels are
    never rewritten, so k passes leave the input bit-identical under its
    own mask while occupancy grows like k morphological dilations.

    Occupancy grows with cheap boolean shifts; values are gathered only
    at the new ring texels, which keeps each pass proportional to the
    ring size instead of the image area.
    """
    if iterations < 0:
        raise MeshError("iterations must be >= 0")
    image.validate()
    out = image.copy()
    height, width = out.occupancy.shape
    for _ in range(iterations):
        occ = out.occupancy
        grown = occ.copy()
        for dr, dc in _NEIGHBOR_SHIFTS:
            grown |= _shift2d(occ, dr, dc)
        ring = np.nonzero(grown & ~occ)
        if not len(ring[0]):
            break
        rows, cols = ring
        acc = np.zeros((len(rows), out.channels))
        count = np.zeros(len(rows))
        flat_pixels = out.pixels.reshape(-1, out.channels)
        flat_occ = occ.reshape(-1)
        for dr, dc in _NEIGHBOR_SHIFTS:
            nr = rows + dr
            nc = cols + dc
            inside = (nr >= 0) & (nr < height) & (nc >= 0) & (nc < width)
            flat = nr[inside] * width + nc[inside]
            hit = flat_occ[flat]
            targets = np.nonzero(inside)[0][hit]
            acc[targets] += flat_pixels[flat[hit]]
            count[targets] += 1.0
        out.pixels[rows, cols] = acc / count[:, None]
        out.occupancy = grown
    return out


# ------------------------------------------------------------------- image IO

def write_texture_png(path, image: TextureImage, srgb: bool = False) -> None:
    """8-bit PNG; sRGB chunk tags color textures, linear data goes bare."""
    image.validate()
    data = np.round(np.clip(image.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    if image.channels == 1:
        pil = Image.fromarray(data[:, :, 0], mode="L")
    elif image.channels == 3:
        pil = Image.fromarray(data, mode="RGB")
    elif image.channels == 4:
        pil = Image.fromarray(data, mode="RGBA")
    else:
        raise MeshError(f"cannot write {image.channels}-channel PNG")
    info = PngImagePlugin.PngInfo()
    if srgb:
        info.add(b"sRGB", b"\x00")  # rendering intent: perceptual
    pil.save(Path(path), format="PNG", pnginfo=info, compress_level=6)


def encode_texture_png(image: TextureImage, srgb: bool = False) -> bytes:
    """Same encoding as write_texture_png, returned as bytes."""
    import io

    buf = io.BytesIO()
    image.validate()
    data = np.round(np.clip(image.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    mode = {1: "L", 3: "RGB", 4: "RGBA"}.get(image.channels)
    if mode is None:
        raise MeshError(f"cannot encode {image.channels}-channel PNG")
    pil = Image.fromarray(data[:, :, 0] if mode == "L" else data, mode=mode)
    info = PngImagePlugin.PngInfo()
    if srgb:
        info.add(b"sRGB", b"\x00")
    pil.save(buf, format="PNG", pnginfo=info, compress_level=6)
    return buf.getvalue()


def read_texture_png(path) -> TextureImage:
    with Image.open(Path(path)) as pil:
        data = np.asarray(pil, dtype=np.float64) / 255.0
    if data.ndim == 2:
        data = data[:, :, None]
    return TextureImage(data, np.ones(data.shape[:2], dtype=bool))


def save_gbuffer(path, gbuffer: GBuffer) -> None:
    """Raw 32-bit float positions + mask + ids, with a JSON sidecar."""
    gbuffer.validate()
    path = Path(path)
    blob = (
        gbuffer.position.pixels.astype("<f4").tobytes()
        + gbuffer.position.occupancy.astype("u1").tobytes()
        + gbuffer.triangle_id.astype("<i4").tobytes()
    )
    path.write_bytes(blob)
    meta = {"width": gbuffer.position.width, "height": gbuffer.position.height}
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(meta, indent=2) + "\n", encoding="utf-8"
    )


def load_gbuffer(path) -> GBuffer:
    path = Path(path)
    meta = json.loads(
        path.with_suffix(path.suffix + ".json").read_text(encoding="utf-8")
    )
    w, h = int(meta["width"]), int(meta["height"])
    blob = path.read_bytes()
    expect = h * w * 3 * 4 + h * w + h * w * 4
    if len(blob) != expect:
        raise MeshError(f"G-buffer blob is {len(blob)} bytes, expected {expect}")
    n = h * w
    pos = np.frombuffer(blob[: n * 12], dtype="<f4").astype(np.float64)
    occ = np.frombuffer(blob[n * 12: n * 13], dtype="u1").astype(bool)
    tid = np.frombuffer(blob[n * 13:], dtype="<i4").astype(np.int32)
    gbuffer = GBuffer(
        TextureImage(pos.reshape(h, w, 3), occ.reshape(h, w)),
        tid.reshape(h, w),
    )
    gbuffer.validate()
    return gbuffer
