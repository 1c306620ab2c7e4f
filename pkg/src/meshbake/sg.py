"""Spherical-Gaussian environment lighting and deferred PBR shading.

The environment is a fixed bank of 24 lobes L(w) = sum_k mu_k *
exp(lambda_k * (w . a_k - 1)) with shared axes and sharpness; only the
grayscale amplitudes vary per environment.  Axes come from a spherical
Fibonacci lattice polished by a few fixed Lloyd iterations so that no
direction is more than 30 degrees from a lobe center (the raw 24-point
lattice leaves ~31 degree holes, which would break the coverage
guarantee).  The polished result is frozen below; regenerate_axes()
reproduces it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .material import PbrMaterial


class ShadingError(ValueError):
    pass


LOBE_COUNT = 24

# Frozen output of regenerate_axes(); see the module docstring.
LOBE_AXES = np.array([
    [0.37129237895223655, 0.04201614389319655, 0.9275648834363746],
    [-0.33899851290548083, 0.250136513892777, 0.9069243257656293],
    [0.02695396981454853, -0.5614759282570666, 0.8270539677065226],
    [0.2783002103560722, 0.6835799891609209, 0.6747350526944048],
    [-0.6792215124090814, -0.31482805389497587, 0.6629792105046903],
    [0.7585451286940587, -0.3971966462994059, 0.5165695615336028],
    [-0.38233245208334016, 0.8266384698709003, 0.4129052387817777],
    [-0.3484249420326509, -0.8889296742107716, 0.297328259802319],
    [0.8527787110529165, 0.35550515915948455, 0.38260234158446516],
    [-0.9009988478241587, 0.3141250007531092, 0.29920989308744056],
    [0.4138016257449374, -0.8944466233099247, 0.1695094468763335],
    [0.26585745693629426, 0.9637631180138285, 0.02191951066127474],
    [-0.8813206808605001, -0.4720639233691028, -0.020724616786671316],
    [0.9642214231378268, -0.20496643445519389, -0.16812438225548595],
    [-0.5042728289159273, 0.8098510587323944, -0.2997501904705784],
    [-0.15846604913768583, -0.9107798790720263, -0.3812722428242547],
    [0.7903902279961303, 0.5365322792448467, -0.295662646975493],
    [-0.8902784328458194, 0.19066132598262012, -0.413585022436912],
    [0.5557860396560036, -0.6522843853182488, -0.5153901035075172],
    [0.15853955675618508, 0.7320933642987807, -0.6624986904841739],
    [-0.6060107365094761, -0.42131347013523684, -0.6747191616649457],
    [0.5551058431899252, 0.09727221530968576, -0.8260724054131988],
    [-0.31671239086924957, 0.2767888888174278, -0.9072382115503609],
    [0.04067399145406857, -0.3720245620440106, -0.9273313063059806],
])


def fibonacci_sphere(n: int, eps: float = 0.33) -> np.ndarray:
    """n near-uniform unit vectors along the spherical Fibonacci spiral."""
    k = np.arange(n)
    z = 1.0 - 2.0 * (k + eps) / (n - 1.0 + 2.0 * eps)
    phi = k * np.pi * (3.0 - np.sqrt(5.0))
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def regenerate_axes(iterations: int = 20, quadrature: int = 80000) -> np.ndarray:
    """Recompute LOBE_AXES: Fibonacci seed + Lloyd steps on a fixed lattice."""
    pts = fibonacci_sphere(quadrature)
    axes = fibonacci_sphere(LOBE_COUNT)
    for _ in range(iterations):
        owner = np.argmax(pts @ axes.T, axis=1)
        for i in range(LOBE_COUNT):
            cell = pts[owner == i]
            if len(cell):
                c = cell.sum(axis=0)
                axes[i] = c / np.linalg.norm(c)
    return axes


def covering_radius(axes: np.ndarray, probes: int = 20000) -> float:
    """Max angle (radians) from any probe direction to its nearest axis."""
    probe = fibonacci_sphere(probes)
    best = np.clip((probe @ axes.T).max(axis=1), -1.0, 1.0)
    return float(np.arccos(best).max())


def default_sharpness(axes: np.ndarray) -> float:
    """Sharpness giving ~50% lobe falloff at neighbor midpoints.

    lambda = ln 2 / (1 - cos(theta_half)) with theta_half half the mean
    nearest-neighbor angle of the axis set.
    """
    dots = axes @ axes.T
    np.fill_diagonal(dots, -2.0)
    nn = np.arccos(np.clip(dots.max(axis=1), -1.0, 1.0))
    theta_half = 0.5 * float(nn.mean())
    if theta_half < 1e-9:
        raise ShadingError("axes coincide: no usable neighbor spacing")
    return math.log(2.0) / (1.0 - math.cos(theta_half))


@dataclass
class SgEnvironment:
    """24 spherical Gaussians with fixed geometry and free amplitudes."""

    axes: np.ndarray         # (24, 3) unit vectors
    sharpness: np.ndarray    # (24,) positive
    amplitudes: np.ndarray   # (24,) nonnegative grayscale

    def validate(self) -> None:
        if self.axes.shape != (LOBE_COUNT, 3):
            raise ShadingError(f"axes must be ({LOBE_COUNT}, 3), got {self.axes.shape}")
        if self.sharpness.shape != (LOBE_COUNT,) or np.any(self.sharpness <= 0):
            raise ShadingError("sharpness must be 24 positive scalars")
        if self.amplitudes.shape != (LOBE_COUNT,):
            raise ShadingError("amplitudes must be 24 scalars")
        if np.any(~np.isfinite(self.amplitudes)) or np.any(self.amplitudes < 0):
            raise ShadingError("amplitudes must be finite and nonnegative")
        lengths = np.linalg.norm(self.axes, axis=1)
        if np.any(np.abs(lengths - 1.0) > 1e-6):
            raise ShadingError("axes must be unit length")
        gap = covering_radius(self.axes)
        if gap >= math.radians(30.0):
            raise ShadingError(
                f"axes leave a {math.degrees(gap):.1f} degree hole; "
                "coverage requires < 30 degrees"
            )


def make_environment(amplitudes, axes=None, sharpness=None) -> SgEnvironment:
    axes = LOBE_AXES.copy() if axes is None else np.asarray(axes, dtype=np.float64)
    if sharpness is None:
        sharpness = np.full(LOBE_COUNT, default_sharpness(axes))
    elif np.isscalar(sharpness):
        sharpness = np.full(LOBE_COUNT, float(sharpness))
    else:
        sharpness = np.asarray(sharpness, dtype=np.float64)
    env = SgEnvironment(
        axes=axes,
        sharpness=sharpness,
        amplitudes=np.asarray(amplitudes, dtype=np.float64),
    )
    env.validate()
    return env


def eval_sg(env: SgEnvironment, directions: np.ndarray) -> np.ndarray:
    """Radiance of the environment along unit directions (...,3) -> (...)."""
    d = np.asarray(directions, dtype=np.float64)
    cos = d @ env.axes.T  # (..., 24)
    return np.exp(env.sharpness * (cos - 1.0)) @ env.amplitudes


def sg_total_energy(env: SgEnvironment) -> float:
    """Integral of the environment over the sphere, in closed form.

    Each lobe integrates to 2*pi*mu/lambda * (1 - exp(-2*lambda)).
    """
    lam = env.sharpness
    per_lobe = 2.0 * np.pi * env.amplitudes / lam * (1.0 - np.exp(-2.0 * lam))
    return float(per_lobe.sum())


def sg_irradiance(env: SgEnvironment, normals: np.ndarray) -> np.ndarray:
    """Cosine-weighted hemispherical integral of the environment, (...,3) -> (...).

    Uses the standard fitted approximation for the SG x clamped-cosine
    integral (validated against Monte Carlo to well under 5% for the
    default lobe bank).
    """
    n = np.asarray(normals, dtype=np.float64)
    cos = n @ env.axes.T  # (..., 24)
    lam = env.sharpness
    eml = np.exp(-lam)
    em2l = eml * eml
    rl = 1.0 / lam
    scale = 1.0 + 2.0 * em2l - rl
    bias = (eml - em2l) * rl - em2l
    x = np.sqrt(np.maximum(1.0 - scale, 0.0))
    x0 = 0.36 * cos
    x1 = x / (4.0 * 0.36)
    blended = np.where(
        np.abs(x0) <= x1,
        (x0 + x1) * (x0 + x1) / np.maximum(x, 1e-12),
        np.clip(cos, 0.0, 1.0),
    )
    per_lobe = (scale * np.clip(blended, 0.0, 1.0) + bias) * (2.0 * np.pi * rl)
    return np.maximum(per_lobe @ env.amplitudes, 0.0)


def _sg_product_integral(lam_a, axis_a, lam_b, axes_b):
    """Sphere integral of the product of two unit-amplitude SGs.

    axis_a: (..., 3); axes_b: (K, 3).  Returns (..., K).  Uses the exact
    closed form 2*pi*(exp(lam_m - lam_a - lam_b) - exp(-lam_m - lam_a -
    lam_b))/lam_m where lam_m = |lam_a*axis_a + lam_b*axis_b|; exponents
    are <= 0 so this is numerically safe for sharp lobes.
    """
    combined = lam_a[..., None, None] * axis_a[..., None, :] + (
        lam_b[:, None] * axes_b
    )
    lam_m = np.linalg.norm(combined, axis=-1)
    total = lam_a[..., None] + lam_b
    return (
        2.0 * np.pi
        * (np.exp(lam_m - total) - np.exp(-lam_m - total))
        / np.maximum(lam_m, 1e-12)
    )


@dataclass
class ShadingInputs:
    """Baked per-texel data for deferred shading, plain arrays.

    position   (H, W, 3) world positions
    normal     (H, W, 3) world unit normals
    albedo     (H, W, 3) linear RGB in [0, 1]
    occupancy  (H, W) bool
    material   object-wide metallic/roughness
    camera_position  world-space eye point for view-dependent terms
    """

    position: np.ndarray
    normal: np.ndarray
    albedo: np.ndarray
    occupancy: np.ndarray
    material: PbrMaterial
    camera_position: np.ndarray

    def validate(self) -> None:
        h, w = self.occupancy.shape
        for name in ("position", "normal", "albedo"):
            arr = getattr(self, name)
            if arr.shape != (h, w, 3):
                raise ShadingError(
                    f"{name} shape {arr.shape} does not match occupancy ({h}, {w})"
                )


def shade_deferred(
    inputs: ShadingInputs, env: SgEnvironment, return_components: bool = False
):
    """Metallic-roughness shading of occupied texels; (H, W, 3) linear RGB.

    Diffuse: albedo * (1 - metallic) * irradiance(n) / pi.  Specular: the
    GGX lobe is approximated as a spherical Gaussian about the reflection
    vector (sharpness 2/alpha^2), inner-producted with each environment
    lobe, scaled by Schlick Fresnel and Smith-style visibility.
    Unoccupied texels stay zero.  With return_components the (total,
    diffuse, specular) images are returned for diagnostics.
    """
    inputs.validate()
    occ = inputs.occupancy
    out = np.zeros(inputs.position.shape, dtype=np.float64)
    if not occ.any():
        if return_components:
            return out, out.copy(), out.copy()
        return out

    n = inputs.normal[occ]
    albedo = np.clip(inputs.albedo[occ], 0.0, 1.0)
    view = np.asarray(inputs.camera_position, dtype=np.float64) - inputs.position[occ]
    view /= np.maximum(np.linalg.norm(view, axis=1, keepdims=True), 1e-12)

    metallic = inputs.material.metallic
    roughness = max(inputs.material.roughness, 0.02)  # mirror-sharp lobes
    alpha = roughness * roughness                     # are not representable

    irradiance = sg_irradiance(env, n)
    diffuse = albedo * (1.0 - metallic) * irradiance[:, None] / np.pi

    n_dot_v = np.clip(np.sum(n * view, axis=1), 0.0, 1.0)
    reflect = 2.0 * n_dot_v[:, None] * n - view
    reflect /= np.maximum(np.linalg.norm(reflect, axis=1, keepdims=True), 1e-12)

    lam_spec = 2.0 / (alpha * alpha)
    mu_spec = 1.0 / (np.pi * alpha * alpha)
    integrals = _sg_product_integral(
        np.full(len(n), lam_spec), reflect, env.sharpness, env.axes
    )
    spec_energy = mu_spec * (integrals @ env.amplitudes)

    f0 = 0.04 * (1.0 - metallic) + albedo * metallic
    fresnel = f0 + (1.0 - f0) * (1.0 - n_dot_v[:, None]) ** 5

    # Smith-style masking with the half-alpha Schlick approximation; the
    # incident direction is taken along the reflection vector.
    k = 0.5 * alpha
    n_dot_l = np.clip(np.sum(n * reflect, axis=1), 0.0, 1.0)
    g_view = n_dot_v / (n_dot_v * (1.0 - k) + k)
    g_light = n_dot_l / (n_dot_l * (1.0 - k) + k)
    visibility = g_view * g_light / np.maximum(4.0 * n_dot_v, 1e-6)

    specular = fresnel * (spec_energy * visibility)[:, None]
    out[occ] = np.maximum(diffuse + specular, 0.0)
    if return_components:
        diffuse_img = np.zeros_like(out)
        specular_img = np.zeros_like(out)
        diffuse_img[occ] = diffuse
        specular_img[occ] = np.maximum(specular, 0.0)
        return out, diffuse_img, specular_img
    return out


def demodulation_metric(shaded_white: np.ndarray, target: np.ndarray,
                        mask: np.ndarray) -> float:
    """Mean squared luminance difference over masked texels (Rec. 709)."""
    if shaded_white.shape != target.shape:
        raise ShadingError(
            f"image shapes differ: {shaded_white.shape} vs {target.shape}"
        )
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != shaded_white.shape[:2]:
        raise ShadingError(
            f"mask shape {mask.shape} does not match {shaded_white.shape[:2]}"
        )
    if not mask.any():
        raise ShadingError("empty mask: no texels to compare")
    weights = np.array([0.2126, 0.7152, 0.0722])
    luma_a = shaded_white[mask] @ weights
    luma_b = target[mask] @ weights
    diff = luma_a - luma_b
    return float(np.mean(diff * diff))


# -------------------------------------------------------------- environment IO

def save_environment(path, env: SgEnvironment) -> None:
    env.validate()
    doc = {
        "lobe_count": LOBE_COUNT,
        "amplitudes": env.amplitudes.tolist(),
        "sharpness": env.sharpness.tolist(),
        "axes": env.axes.tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_environment(path) -> SgEnvironment:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("lobe_count") != LOBE_COUNT:
        raise ShadingError(
            f"environment has {doc.get('lobe_count')} lobes, expected {LOBE_COUNT}"
        )
    return make_environment(
        doc["amplitudes"], axes=doc.get("axes"), sharpness=doc.get("sharpness")
    )


def _read_radiance_hdr(path) -> np.ndarray:
    """Minimal Radiance RGBE (.hdr) reader -> (H, W, 3) float linear RGB."""
    with open(path, "rb") as fh:
        magic = fh.readline()
        if not magic.startswith(b"#?"):
            raise ShadingError(f"{path}: not a Radiance HDR file")
        while True:
            line = fh.readline()
            if line in (b"\n", b""):
                break
        dims = fh.readline().split()
        if len(dims) != 4 or dims[0] != b"-Y" or dims[2] != b"+X":
            raise ShadingError(f"{path}: unsupported HDR orientation {dims}")
        height, width = int(dims[1]), int(dims[3])
        data = fh.read()

    rgbe = np.zeros((height, width, 4), dtype=np.uint8)
    pos = 0
    for y in range(height):
        if data[pos] == 2 and data[pos + 1] == 2 and (
            (data[pos + 2] << 8) | data[pos + 3]
        ) == width:
            pos += 4  # adaptive RLE, one channel at a time
            for c in range(4):
                x = 0
                while x < width:
                    count = data[pos]
                    pos += 1
                    if count > 128:  # run
                        rgbe[y, x:x + count - 128, c] = data[pos]
                        pos += 1
                        x += count - 128
                    else:  # literal
                        rgbe[y, x:x + count, c] = np.frombuffer(
                            data, np.uint8, count, pos
                        )
                        pos += count
                        x += count
        else:  # flat scanline
            row = np.frombuffer(data, np.uint8, width * 4, pos)
            rgbe[y] = row.reshape(width, 4)
            pos += width * 4

    mantissa = rgbe[..., :3].astype(np.float64)
    exponent = rgbe[..., 3].astype(np.int32) - 128
    scale = np.ldexp(1.0, exponent - 8)
    rgb = mantissa * scale[..., None]
    rgb[rgbe[..., 3] == 0] = 0.0
    return rgb


def load_equirect(path) -> np.ndarray:
    """Load an equirectangular float RGB panorama (.npy or Radiance .hdr)."""
    path = Path(path)
    if path.suffix == ".npy":
        img = np.load(path)
        if img.ndim != 3 or img.shape[2] != 3:
            raise ShadingError(f"{path}: expected (H, W, 3) array, got {img.shape}")
        return np.asarray(img, dtype=np.float64)
    if path.suffix == ".hdr":
        return _read_radiance_hdr(path)
    raise ShadingError(f"{path}: unsupported environment image format")


def fit_amplitudes(equirect: np.ndarray, rows: int = 32, cols: int = 64) -> SgEnvironment:
    """Fit the 24 lobe amplitudes to an equirectangular panorama.

    Solves a solid-angle-weighted nonnegative least squares on the
    panorama's luminance sampled over a rows x cols direction grid.
    """
    from scipy.optimize import nnls

    weights = np.array([0.2126, 0.7152, 0.0722])
    luma = np.asarray(equirect, dtype=np.float64) @ weights
    h, w = luma.shape

    # Subsample source pixels, then build directions from the *source*
    # pixel centers so the design matrix matches the samples exactly.
    src_y = np.minimum((np.arange(rows) + 0.5) * h // rows, h - 1).astype(int)
    src_x = np.minimum((np.arange(cols) + 0.5) * w // cols, w - 1).astype(int)
    target = luma[np.ix_(src_y, src_x)].reshape(-1)

    theta = np.pi * (src_y + 0.5) / h
    phi = 2.0 * np.pi * (src_x + 0.5) / w
    st = np.sin(theta)
    dirs = np.stack(
        [
            np.outer(st, np.cos(phi)),
            np.outer(st, np.sin(phi)),
            np.outer(np.cos(theta), np.ones_like(phi)),
        ],
        axis=-1,
    ).reshape(-1, 3)

    sharpness = np.full(LOBE_COUNT, default_sharpness(LOBE_AXES))
    design = np.exp(sharpness * ((dirs @ LOBE_AXES.T) - 1.0))
    sqrt_w = np.sqrt(np.repeat(st, cols))
    amplitudes, _residual = nnls(design * sqrt_w[:, None], target * sqrt_w)
    return make_environment(amplitudes)
