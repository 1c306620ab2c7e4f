"""Spherical-Gaussian environment math and deferred shading."""

import json
import math

import numpy as np
import pytest

from meshbake.material import PbrMaterial
from meshbake.sg import (
    LOBE_AXES,
    LOBE_COUNT,
    SgEnvironment,
    ShadingError,
    ShadingInputs,
    covering_radius,
    default_sharpness,
    demodulation_metric,
    eval_sg,
    fibonacci_sphere,
    fit_amplitudes,
    load_environment,
    load_equirect,
    make_environment,
    regenerate_axes,
    save_environment,
    sg_irradiance,
    sg_total_energy,
    shade_deferred,
)

from conftest import random_rotation


def uniform_sphere(rng, n):
    d = rng.normal(size=(n, 3))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def single_lobe_env(lobe, mu=1.0, sharpness=None):
    amplitudes = np.zeros(LOBE_COUNT)
    amplitudes[lobe] = mu
    return make_environment(amplitudes, sharpness=sharpness)


# ----------------------------------------------------------------- lobe bank

def test_frozen_axes_cover_sphere():
    assert covering_radius(LOBE_AXES) < math.radians(30.0)
    np.testing.assert_allclose(np.linalg.norm(LOBE_AXES, axis=1), 1.0, atol=1e-12)


def test_frozen_axes_match_regeneration():
    np.testing.assert_allclose(regenerate_axes(), LOBE_AXES, atol=1e-9)


def test_default_sharpness_half_falloff():
    lam = default_sharpness(LOBE_AXES)
    assert 8.0 < lam < 14.0
    # At the mean nearest-neighbor midpoint the lobe reads half its peak.
    dots = LOBE_AXES @ LOBE_AXES.T
    np.fill_diagonal(dots, -2.0)
    theta_half = 0.5 * np.arccos(np.clip(dots.max(axis=1), -1, 1)).mean()
    assert math.exp(lam * (math.cos(theta_half) - 1.0)) == pytest.approx(0.5)


def test_validate_rejects_bad_environments():
    with pytest.raises(ShadingError, match="nonnegative"):
        make_environment(-np.ones(LOBE_COUNT))
    with pytest.raises(ShadingError, match="24"):
        make_environment(np.ones(7))
    clustered = np.tile([[0.0, 0.0, 1.0]], (LOBE_COUNT, 1))
    with pytest.raises(ShadingError, match="hole"):
        make_environment(np.ones(LOBE_COUNT), axes=clustered, sharpness=10.0)
    with pytest.raises(ShadingError, match="coincide"):
        make_environment(np.ones(LOBE_COUNT), axes=clustered)


# ------------------------------------------------------------------- eval_sg

def test_eval_at_axis_gives_amplitude():
    # Single active lobe: the exponent vanishes on-axis, leaving mu.
    env = single_lobe_env(5, mu=2.5)
    assert eval_sg(env, env.axes[5]) == pytest.approx(2.5, rel=1e-12)


def test_eval_zero_amplitudes():
    env = make_environment(np.zeros(LOBE_COUNT))
    dirs = fibonacci_sphere(50)
    np.testing.assert_array_equal(eval_sg(env, dirs), np.zeros(50))


def test_eval_off_axis_closed_form():
    env = single_lobe_env(0, mu=1.0, sharpness=10.0)
    axis = env.axes[0]
    # Build a direction at cos = 0.9 from the axis.
    helper = np.array([0.0, 1.0, 0.0])
    tangent = helper - (helper @ axis) * axis
    tangent /= np.linalg.norm(tangent)
    direction = 0.9 * axis + math.sqrt(1.0 - 0.81) * tangent
    assert eval_sg(env, direction) == pytest.approx(math.exp(-1.0), rel=1e-12)


def test_eval_linear_in_amplitudes(rng):
    mu1 = rng.uniform(0, 2, LOBE_COUNT)
    mu2 = rng.uniform(0, 2, LOBE_COUNT)
    dirs = uniform_sphere(rng, 64)
    a, b = 0.7, 1.9
    lhs = eval_sg(make_environment(a * mu1 + b * mu2), dirs)
    rhs = a * eval_sg(make_environment(mu1), dirs) + b * eval_sg(
        make_environment(mu2), dirs
    )
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_eval_rotation_invariant(rng):
    mu = rng.uniform(0, 2, LOBE_COUNT)
    env = make_environment(mu)
    rot = random_rotation(rng)
    rotated = SgEnvironment(
        axes=env.axes @ rot.T, sharpness=env.sharpness, amplitudes=env.amplitudes
    )
    dirs = uniform_sphere(rng, 64)
    np.testing.assert_allclose(
        eval_sg(rotated, dirs @ rot.T), eval_sg(env, dirs), atol=1e-9
    )


# ----------------------------------------------------------------- integrals

def test_total_energy_single_lobe_closed_form():
    env = single_lobe_env(3, mu=1.0, sharpness=1.0)
    assert sg_total_energy(env) == pytest.approx(
        2.0 * math.pi * (1.0 - math.exp(-2.0))
    )
    env0 = make_environment(np.zeros(LOBE_COUNT))
    assert sg_total_energy(env0) == 0.0


def test_total_energy_matches_monte_carlo(rng):
    env = make_environment(rng.uniform(0.0, 2.0, LOBE_COUNT))
    dirs = uniform_sphere(rng, 400_000)
    mc = 4.0 * np.pi * eval_sg(env, dirs).mean()
    assert sg_total_energy(env) == pytest.approx(mc, rel=0.01)


def test_irradiance_matches_monte_carlo(rng):
    dirs = uniform_sphere(rng, 400_000)
    for _ in range(5):
        env = make_environment(rng.uniform(0.0, 3.0, LOBE_COUNT))
        normal = uniform_sphere(rng, 1)[0]
        radiance = eval_sg(env, dirs)
        cosine = np.clip(dirs @ normal, 0.0, None)
        mc = 4.0 * np.pi * np.mean(radiance * cosine)
        fitted = float(sg_irradiance(env, normal))
        assert fitted == pytest.approx(mc, rel=0.05)


def test_irradiance_rotation_equivariant_and_nonnegative(rng):
    env = make_environment(rng.uniform(0.0, 2.0, LOBE_COUNT))
    rot = random_rotation(rng)
    rotated = SgEnvironment(
        axes=env.axes @ rot.T, sharpness=env.sharpness, amplitudes=env.amplitudes
    )
    normals = uniform_sphere(rng, 128)
    base = sg_irradiance(env, normals)
    np.testing.assert_allclose(
        sg_irradiance(rotated, normals @ rot.T), base, rtol=1e-9, atol=1e-12
    )
    assert np.all(base >= 0.0)


# ------------------------------------------------------------------- shading

def overhead_inputs(normal, albedo=(1.0, 1.0, 1.0), metallic=0.0, roughness=1.0):
    shape = (1, 1)
    return ShadingInputs(
        position=np.zeros(shape + (3,)),
        normal=np.broadcast_to(np.asarray(normal, float), shape + (3,)).copy(),
        albedo=np.broadcast_to(np.asarray(albedo, float), shape + (3,)).copy(),
        occupancy=np.ones(shape, dtype=bool),
        material=PbrMaterial(metallic=metallic, roughness=roughness),
        camera_position=np.array([0.0, 0.0, 5.0]),
    )


def top_lobe_env(mu=3.0):
    # Lobe 0 is the closest to +Z in the frozen bank.
    top = int(np.argmax(LOBE_AXES[:, 2]))
    return single_lobe_env(top, mu=mu)


def test_shade_cosine_ordering():
    env = top_lobe_env()
    top_axis = env.axes[int(np.argmax(env.amplitudes))]
    up = shade_deferred(overhead_inputs(top_axis), env)[0, 0]
    side_dir = np.array([top_axis[2], 0.0, -top_axis[0]])
    side_dir /= np.linalg.norm(side_dir)
    side = shade_deferred(overhead_inputs(side_dir), env)[0, 0]
    assert np.all(up > 0.0) and np.all(side > 0.0)
    assert up[0] > side[0]


def test_shade_black_environment():
    env = make_environment(np.zeros(LOBE_COUNT))
    out = shade_deferred(overhead_inputs([0, 0, 1]), env)
    np.testing.assert_array_equal(out, np.zeros_like(out))


def test_shade_unoccupied_texels_untouched():
    env = top_lobe_env()
    inputs = overhead_inputs([0, 0, 1])
    inputs.occupancy[:] = False
    out = shade_deferred(inputs, env)
    np.testing.assert_array_equal(out, np.zeros_like(out))


def test_metallic_one_kills_diffuse_exactly(rng):
    env = make_environment(rng.uniform(0.5, 2.0, LOBE_COUNT))
    inputs = overhead_inputs([0, 0, 1], albedo=(0.8, 0.3, 0.1), metallic=1.0,
                             roughness=0.4)
    total, diffuse, specular = shade_deferred(env=env, inputs=inputs,
                                              return_components=True)
    np.testing.assert_array_equal(diffuse, np.zeros_like(diffuse))
    np.testing.assert_array_equal(total, specular)


def test_diffuse_bounded_by_irradiance(rng):
    env = make_environment(rng.uniform(0.0, 2.0, LOBE_COUNT))
    normals = uniform_sphere(rng, 32)
    for n in normals:
        inputs = overhead_inputs(n, albedo=(1.0, 1.0, 1.0), metallic=0.0)
        _, diffuse, _ = shade_deferred(inputs, env, return_components=True)
        bound = float(sg_irradiance(env, n)) / np.pi
        assert np.all(diffuse[0, 0] <= bound * (1.0 + 1e-12))


def test_shade_diffuse_matches_monte_carlo(rng):
    # Matte texel: rendered value should equal albedo/pi times the true
    # cosine-weighted integral, up to the fitted-irradiance tolerance.
    dirs = uniform_sphere(rng, 400_000)
    env = make_environment(rng.uniform(0.2, 2.0, LOBE_COUNT))
    normal = np.array([0.3, -0.5, 0.8])
    normal /= np.linalg.norm(normal)
    albedo = 0.75
    inputs = overhead_inputs(normal, albedo=(albedo,) * 3, metallic=0.0,
                             roughness=1.0)
    _, diffuse, _ = shade_deferred(inputs, env, return_components=True)
    radiance = eval_sg(env, dirs)
    cosine = np.clip(dirs @ normal, 0.0, None)
    mc = albedo / np.pi * 4.0 * np.pi * np.mean(radiance * cosine)
    assert diffuse[0, 0, 0] == pytest.approx(mc, rel=0.05)


def test_shade_rejects_mismatched_shapes():
    env = top_lobe_env()
    inputs = overhead_inputs([0, 0, 1])
    inputs.albedo = np.zeros((2, 2, 3))
    with pytest.raises(ShadingError, match="albedo"):
        shade_deferred(inputs, env)


# -------------------------------------------------------------- demodulation

def test_demodulation_identity_and_offset(rng):
    img = rng.uniform(0.0, 1.0, (8, 8, 3))
    mask = np.ones((8, 8), dtype=bool)
    assert demodulation_metric(img, img, mask) == 0.0
    weights = np.array([0.2126, 0.7152, 0.0722])
    offset = img + 0.1 / weights.sum()  # +0.1 in luminance exactly
    assert demodulation_metric(img, offset, mask) == pytest.approx(0.01)


def test_demodulation_matches_loop_oracle(rng):
    a = rng.uniform(0.0, 2.0, (6, 5, 3))
    b = rng.uniform(0.0, 2.0, (6, 5, 3))
    mask = rng.uniform(size=(6, 5)) > 0.4
    w = (0.2126, 0.7152, 0.0722)
    total, count = 0.0, 0
    for y in range(6):
        for x in range(5):
            if mask[y, x]:
                la = sum(a[y, x, c] * w[c] for c in range(3))
                lb = sum(b[y, x, c] * w[c] for c in range(3))
                total += (la - lb) ** 2
                count += 1
    assert demodulation_metric(a, b, mask) == pytest.approx(
        total / count, abs=1e-12
    )


def test_demodulation_empty_mask_raises():
    img = np.zeros((4, 4, 3))
    with pytest.raises(ShadingError, match="empty mask"):
        demodulation_metric(img, img, np.zeros((4, 4), dtype=bool))


# ----------------------------------------------------------------------- IO

def test_environment_json_round_trip(tmp_path, rng):
    env = make_environment(rng.uniform(0.0, 3.0, LOBE_COUNT))
    path = tmp_path / "env.json"
    save_environment(path, env)
    back = load_environment(path)
    np.testing.assert_allclose(back.amplitudes, env.amplitudes, atol=1e-12)
    np.testing.assert_allclose(back.axes, env.axes, atol=1e-12)
    np.testing.assert_allclose(back.sharpness, env.sharpness, atol=1e-12)


def test_environment_wrong_lobe_count(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"lobe_count": 9, "amplitudes": [1] * 9}))
    with pytest.raises(ShadingError, match="expected 24"):
        load_environment(path)


def render_equirect(env, height=64, width=128):
    theta = np.pi * (np.arange(height) + 0.5) / height
    phi = 2.0 * np.pi * (np.arange(width) + 0.5) / width
    st = np.sin(theta)
    dirs = np.stack(
        [
            np.outer(st, np.cos(phi)),
            np.outer(st, np.sin(phi)),
            np.outer(np.cos(theta), np.ones_like(phi)),
        ],
        axis=-1,
    )
    return np.repeat(eval_sg(env, dirs)[..., None], 3, axis=2)


def test_fit_amplitudes_recovers_environment(rng):
    truth = make_environment(rng.uniform(0.1, 2.0, LOBE_COUNT))
    fitted = fit_amplitudes(render_equirect(truth))
    np.testing.assert_allclose(fitted.amplitudes, truth.amplitudes, atol=0.02)


def test_load_equirect_npy(tmp_path, rng):
    img = rng.uniform(0.0, 4.0, (16, 32, 3))
    path = tmp_path / "pano.npy"
    np.save(path, img)
    np.testing.assert_allclose(load_equirect(path), img)


def test_load_equirect_hdr_flat_scanlines(tmp_path):
    # Hand-built RGBE file with flat (non-RLE) scanlines: value 1.0 is
    # mantissa 128, exponent 129 (0.5 * 2^(129-128) = 1.0).
    h, w = 2, 3
    header = b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n" + f"-Y {h} +X {w}\n".encode()
    texel = bytes([128, 64, 32, 129])  # (1.0, 0.5, 0.25) linear
    path = tmp_path / "flat.hdr"
    path.write_bytes(header + texel * (h * w))
    img = load_equirect(path)
    assert img.shape == (h, w, 3)
    np.testing.assert_allclose(img, np.tile([1.0, 0.5, 0.25], (h, w, 1)))
