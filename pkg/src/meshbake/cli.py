"""Command-line driver for the mesh finishing pipeline.

One subcommand per stage (extract, unwrap, bake, relight, export), a
whole-pipeline runner driven by a TOML/JSON config, and a benchmark
harness.  Flags beat environment variables (MESHBAKE_*), which beat
config values, which beat defaults.  Exit codes: 0 success, 2 invalid
input or configuration, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bake import (
    bake_attributes,
    bake_gbuffer,
    constant_field,
    default_dilation,
    dilate_margins,
    geometry_normal_field,
    read_texture_png,
    save_gbuffer,
    write_texture_png,
    TextureImage,
)
from .corpus import benchmark_mesh, build_entry, corpus_entries
from .formats import read_obj, read_ply, write_obj
from .gltf import export_glb, import_glb
from .material import MaterialError, PbrMaterial
from .mesh import IndexedMesh, MeshError, face_normals
from .parallel import resolve_threads
from .pipeline import (
    ConfigError,
    PipelineError,
    StageError,
    load_config,
    run_pipeline,
)
from .sg import ShadingError, ShadingInputs, load_environment, shade_deferred
from .tetra import (
    load_grid,
    marching_tetrahedra,
    sample_grid,
    shape_from_spec,
)
from .unwrap import UnwrapConfig, UvLayout, layout_to_svg, load_layout, \
    save_layout, unwrap

_ENV_PREFIX = "MESHBAKE_"


def _opt(value, env_name: str, cast, fallback):
    """Flag > MESHBAKE_<env_name> > fallback."""
    if value is not None:
        return value
    raw = os.environ.get(_ENV_PREFIX + env_name)
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(
            f"bad {_ENV_PREFIX}{env_name} value {raw!r}: {exc}"
        ) from exc


def _read_mesh(path) -> IndexedMesh:
    path = Path(path)
    if path.suffix.lower() == ".ply":
        return read_ply(path)
    return read_obj(path)


def _import_layout(mesh: IndexedMesh) -> UvLayout:
    """Wrap the UVs already on a mesh as a single-layer layout."""
    if mesh.corner_uvs is None:
        raise MeshError("mesh carries no texture coordinates")
    count = mesh.num_triangles
    return UvLayout(
        corner_uvs=mesh.corner_uvs,
        triangle_layer=np.zeros(count, dtype=np.uint8),
        triangle_cube_face=np.zeros(count, dtype=np.int8),
        alignment_rotation=np.eye(3),
        isotropy_flagged=False,
    )


# --------------------------------------------------------------- subcommands

def _cmd_extract(args) -> int:
    if (args.grid is None) == (args.shape is None):
        raise ConfigError("extract needs a grid file or --shape, not both")
    threads = resolve_threads(_opt(args.threads, "THREADS", int, 0) or None)
    if args.grid is not None:
        grid = load_grid(args.grid)
    else:
        spec = {"kind": args.shape}
        grid = sample_grid(shape_from_spec(spec), args.resolution)
    mesh = marching_tetrahedra(grid, threads=threads)
    write_obj(args.out, mesh)
    print(f"{args.out}: {mesh.num_triangles} triangles, "
          f"{len(mesh.positions)} vertices")
    return 0


def _cmd_unwrap(args) -> int:
    threads = resolve_threads(_opt(args.threads, "THREADS", int, 0) or None)
    mesh = _read_mesh(args.mesh)
    layout = unwrap(mesh, UnwrapConfig(), threads=threads)
    out = args.out or str(Path(args.mesh).with_suffix(".layout.bin"))
    save_layout(out, layout)
    svg = _opt(args.svg, "SVG", str, None)
    if svg:
        Path(svg).write_text(layout_to_svg(layout))
    layer_counts = np.bincount(layout.triangle_layer, minlength=3)
    print(f"{out}: {layout.num_triangles} triangles "
          f"(visible {layer_counts[0]}, occluded {layer_counts[1]}, "
          f"remainder {layer_counts[2]})"
          + (f", svg {svg}" if svg else ""))
    return 0


def _cmd_bake(args) -> int:
    threads = resolve_threads(_opt(args.threads, "THREADS", int, 0) or None)
    resolution = _opt(args.atlas_res, "ATLAS_RES", int, 1024)
    mesh = _read_mesh(args.mesh)
    layout = load_layout(args.layout)
    gbuffer = bake_gbuffer(mesh, layout, resolution, threads=threads)
    albedo, normal = bake_attributes(
        gbuffer, constant_field(args.color), geometry_normal_field,
        mesh, layout,
    )
    rounds = _opt(args.dilate, "DILATE", int, None)
    rounds = default_dilation(resolution) if rounds is None else rounds
    if rounds:
        albedo = dilate_margins(albedo, rounds)
        normal = dilate_margins(normal, rounds)
    stem = Path(args.mesh).with_suffix("")
    albedo_path = args.albedo or f"{stem}.albedo.png"
    normal_path = args.normal or f"{stem}.normal.png"
    write_texture_png(albedo_path, albedo, srgb=True)
    write_texture_png(normal_path, normal, srgb=False)
    if args.gbuffer:
        save_gbuffer(args.gbuffer, gbuffer)
    texels = int(gbuffer.position.occupancy.sum())
    print(f"{albedo_path} {normal_path}: {resolution}x{resolution}, "
          f"{texels} occupied texels, dilation {rounds}")
    return 0


def _cmd_relight(args) -> int:
    mesh, textures, material = import_glb(args.asset)
    if "albedo" not in textures:
        raise MeshError("asset carries no albedo texture to relight")
    env = load_environment(args.environment)
    threads = resolve_threads(_opt(args.threads, "THREADS", int, 0) or None)
    albedo = textures["albedo"]
    layout = _import_layout(mesh)
    gbuffer = bake_gbuffer(mesh, layout, albedo.width, threads=threads)
    occ = gbuffer.position.occupancy
    normal_image = np.zeros(gbuffer.position.pixels.shape)
    normal_image[occ] = face_normals(mesh)[gbuffer.triangle_id[occ]]
    inputs = ShadingInputs(
        position=gbuffer.position.pixels,
        normal=normal_image,
        albedo=albedo.pixels,
        occupancy=occ,
        material=material,
        camera_position=np.asarray(args.camera, dtype=np.float64),
    )
    shaded = np.clip(shade_deferred(inputs, env), 0.0, 1.0)
    write_texture_png(args.out, TextureImage(shaded, occ.copy()), srgb=True)
    print(f"{args.out}: {albedo.width}x{albedo.height} preview, "
          f"metallic {material.metallic} roughness {material.roughness}")
    return 0


def _cmd_export(args) -> int:
    threads = resolve_threads(_opt(args.threads, "THREADS", int, 0) or None)
    mesh = _read_mesh(args.mesh)
    layout = load_layout(args.layout)
    albedo = read_texture_png(args.albedo)
    normal = read_texture_png(args.normal)
    material = PbrMaterial(metallic=args.metallic, roughness=args.roughness)
    orm = None
    if args.orm:
        shape = (albedo.height, albedo.width)
        orm = TextureImage(
            np.tile((1.0, material.roughness, material.metallic), shape + (1,)),
            np.ones(shape, dtype=bool),
        )
    textured = replace(mesh, corner_uvs=layout.corner_uvs)
    size = export_glb(textured, albedo, normal, material, args.out,
                      orm_texture=orm, threads=threads)
    print(f"{args.out}: {size} bytes")
    return 0


def _cmd_pipeline(args) -> int:
    config_path = _opt(args.config, "CONFIG", str, None)
    if config_path is None:
        raise ConfigError("pipeline needs --config (or MESHBAKE_CONFIG)")
    config = load_config(config_path)
    threads = _opt(args.threads, "THREADS", int, None)
    if threads is not None:
        config = replace(config, threads=threads)
    atlas = _opt(args.atlas_res, "ATLAS_RES", int, None)
    if atlas is not None:
        config = replace(config, atlas_resolution=atlas)
    dilate = _opt(args.dilate, "DILATE", int, None)
    if dilate is not None:
        config = replace(config, dilation=dilate)
    report_path = _opt(args.report, "REPORT", str, None)
    if report_path is not None:
        config = replace(config, report_path=report_path)
    svg = _opt(args.svg, "SVG", str, None)
    if svg is not None:
        config = replace(config, svg_path=svg)
    report = run_pipeline(config)
    stages = "  ".join(
        f"{name} {seconds * 1000.0:.0f}ms"
        for name, seconds in report.stage_seconds.items()
    )
    print(f"{report.outputs.get('glb', '-')}: {report.triangle_count} triangles, "
          f"{report.texel_count} texels | {stages} "
          f"| total {report.total_seconds * 1000.0:.0f}ms")
    return 0


def _time_chain(mesh: IndexedMesh, resolution: int, runs: int,
                threads: int, out_dir: Path) -> dict:
    """Median per-stage seconds for unwrap + bake + export over `runs`."""
    samples = {"unwrap": [], "bake": [], "export": [], "total": []}
    glb_path = out_dir / "bench.glb"
    for _ in range(runs):
        t0 = time.perf_counter()
        layout = unwrap(mesh, UnwrapConfig(), threads=threads)
        t1 = time.perf_counter()
        gbuffer = bake_gbuffer(mesh, layout, resolution, threads=threads)
        albedo, normal = bake_attributes(
            gbuffer, constant_field((0.8, 0.72, 0.65)), geometry_normal_field,
            mesh, layout,
        )
        rounds = default_dilation(resolution)
        albedo = dilate_margins(albedo, rounds)
        normal = dilate_margins(normal, rounds)
        t2 = time.perf_counter()
        textured = replace(mesh, corner_uvs=layout.corner_uvs)
        export_glb(textured, albedo, normal, PbrMaterial(), glb_path,
                   threads=threads)
        t3 = time.perf_counter()
        samples["unwrap"].append(t1 - t0)
        samples["bake"].append(t2 - t1)
        samples["export"].append(t3 - t2)
        samples["total"].append(t3 - t0)
    return {name: statistics.median(values)
            for name, values in samples.items()}


def _cmd_bench(args) -> int:
    threads = resolve_threads(_opt(args.threads, "THREADS", int, 0) or None)
    seed = _opt(args.seed, "SEED", int, 0)
    runs = args.runs
    header = f"{'mesh':<28} {'tris':>6}  {'unwrap':>8} {'bake':>8} {'export':>8} {'total':>8}"
    rows = []

    def measure(name: str, mesh: IndexedMesh, resolution: int):
        with tempfile.TemporaryDirectory() as tmp:
            med = _time_chain(mesh, resolution, runs, threads, Path(tmp))
        rows.append({"mesh": name, "triangles": mesh.num_triangles,
                     "resolution": resolution, **med})
        print(f"{name:<28} {mesh.num_triangles:>6}  "
              f"{med['unwrap'] * 1000.0:>6.1f}ms {med['bake'] * 1000.0:>6.1f}ms "
              f"{med['export'] * 1000.0:>6.1f}ms {med['total'] * 1000.0:>6.1f}ms")

    print(header)
    if args.mesh:
        resolution = args.res or 1024
        measure(Path(args.mesh).name, _read_mesh(args.mesh), resolution)
    else:
        resolution = args.res or 256
        for entry in corpus_entries():
            measure(entry.name, build_entry(entry, seed=seed), resolution)

    report_path = _opt(args.report, "REPORT", str, None)
    if report_path:
        Path(report_path).write_text(json.dumps(
            {"runs": runs, "threads": threads, "rows": rows}, indent=2
        ) + "\n")
    return 0


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshbake",
        description="Isosurface extraction, UV unwrapping, texture baking, "
                    "relighting, and GLB export.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_threads(p):
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: all cores)")

    p = sub.add_parser("extract", help="isosurface a density grid or shape")
    p.add_argument("grid", nargs="?", help="density grid file")
    p.add_argument("--shape", choices=["sphere", "box", "torus"],
                   help="built-in distance field instead of a grid file")
    p.add_argument("--resolution", type=int, default=64,
                   help="samples per axis for --shape (default 64)")
    p.add_argument("--out", required=True, help="output OBJ path")
    add_threads(p)
    p.set_defaults(fn=_cmd_extract)

    p = sub.add_parser("unwrap", help="compute a UV atlas for a mesh")
    p.add_argument("mesh", help="input OBJ/PLY")
    p.add_argument("--out", help="layout path (default: <mesh>.layout.bin)")
    p.add_argument("--svg", default=None, help="also write an atlas SVG")
    add_threads(p)
    p.set_defaults(fn=_cmd_unwrap)

    p = sub.add_parser("bake", help="bake albedo/normal textures")
    p.add_argument("mesh", help="input OBJ/PLY")
    p.add_argument("layout", help="layout produced by unwrap")
    p.add_argument("--atlas-res", type=int, default=None,
                   help="texture resolution (default 1024)")
    p.add_argument("--dilate", type=int, default=None,
                   help="margin dilation rounds (default: resolution-scaled)")
    p.add_argument("--color", type=float, nargs=3, default=(0.8, 0.72, 0.65),
                   metavar=("R", "G", "B"), help="constant albedo")
    p.add_argument("--albedo", help="albedo PNG path")
    p.add_argument("--normal", help="normal-map PNG path")
    p.add_argument("--gbuffer", help="also dump the raw G-buffer")
    add_threads(p)
    p.set_defaults(fn=_cmd_bake)

    p = sub.add_parser("relight", help="preview-render a GLB under an "
                                       "environment")
    p.add_argument("asset", help="GLB produced by export")
    p.add_argument("environment", help="environment JSON")
    p.add_argument("--out", required=True, help="preview PNG path")
    p.add_argument("--camera", type=float, nargs=3, default=(0.0, 0.0, 3.0),
                   metavar=("X", "Y", "Z"), help="eye position")
    add_threads(p)
    p.set_defaults(fn=_cmd_relight)

    p = sub.add_parser("export", help="pack mesh and textures into a GLB")
    p.add_argument("mesh", help="input OBJ/PLY")
    p.add_argument("layout", help="layout produced by unwrap")
    p.add_argument("albedo", help="albedo PNG")
    p.add_argument("normal", help="normal-map PNG")
    p.add_argument("--out", required=True, help="output GLB path")
    p.add_argument("--metallic", type=float, default=0.0)
    p.add_argument("--roughness", type=float, default=0.5)
    p.add_argument("--orm", action="store_true",
                   help="embed a metallic-roughness texture")
    add_threads(p)
    p.set_defaults(fn=_cmd_export)

    p = sub.add_parser("pipeline", help="run every stage from a config file")
    p.add_argument("--config", help="TOML or JSON pipeline config")
    p.add_argument("--atlas-res", type=int, default=None)
    p.add_argument("--dilate", type=int, default=None)
    p.add_argument("--report", default=None, help="write the timing report JSON")
    p.add_argument("--svg", default=None, help="also write an atlas SVG")
    add_threads(p)
    p.set_defaults(fn=_cmd_pipeline)

    p = sub.add_parser("bench", help="time unwrap+bake+export")
    p.add_argument("--mesh", help="single mesh to time (default: corpus)")
    p.add_argument("--res", type=int, default=None,
                   help="texture resolution (default 1024; corpus 256)")
    p.add_argument("--runs", type=int, default=5, help="runs per mesh")
    p.add_argument("--seed", type=int, default=None,
                   help="corpus noise seed")
    p.add_argument("--report", default=None, help="write results as JSON")
    add_threads(p)
    p.set_defaults(fn=_cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, PipelineError, MeshError, ShadingError,
            MaterialError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
