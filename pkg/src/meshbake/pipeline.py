"""End-to-end driver: source mesh to unwrapped, baked, exported asset.

Stages run in a fixed order -- extract (optional), unwrap, bake, relight
preview (optional), export -- each wrapped with wall-clock timing and
error tagging.  Configuration loads from TOML or JSON with strict key
checking: a typo anywhere fails validation before the first stage runs.
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .bake import (
    TextureImage,
    bake_attributes,
    bake_gbuffer,
    constant_field,
    default_dilation,
    dilate_margins,
    geometry_normal_field,
    save_gbuffer,
    write_texture_png,
    _check_resolution,
)
from .formats import read_obj, read_ply
from .gltf import export_glb
from .material import BetaParams, PbrMaterial, beta_mode
from .mesh import IndexedMesh, MeshError, face_normals
from .parallel import resolve_threads
from .sg import ShadingInputs, load_environment, shade_deferred
from .tetra import load_grid, marching_tetrahedra, sample_grid, shape_from_spec
from .unwrap import UnwrapConfig, layout_to_svg, save_layout, unwrap


class PipelineError(ValueError):
    """Base class for driver failures."""


class ConfigError(PipelineError):
    """Configuration rejected before any stage ran."""


class StageError(PipelineError):
    """A pipeline stage failed; `stage` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


# ------------------------------------------------------------- configuration

_SOURCE_KEYS = {
    "mesh": {"kind", "path"},
    "grid": {"kind", "path"},
    "sdf": {"kind", "shape", "resolution", "bounds"},
}
_SHAPE_KEYS = {"kind", "radius", "center", "half_extents", "major", "minor",
               "parts"}
_UNWRAP_KEYS = {"normal_threshold", "visible_region", "occlusion_region",
                "remainder_region", "island_padding", "proximity_slack",
                "remainder_min_cell"}
_MATERIAL_KEYS = {"metallic", "metallic_beta", "roughness", "roughness_beta",
                  "albedo"}
_ENVIRONMENT_KEYS = {"path", "camera"}
_OUTPUT_KEYS = {"glb", "report", "layout", "gbuffer", "preview", "svg"}
_TOP_KEYS = {"source", "unwrap", "material", "environment", "output",
             "atlas_resolution", "dilation", "threads", "embed_orm"}


def _reject_unknown(table: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(unknown)}")


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"{where} is missing required key {key!r}")
    return table[key]


def _table(value, where: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be a table, got {type(value).__name__}")
    return dict(value)


@dataclass
class PipelineConfig:
    """Validated description of one pipeline run."""

    source: dict
    unwrap: UnwrapConfig = field(default_factory=UnwrapConfig)
    atlas_resolution: int = 1024
    dilation: int | None = None
    material: PbrMaterial = field(default_factory=PbrMaterial)
    albedo_color: tuple = (0.8, 0.72, 0.65)
    environment_path: str | None = None
    camera_position: tuple = (0.0, 0.0, 3.0)
    glb_path: str = "asset.glb"
    report_path: str | None = None
    layout_path: str | None = None
    gbuffer_path: str | None = None
    preview_path: str | None = None
    svg_path: str | None = None
    threads: int = 0
    embed_orm: bool = False

    def validate(self) -> None:
        kind = self.source.get("kind")
        if kind not in _SOURCE_KEYS:
            raise ConfigError(
                f"source kind must be one of mesh, grid, sdf; got {kind!r}"
            )
        _reject_unknown(self.source, _SOURCE_KEYS[kind], "source")
        if kind in ("mesh", "grid"):
            _require(self.source, "path", "source")
        else:
            shape = _table(_require(self.source, "shape", "source"),
                           "source.shape")
            _reject_unknown(shape, _SHAPE_KEYS, "source.shape")
            res = self.source.get("resolution", 64)
            if not isinstance(res, int) or res < 2:
                raise ConfigError(f"sdf resolution must be an integer >= 2, got {res}")
        try:
            _check_resolution(self.atlas_resolution)
            self.unwrap.validate()
        except MeshError as exc:
            raise ConfigError(str(exc)) from exc
        if self.dilation is not None and (
            not isinstance(self.dilation, int) or self.dilation < 0
        ):
            raise ConfigError(f"dilation must be a non-negative integer, got {self.dilation}")
        color = np.asarray(self.albedo_color, dtype=np.float64)
        if color.shape != (3,) or not np.all((color >= 0.0) & (color <= 1.0)):
            raise ConfigError("albedo color must be three components in [0, 1]")
        camera = np.asarray(self.camera_position, dtype=np.float64)
        if camera.shape != (3,) or not np.all(np.isfinite(camera)):
            raise ConfigError("camera position must be three finite components")
        if self.preview_path and not self.environment_path:
            raise ConfigError("preview output needs an environment path")
        if not isinstance(self.threads, int) or self.threads < 0:
            raise ConfigError(f"threads must be a non-negative integer, got {self.threads}")


def _parse_material(table: dict) -> tuple[PbrMaterial, tuple]:
    _reject_unknown(table, _MATERIAL_KEYS, "material")
    scalars = {}
    for name in ("metallic", "roughness"):
        plain, dist = table.get(name), table.get(name + "_beta")
        if plain is not None and dist is not None:
            raise ConfigError(f"give either {name} or {name}_beta, not both")
        if dist is not None:
            if len(dist) != 2:
                raise ConfigError(f"{name}_beta needs two parameters")
            scalars[name] = beta_mode(BetaParams(float(dist[0]), float(dist[1])))
        elif plain is not None:
            value = float(plain)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
            scalars[name] = value
    material = PbrMaterial(**scalars)
    albedo = tuple(table.get("albedo", (0.8, 0.72, 0.65)))
    return material, albedo


def config_from_dict(data: dict) -> PipelineConfig:
    """Build and validate a config from plain parsed data (strict keys)."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table")
    _reject_unknown(data, _TOP_KEYS, "config")
    source = _table(_require(data, "source", "config"), "source")

    unwrap_table = _table(data.get("unwrap"), "unwrap")
    _reject_unknown(unwrap_table, _UNWRAP_KEYS, "unwrap")
    for key in ("visible_region", "occlusion_region", "remainder_region"):
        if key in unwrap_table:
            unwrap_table[key] = tuple(unwrap_table[key])
    try:
        unwrap_config = UnwrapConfig(**unwrap_table)
    except (TypeError, MeshError) as exc:
        raise ConfigError(str(exc)) from exc

    material, albedo = _parse_material(_table(data.get("material"), "material"))

    env_table = _table(data.get("environment"), "environment")
    _reject_unknown(env_table, _ENVIRONMENT_KEYS, "environment")

    output = _table(data.get("output"), "output")
    _reject_unknown(output, _OUTPUT_KEYS, "output")

    config = PipelineConfig(
        source=source,
        unwrap=unwrap_config,
        atlas_resolution=int(data.get("atlas_resolution", 1024)),
        dilation=data.get("dilation"),
        material=material,
        albedo_color=albedo,
        environment_path=env_table.get("path"),
        camera_position=tuple(env_table.get("camera", (0.0, 0.0, 3.0))),
        glb_path=output.get("glb", "asset.glb"),
        report_path=output.get("report"),
        layout_path=output.get("layout"),
        gbuffer_path=output.get("gbuffer"),
        preview_path=output.get("preview"),
        svg_path=output.get("svg"),
        threads=int(data.get("threads", 0)),
        embed_orm=bool(data.get("embed_orm", False)),
    )
    config.validate()
    return config


def load_config(path) -> PipelineConfig:
    """Parse a .toml or .json config file."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(raw.decode("utf-8"))
        elif path.suffix.lower() == ".json":
            data = json.loads(raw.decode("utf-8"))
        else:
            raise ConfigError(
                f"config must be .toml or .json, got {path.suffix!r}"
            )
    except (ValueError, UnicodeDecodeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return config_from_dict(data)


# ------------------------------------------------------------------- running

@dataclass
class ExitReport:
    """What a pipeline run produced and how long each stage took."""

    stage_seconds: dict
    total_seconds: float
    triangle_count: int
    texel_count: int
    outputs: dict
    threads: int
    diagnostics: dict

    def to_dict(self) -> dict:
        return {
            "stages": {k: round(v, 6) for k, v in self.stage_seconds.items()},
            "total_seconds": round(self.total_seconds, 6),
            "triangle_count": self.triangle_count,
            "texel_count": self.texel_count,
            "outputs": self.outputs,
            "threads": self.threads,
            "diagnostics": self.diagnostics,
        }

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


class _StageClock:
    """Accumulates named stage durations and tags their failures."""

    def __init__(self):
        self.seconds: dict[str, float] = {}

    def run(self, name: str, fn):
        start = time.perf_counter()
        try:
            result = fn()
        except Exception as exc:
            raise StageError(name, str(exc)) from exc
        finally:
            self.seconds[name] = self.seconds.get(name, 0.0) + (
                time.perf_counter() - start
            )
        return result


def _load_source(config: PipelineConfig, threads: int) -> IndexedMesh:
    source = config.source
    kind = source["kind"]
    if kind == "mesh":
        path = Path(source["path"])
        if path.suffix.lower() == ".ply":
            return read_ply(path)
        return read_obj(path)
    if kind == "grid":
        return marching_tetrahedra(load_grid(source["path"]), threads=threads)
    shape = shape_from_spec(source["shape"])
    bounds = source.get("bounds", ((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0)))
    grid = sample_grid(shape, source.get("resolution", 64), bounds)
    return marching_tetrahedra(grid, threads=threads)


def _world_normal_image(mesh: IndexedMesh, gbuffer) -> np.ndarray:
    """(H, W, 3) geometric world normals where the G-buffer is occupied."""
    image = np.zeros(gbuffer.position.pixels.shape)
    occ = gbuffer.position.occupancy
    image[occ] = face_normals(mesh)[gbuffer.triangle_id[occ]]
    return image


def run_pipeline(config: PipelineConfig) -> ExitReport:
    """Execute every configured stage; returns the timing/count report.

    Raises ConfigError for invalid configuration (nothing has run yet)
    and StageError when a stage fails partway.
    """
    config.validate()
    threads = resolve_threads(config.threads or None)
    clock = _StageClock()
    outputs: dict[str, str] = {}
    diagnostics: dict[str, int] = {}
    started = time.perf_counter()

    mesh = clock.run("extract", lambda: _load_source(config, threads))

    def do_unwrap():
        layout = unwrap(mesh, config.unwrap, threads=threads)
        if config.layout_path:
            save_layout(config.layout_path, layout)
            outputs["layout"] = str(config.layout_path)
        if config.svg_path:
            Path(config.svg_path).write_text(layout_to_svg(layout))
            outputs["svg"] = str(config.svg_path)
        return layout

    layout = clock.run("unwrap", do_unwrap)

    def do_bake():
        resolution = config.atlas_resolution
        gbuffer = bake_gbuffer(mesh, layout, resolution, threads=threads)
        if config.gbuffer_path:
            save_gbuffer(config.gbuffer_path, gbuffer)
            outputs["gbuffer"] = str(config.gbuffer_path)
        albedo, normal = bake_attributes(
            gbuffer,
            constant_field(config.albedo_color),
            geometry_normal_field,
            mesh,
            layout,
            diagnostics=diagnostics,
        )
        rounds = (default_dilation(resolution) if config.dilation is None
                  else config.dilation)
        if rounds:
            albedo = dilate_margins(albedo, rounds)
            normal = dilate_margins(normal, rounds)
        return gbuffer, albedo, normal

    gbuffer, albedo, normal = clock.run("bake", do_bake)

    if config.preview_path:
        def do_relight():
            env = load_environment(config.environment_path)
            inputs = ShadingInputs(
                position=gbuffer.position.pixels,
                normal=_world_normal_image(mesh, gbuffer),
                albedo=albedo.pixels,
                occupancy=gbuffer.position.occupancy,
                material=config.material,
                camera_position=np.asarray(config.camera_position),
            )
            shaded = np.clip(shade_deferred(inputs, env), 0.0, 1.0)
            image = TextureImage(shaded, gbuffer.position.occupancy.copy())
            write_texture_png(config.preview_path, image, srgb=True)
            outputs["preview"] = str(config.preview_path)

        clock.run("relight", do_relight)

    def do_export():
        textured = replace(mesh, corner_uvs=layout.corner_uvs)
        orm = None
        if config.embed_orm:
            shape = albedo.pixels.shape[:2]
            orm = TextureImage(
                np.tile(
                    (1.0, config.material.roughness, config.material.metallic),
                    shape + (1,),
                ),
                np.ones(shape, dtype=bool),
            )
        size = export_glb(
            textured, albedo, normal, config.material, config.glb_path,
            orm_texture=orm, threads=threads,
        )
        outputs["glb"] = str(config.glb_path)
        diagnostics["glb_bytes"] = size

    clock.run("export", do_export)

    report = ExitReport(
        stage_seconds=dict(clock.seconds),
        total_seconds=time.perf_counter() - started,
        triangle_count=mesh.num_triangles,
        texel_count=int(gbuffer.position.occupancy.sum()),
        outputs=outputs,
        threads=threads,
        diagnostics=diagnostics,
    )
    if config.report_path:
        report.write(config.report_path)
        outputs["report"] = str(config.report_path)
    return report
