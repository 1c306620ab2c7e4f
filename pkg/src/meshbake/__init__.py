"""meshbake: turn density grids into lit, textured, GLB-packaged meshes.

The pipeline stages are plain functions over immutable inputs:

    tetra.marching_tetrahedra   density grid -> triangle mesh
    unwrap.unwrap               mesh -> cube-projected UV atlas
    bake.bake_gbuffer           mesh + atlas -> per-texel world positions
    bake.bake_attributes        g-buffer -> albedo / tangent normal textures
    sg.shade_deferred           g-buffer + SG environment -> lit texture
    gltf.export_glb             mesh + textures -> single binary glTF file

pipeline.run_pipeline chains them from a single config; each stage can
also be driven from the command line, see ``meshbake --help``.
"""

from .bake import (
    GBuffer,
    TextureImage,
    bake_attributes,
    bake_gbuffer,
    default_dilation,
    dilate_margins,
)
from .gltf import GlbError, export_glb, import_glb
from .material import BetaParams, MaterialError, PbrMaterial, beta_mode
from .mesh import IndexedMesh, MeshError, make_mesh
from .pipeline import (
    ConfigError,
    ExitReport,
    PipelineConfig,
    PipelineError,
    StageError,
    load_config,
    run_pipeline,
)
from .sg import SgEnvironment, ShadingError, make_environment, shade_deferred
from .tetra import DensityGrid, GridError, marching_tetrahedra, sample_grid
from .unwrap import Layer, UnwrapConfig, UvLayout, unwrap

__all__ = [
    "BetaParams",
    "ConfigError",
    "DensityGrid",
    "ExitReport",
    "GBuffer",
    "GlbError",
    "GridError",
    "IndexedMesh",
    "Layer",
    "MaterialError",
    "MeshError",
    "PbrMaterial",
    "PipelineConfig",
    "PipelineError",
    "SgEnvironment",
    "ShadingError",
    "StageError",
    "TextureImage",
    "UnwrapConfig",
    "UvLayout",
    "bake_attributes",
    "bake_gbuffer",
    "beta_mode",
    "default_dilation",
    "dilate_margins",
    "export_glb",
    "import_glb",
    "load_config",
    "make_environment",
    "make_mesh",
    "marching_tetrahedra",
    "run_pipeline",
    "sample_grid",
    "shade_deferred",
    "unwrap",
]

__version__ = "0.1.0"
