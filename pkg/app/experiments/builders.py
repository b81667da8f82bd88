"""
Turn validated config sections into lab objects.
"""

from typing import Union

import numpy as np

from app.enums.lab_enums import MeasurePresetEnum, ModelKindEnum
from app.lab.curvature import CurvatureField, build_field
from app.lab.errors import LabInputError
from app.lab.geometry import ManifoldModel, build_model
from app.lab.measures import GridMeasure, ParticleMeasure, build_profile, grid_from_profile, uniform_ball_lattice
from app.lab.presets import build_preset_model
from app.lab.warp import ExpressionWarp, SplineWarp
from app.schemas.config import CurvatureConfig, GridConfig, MeasureConfig, ModelConfig


def model_from_config(config: ModelConfig) -> ManifoldModel:
    if config.preset is not None:
        return build_preset_model(config.preset)
    warp = None
    if config.kind == ModelKindEnum.SURFACE_OF_REVOLUTION:
        if config.warp_table is not None:
            warp = SplineWarp.from_file(config.warp_table)
        elif config.warp is not None:
            warp = ExpressionWarp(config.warp)
        else:
            raise LabInputError("surface-of-revolution needs model.warp or model.warp_table")
    return build_model(config.kind, warp=warp, r_max=config.r_max)


def field_from_config(model: ManifoldModel, config: CurvatureConfig, seed: int) -> CurvatureField:
    return build_field(model, config.kind, value=config.value, expression=config.expression,
                       samples=config.samples, seed=seed)


def is_lattice(config: MeasureConfig) -> bool:
    return config.center is not None or config.spacing is not None


def measure_from_config(model: ManifoldModel, config: MeasureConfig, grid: GridConfig,
                        scale: int = 1) -> Union[GridMeasure, ParticleMeasure]:
    """
    A grid measure for radial presets, or a lattice on a geodesic ball when a
    center or a spacing is given.
    """
    if is_lattice(config):
        if config.preset != MeasurePresetEnum.UNIFORM_BALL or config.radius is None:
            raise LabInputError("Lattice measures are uniform balls: set preset = 'uniform-ball' and a radius")
        center = np.asarray(config.center if config.center is not None else [0.0, 0.0], dtype=float)
        spacing = config.spacing if config.spacing is not None else config.radius / 10.0
        return uniform_ball_lattice(model, center, config.radius, spacing / scale)
    profile = build_profile(config.preset, radius=config.radius, inner=config.inner, outer=config.outer,
                            sigma=config.sigma, table=config.table)
    return grid_from_profile(model, profile, grid.n_r * scale, grid.n_theta * scale)
