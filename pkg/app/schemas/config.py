"""
Experiment configuration schema.

The same models validate TOML config files for the command line and request
bodies for the HTTP API.
"""

import re
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
from pathlib import Path
from typing import List, Optional, Union

from pydantic import BaseModel, Field, ValidationError, validator

from app.enums.lab_enums import (
    CommandEnum,
    CurvatureFieldEnum,
    EntropyEstimatorEnum,
    MeasurePresetEnum,
    ModelKindEnum,
    RealizationEnum,
    TransportMethodEnum,
)
from app.lab.errors import ConfigError

SCHEMA_VERSION = 1
MAX_SEED = 2 ** 64 - 1

_TOML_POSITION = re.compile(r"\(at line (\d+), column (\d+)\)")


def _positive(name: str, value):
    if value is not None and not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def _unit_interval(name: str, values: List[float]):
    for t in values:
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"{name} values must lie in [0, 1], got {t}")
    return values


def _point(value):
    if value is not None and len(value) != 2:
        raise ValueError(f"A chart point has 2 coordinates, got {value}")
    return value


##################################
########## MODEL / FIELD #########
##################################

class ModelConfig(BaseModel):
    preset: Optional[str] = Field(
        default=None,
        description="Named model preset (see list-presets); overrides kind/warp when given"
    )
    kind: ModelKindEnum = Field(
        default=ModelKindEnum.HYPERBOLIC_PLANE,
        description="Model family"
    )
    warp: Optional[str] = Field(
        default=None,
        description="Warp expression f(r) for surface-of-revolution, e.g. 'sinh(r)'"
    )
    warp_table: Optional[str] = Field(
        default=None,
        description="Two-column (r, f) file for surface-of-revolution"
    )
    r_max: Optional[float] = Field(
        default=None,
        description="Chart radius; defaults per model kind"
    )

    @validator("r_max")
    def validate_r_max(cls, value):
        return _positive("r_max", value)

    @validator("warp_table")
    def validate_warp_table(cls, value):
        if value is not None and not Path(value).is_file():
            raise ValueError(f"Warp table file '{value}' does not exist")
        return value


class CurvatureConfig(BaseModel):
    kind: CurvatureFieldEnum = Field(
        default=CurvatureFieldEnum.NEGATIVE_RICCI_MIN,
        description="'negative-ricci-min' (analytic), 'constant' or 'expression'"
    )
    value: Optional[float] = Field(default=None, description="Value of a constant field")
    expression: Optional[str] = Field(default=None, description="Field expression in x, y and/or r")
    samples: int = Field(default=10_000, description="Chart samples for ball suprema of non-radial fields")

    @validator("samples")
    def validate_samples(cls, value):
        return _positive("samples", value)


class MeasureConfig(BaseModel):
    preset: MeasurePresetEnum = Field(default=MeasurePresetEnum.UNIFORM_BALL, description="Measure preset")
    radius: Optional[float] = Field(default=None, description="Ball radius or profile truncation radius")
    inner: Optional[float] = Field(default=None, description="Annulus inner radius")
    outer: Optional[float] = Field(default=None, description="Annulus outer radius")
    sigma: Optional[float] = Field(default=None, description="Width of the gaussian-like radial profile")
    table: Optional[str] = Field(default=None, description="Two-column (r, density) file")
    center: Optional[List[float]] = Field(
        default=None,
        description="Ball center for lattice (discrete) measures; the chart origin when omitted"
    )
    spacing: Optional[float] = Field(default=None, description="Lattice spacing for discrete measures")

    @validator("radius", "outer", "sigma", "spacing")
    def validate_positive(cls, value):
        return _positive("measure parameter", value)

    @validator("inner")
    def validate_inner(cls, value):
        if value is not None and value < 0:
            raise ValueError(f"inner radius must be nonnegative, got {value}")
        return value

    @validator("center")
    def validate_center(cls, value):
        return _point(value)

    @validator("table")
    def validate_table(cls, value):
        if value is not None and not Path(value).is_file():
            raise ValueError(f"Density table file '{value}' does not exist")
        return value


class GridConfig(BaseModel):
    n_r: int = Field(default=256, description="Radial cells")
    n_theta: int = Field(default=64, description="Angular cells")

    @validator("n_r", "n_theta")
    def validate_cells(cls, value):
        return _positive("grid resolution", value)


##################################
######## COMMAND SECTIONS ########
##################################

class CompareConfig(BaseModel):
    t_grid: List[float] = Field(default_factory=lambda: [round(0.05 * i, 2) for i in range(1, 20)])
    r_grid: List[float] = Field(default_factory=lambda: [round(0.25 * i, 2) for i in range(1, 21)])
    n_values: List[int] = Field(default_factory=lambda: [2, 3, 5])
    k_min: float = -10.0
    k_points: int = 41
    tolerance: float = 1e-12

    @validator("t_grid")
    def validate_t_grid(cls, value):
        return _unit_interval("t_grid", value)

    @validator("n_values", each_item=True)
    def validate_n(cls, value):
        if value < 2:
            raise ValueError(f"dimension must be >= 2, got {value}")
        return value


class DistortionConfig(BaseModel):
    samples: int = Field(default=500, description="Random (x, y, t) triples")
    sample_radius: Optional[float] = Field(default=None, description="Chart radius the points are drawn from")
    tolerance: float = Field(default=1e-6, description="Relative error against the closed form")
    lemma_tolerance: float = Field(default=1e-8, description="Allowed negative slack of the distortion lemma")
    richardson: bool = Field(default=True, description="Also extrapolate the finite-r ratio on one pair")
    r0: float = 0.08
    levels: int = Field(default=4, description="Halving radii of the Richardson ladder, at least 4")

    @validator("samples", "r0", "tolerance", "lemma_tolerance", "levels")
    def validate_positive(cls, value):
        return _positive("distortion parameter", value)


class TransportConfig(BaseModel):
    method: TransportMethodEnum = TransportMethodEnum.EXACT
    epsilon: Optional[float] = Field(default=None, description="Sinkhorn regularisation; 1e-3 x cost scale when omitted")
    n_r: int = Field(default=16, description="Radial cells of the coarse grids used by discrete solvers")
    n_theta: int = Field(default=24, description="Angular cells of the coarse grids used by discrete solvers")
    export_plan: bool = Field(default=False, description="Write the plan as (i, j, mass, cost) triplets")
    tolerance: float = 5e-3

    @validator("epsilon", "tolerance")
    def validate_positive(cls, value):
        return _positive("transport parameter", value)


class ConvexityConfig(BaseModel):
    t_grid: List[float] = Field(default_factory=lambda: [round(0.1 * i, 1) for i in range(1, 10)])
    realization: RealizationEnum = RealizationEnum.RADIAL
    cross_validate: bool = False
    refinement: List[int] = Field(default_factory=lambda: [1], description="Grid refinement factors, e.g. [1, 2, 4]")
    tolerance: float = 5e-3
    refined_tolerance: float = 1.5e-3
    concavity_tolerance: float = 1e-8

    @validator("t_grid")
    def validate_t_grid(cls, value):
        return _unit_interval("t_grid", value)

    @validator("refinement", each_item=True)
    def validate_refinement(cls, value):
        return _positive("refinement factor", value)


class ProbeConfig(BaseModel):
    z0: List[float] = Field(default_factory=lambda: [0.0, 0.0])
    radii: List[float] = Field(default_factory=lambda: [0.2, 0.15, 0.1])
    beta_ratio: float = Field(default=0.1, description="beta / r, at most 0.1")
    spacing_ratio: float = Field(default=1.0 / 6.0, description="Lattice spacing / beta")
    directions: int = 8
    estimator: EntropyEstimatorEnum = EntropyEstimatorEnum.MESH
    tolerance: float = 0.1
    eps0: float = 0.1

    @validator("z0")
    def validate_z0(cls, value):
        return _point(value)

    @validator("beta_ratio")
    def validate_beta_ratio(cls, value):
        if not 0.0 < value <= 0.1:
            raise ValueError(f"beta_ratio must lie in (0, 0.1], got {value}")
        return value

    @validator("radii", each_item=True)
    def validate_radii(cls, value):
        return _positive("probe radius", value)


class GrowthConfig(BaseModel):
    x0: List[float] = Field(default_factory=lambda: [0.0, 0.0])
    eps: float = 1.0
    R_grid: List[float] = Field(default_factory=lambda: [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0])
    C: Optional[float] = Field(default=None, description="Slope of a linear-growth curvature bound")
    jensen_R: Optional[float] = Field(default=None, description="Outer radius for the Jensen-step check")
    jensen_t_grid: List[float] = Field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    jensen_tolerance: float = 1e-6

    @validator("x0")
    def validate_x0(cls, value):
        return _point(value)

    @validator("eps")
    def validate_eps(cls, value):
        return _positive("eps", value)


##################################
######### EXPERIMENT ROOT ########
##################################

class ExperimentConfig(BaseModel):
    schema_version: int = SCHEMA_VERSION
    command: CommandEnum = CommandEnum.COMPARE
    seed: int = 0
    workers: int = 1
    tolerance_scale: float = 1.0
    model: ModelConfig = Field(default_factory=ModelConfig)
    curvature: CurvatureConfig = Field(default_factory=CurvatureConfig)
    source: MeasureConfig = Field(default_factory=lambda: MeasureConfig(radius=1.0))
    target: MeasureConfig = Field(default_factory=lambda: MeasureConfig(radius=2.0))
    grid: GridConfig = Field(default_factory=GridConfig)
    compare: CompareConfig = Field(default_factory=CompareConfig)
    distortion: DistortionConfig = Field(default_factory=DistortionConfig)
    transport: TransportConfig = Field(default_factory=TransportConfig)
    convexity: ConvexityConfig = Field(default_factory=ConvexityConfig)
    probe: ProbeConfig = Field(default_factory=ProbeConfig)
    growth: GrowthConfig = Field(default_factory=GrowthConfig)

    @validator("schema_version")
    def validate_schema_version(cls, value):
        if value != SCHEMA_VERSION:
            raise ValueError(f"Unsupported schema_version {value}; this build reads version {SCHEMA_VERSION}")
        return value

    @validator("seed")
    def validate_seed(cls, value):
        if not 0 <= value <= MAX_SEED:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {value}")
        return value

    @validator("workers")
    def validate_workers(cls, value):
        return _positive("workers", value)

    @validator("tolerance_scale")
    def validate_tolerance_scale(cls, value):
        return _positive("tolerance_scale", value)


def _validation_message(error: ValidationError) -> ConfigError:
    first = error.errors()[0]
    location = ".".join(str(part) for part in first["loc"])
    return ConfigError(first["msg"], location=f"field {location}")


def parse_config(data: dict) -> ExperimentConfig:
    """
    Raises:
        ConfigError: with the dotted field path of the first invalid entry
    """
    try:
        return ExperimentConfig(**data)
    except ValidationError as e:
        raise _validation_message(e) from e


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Read and validate a TOML experiment config.

    Raises:
        ConfigError: "line L, column C" for TOML syntax errors, "field a.b" for schema errors
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file {path} does not exist")
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as e:
        message = str(e)
        match = _TOML_POSITION.search(message)
        location = f"line {match.group(1)}, column {match.group(2)}" if match else None
        raise ConfigError(_TOML_POSITION.sub("", message).strip(), location=location) from e
    return parse_config(data)