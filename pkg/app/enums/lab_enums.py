from enum import Enum

class ModelKindEnum(str, Enum):
    EUCLIDEAN_PLANE = "euclidean-plane"
    HYPERBOLIC_PLANE = "hyperbolic-plane"
    SPHERE_CAP = "sphere-cap"
    SURFACE_OF_REVOLUTION = "surface-of-revolution"

class MeasurePresetEnum(str, Enum):
    UNIFORM_BALL = "uniform-ball"
    ANNULUS = "annulus"
    RADIAL_PROFILE = "radial-profile"
    TABLE = "table"

class CurvatureFieldEnum(str, Enum):
    NEGATIVE_RICCI_MIN = "negative-ricci-min"
    CONSTANT = "constant"
    EXPRESSION = "expression"

class TransportMethodEnum(str, Enum):
    RADIAL = "radial"
    EXACT = "exact"
    SINKHORN = "sinkhorn"

class RealizationEnum(str, Enum):
    RADIAL = "radial"
    DISCRETE = "discrete"

class EntropyEstimatorEnum(str, Enum):
    MESH = "mesh"
    BINNING = "binning"

class EntropyStateEnum(str, Enum):
    FINITE = "finite"
    INFINITE = "infinite"

class CommandEnum(str, Enum):
    COMPARE = "compare"
    DISTORTION = "distortion"
    TRANSPORT = "transport"
    CHECK_ENTROPY_CONVEXITY = "check-entropy-convexity"
    PROBE_CURVATURE = "probe-curvature"
    VOLUME_GROWTH = "volume-growth"
    SUITE = "suite"

class OutputFormatEnum(str, Enum):
    CSV = "csv"
    JSON = "json"
