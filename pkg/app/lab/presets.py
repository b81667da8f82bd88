"""
Built-in models and measure presets.

The variable-warp surfaces use f(r) = (sinh r + a sinh 2r) / (1 + 2a): the
normalisation keeps f'(0) = 1 without changing the Gauss curvature -f''/f.
"""

from typing import Callable, Dict, List

from app.enums.lab_enums import MeasurePresetEnum, ModelKindEnum
from app.lab.errors import LabInputError
from app.lab.geometry import ManifoldModel, euclidean_plane, hyperbolic_plane, sphere_cap, surface_of_revolution
from app.lab.warp import ExpressionWarp

VARIABLE_WARP_R_MAX = 3.0


def variable_warp_expression(a: float) -> str:
    return f"(sinh(r) + {a}*sinh(2*r))/{1.0 + 2.0 * a}"


def variable_warp_surface(a: float, r_max: float = VARIABLE_WARP_R_MAX) -> ManifoldModel:
    """Surface of revolution with pole curvature -(1 + 8a)/(1 + 2a), tending to -4 far out."""
    warp = ExpressionWarp(variable_warp_expression(a))
    warp.validate(r_max)
    return surface_of_revolution(warp, r_max)


MODEL_PRESETS: Dict[str, Dict[str, object]] = {
    "euclidean-plane": {
        "kind": ModelKindEnum.EUCLIDEAN_PLANE,
        "build": euclidean_plane,
        "warp": "r",
        "r_max": 10.0,
        "description": "Flat plane, K = 0.",
    },
    "hyperbolic-plane": {
        "kind": ModelKindEnum.HYPERBOLIC_PLANE,
        "build": hyperbolic_plane,
        "warp": "sinh(r)",
        "r_max": 12.0,
        "description": "Hyperbolic plane of curvature -1.",
    },
    "sphere-cap": {
        "kind": ModelKindEnum.SPHERE_CAP,
        "build": sphere_cap,
        "warp": "sin(r)",
        "r_max": 1.2,
        "description": "Geodesically convex cap of the unit sphere, curvature +1.",
    },
    "variable-warp-mild": {
        "kind": ModelKindEnum.SURFACE_OF_REVOLUTION,
        "build": lambda: variable_warp_surface(0.05),
        "warp": variable_warp_expression(0.05),
        "r_max": VARIABLE_WARP_R_MAX,
        "description": "Surface of revolution, curvature from -1.27 at the pole towards -4.",
    },
    "variable-warp-strong": {
        "kind": ModelKindEnum.SURFACE_OF_REVOLUTION,
        "build": lambda: variable_warp_surface(0.25),
        "warp": variable_warp_expression(0.25),
        "r_max": VARIABLE_WARP_R_MAX,
        "description": "Surface of revolution with curvature exactly -2 at the pole.",
    },
}

MEASURE_PRESETS: Dict[str, Dict[str, str]] = {
    MeasurePresetEnum.UNIFORM_BALL.value: {
        "parameters": "radius",
        "description": "Normalised volume measure on the geodesic ball of the given radius around the chart origin.",
    },
    MeasurePresetEnum.ANNULUS.value: {
        "parameters": "inner, outer",
        "description": "Normalised volume measure on inner <= r <= outer.",
    },
    MeasurePresetEnum.RADIAL_PROFILE.value: {
        "parameters": "sigma, radius",
        "description": "Gaussian-like density exp(-r^2 / (2 sigma^2)) truncated at radius.",
    },
    MeasurePresetEnum.TABLE.value: {
        "parameters": "table",
        "description": "Two-column (r, density) file, monotone cubic interpolation between rows.",
    },
}


def build_preset_model(name: str) -> ManifoldModel:
    try:
        builder: Callable[[], ManifoldModel] = MODEL_PRESETS[name]["build"]
    except KeyError:
        raise LabInputError(f"Unknown model preset '{name}'; choose one of {sorted(MODEL_PRESETS)}")
    return builder()


def preset_catalog() -> Dict[str, List[Dict[str, object]]]:
    """Models and measure presets with their parameters, ready for JSON."""
    models = [
        {
            "name": name,
            "kind": entry["kind"].value,
            "warp": entry["warp"],
            "r_max": entry["r_max"],
            "description": entry["description"],
        }
        for name, entry in MODEL_PRESETS.items()
    ]
    models.append({
        "name": ModelKindEnum.SURFACE_OF_REVOLUTION.value,
        "kind": ModelKindEnum.SURFACE_OF_REVOLUTION.value,
        "warp": "expression in r (sin, sinh, cos, cosh, exp, pi, E) or an (r, f) table",
        "r_max": None,
        "description": "User-defined warp with f(0) = 0, f'(0) = 1, f > 0 on (0, r_max].",
    })
    measures = [{"name": name, **entry} for name, entry in MEASURE_PRESETS.items()]
    return {"models": models, "measures": measures}
