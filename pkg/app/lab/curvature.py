"""
Curvature bound fields x -> K_x and their ball suprema K(B_x(rho)).

A field is radial when it depends on the chart radius only; for those the
ball B_c(rho) covers exactly the radii [max(0, r_c - rho), r_c + rho] (every
model is rotationally symmetric about the chart origin), so the supremum is a
one-dimensional maximisation. Other fields are maximised over a seeded point
cloud drawn once in the chart plus the ball center, which keeps the supremum
nondecreasing in the radius.
"""

import logging
from typing import Callable, Optional

import numpy as np
import sympy as sp
from scipy.optimize import minimize_scalar

from app.enums.lab_enums import CurvatureFieldEnum
from app.lab.errors import LabInputError
from app.lab.geometry import ManifoldModel, as_points, chart_radius, check_in_chart, distances, gauss_curvature
from app.lab.warp import R_SYMBOL, parse_expression

logger = logging.getLogger(__name__)

X_SYMBOL = sp.Symbol("x", real=True)
Y_SYMBOL = sp.Symbol("y", real=True)

DEFAULT_SUP_SAMPLES = 10_000
RADIAL_GRID_SIZE = 4097


class CurvatureField:
    def __init__(self, model: ManifoldModel, evaluator: Callable[[np.ndarray], np.ndarray], label: str,
                 radial_profile: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 constant: Optional[float] = None, samples: int = DEFAULT_SUP_SAMPLES, seed: int = 0):
        self.model = model
        self.label = label
        self._evaluator = evaluator
        self.radial_profile = radial_profile
        self.constant = constant
        self.samples = samples
        self.seed = seed
        self._cloud = None
        self._cloud_values = None
        if radial_profile is not None:
            self._radial_grid = np.linspace(0.0, model.r_max, RADIAL_GRID_SIZE)
            self._radial_values = radial_profile(self._radial_grid)

    @property
    def is_radial(self) -> bool:
        return self.radial_profile is not None

    def __call__(self, points) -> np.ndarray:
        points = as_points(points)
        if self.constant is not None:
            return np.full(points.shape[:-1], self.constant)
        return np.asarray(self._evaluator(points), dtype=float)

    def sup_on_ball(self, center, radius: float) -> float:
        """K(B_center(radius)) = sup of K_z over rho(center, z) <= radius."""
        center = check_in_chart(self.model, center)
        if radius < 0.0:
            raise LabInputError(f"Ball radius must be nonnegative, got {radius}")
        if self.constant is not None:
            return float(self.constant)
        if self.is_radial:
            r_c = float(chart_radius(center))
            return self._sup_on_interval(max(0.0, r_c - radius), min(self.model.r_max, r_c + radius))
        return self._sup_on_cloud(center, radius)

    def sup_on_balls(self, centers, radii) -> np.ndarray:
        centers = as_points(np.atleast_2d(centers))
        radii = np.broadcast_to(np.asarray(radii, dtype=float), centers.shape[:1])
        if self.constant is not None:
            return np.full(radii.shape, float(self.constant))
        return np.array([self.sup_on_ball(c, float(rho)) for c, rho in zip(centers, radii)])

    def _sup_on_interval(self, lo: float, hi: float) -> float:
        profile = self.radial_profile
        inside = (self._radial_grid > lo) & (self._radial_grid < hi)
        nodes = np.concatenate([[lo, hi], self._radial_grid[inside]])
        values = np.concatenate([profile(np.array([lo, hi])), self._radial_values[inside]])
        best = int(np.argmax(values))
        value = float(values[best])
        if hi - lo <= 0.0:
            return value
        # refine inside the grid cell pair around the sampled maximum
        step = self._radial_grid[1] - self._radial_grid[0]
        a, b = max(lo, nodes[best] - step), min(hi, nodes[best] + step)
        if b > a:
            refined = minimize_scalar(lambda s: -float(profile(np.array([s]))[0]), bounds=(a, b),
                                      method="bounded", options={"xatol": 1e-12})
            value = max(value, -float(refined.fun))
        return value

    def _ensure_cloud(self):
        if self._cloud is not None:
            return
        rng = np.random.default_rng(self.seed)
        cloud = []
        # rejection sampling from the bounding square of the chart disc
        while sum(len(c) for c in cloud) < self.samples:
            candidates = rng.uniform(-self.model.r_max, self.model.r_max, size=(self.samples, 2))
            cloud.append(candidates[chart_radius(candidates) <= self.model.r_max])
        self._cloud = np.concatenate(cloud)[: self.samples]
        self._cloud_values = self(self._cloud)
        logger.debug(f"Sampled {self.samples} chart points for curvature field {self.label}")

    def _sup_on_cloud(self, center: np.ndarray, radius: float) -> float:
        self._ensure_cloud()
        value = float(self(center[None])[0])
        r_c = float(chart_radius(center))
        # rho(center, z) >= |r_z - r_c| by the triangle inequality through the pole
        near = np.abs(chart_radius(self._cloud) - r_c) <= radius
        if not np.any(near):
            return value
        candidates = self._cloud[near]
        within = distances(self.model, np.broadcast_to(center, candidates.shape), candidates) <= radius
        if np.any(within):
            value = max(value, float(np.max(self._cloud_values[near][within])))
        return value

    def __repr__(self):
        return f"<CurvatureField(label={self.label}, model={self.model.kind.value})>"


def negative_ricci_min_field(model: ManifoldModel, samples: int = DEFAULT_SUP_SAMPLES, seed: int = 0) -> CurvatureField:
    """The tightest admissible field K_x = -ricci_min(x)."""
    if model.is_constant_curvature:
        kappa = model.curvature_constant
        return CurvatureField(model, lambda x: np.full(x.shape[:-1], -kappa), "-ricci_min", constant=-kappa + 0.0)

    pole = model.tolerances.pole_threshold

    def profile(r):
        return -model.warp.gauss_curvature(np.asarray(r, dtype=float), pole)

    return CurvatureField(model, lambda x: -gauss_curvature(model, x), "-ricci_min", radial_profile=profile,
                          samples=samples, seed=seed)


def constant_field(model: ManifoldModel, value: float) -> CurvatureField:
    return CurvatureField(model, lambda x: np.full(x.shape[:-1], float(value)), f"K={value}", constant=float(value))


def expression_field(model: ManifoldModel, expression: str, samples: int = DEFAULT_SUP_SAMPLES,
                     seed: int = 0) -> CurvatureField:
    """
    Field from an expression in the chart coordinates x, y and/or the radius r.

    Raises:
        WarpExpressionError: if the expression is outside the grammar
    """
    expr = parse_expression(expression, {"x": X_SYMBOL, "y": Y_SYMBOL, "r": R_SYMBOL})
    symbols = expr.free_symbols
    if symbols <= {R_SYMBOL}:
        fn = sp.lambdify(R_SYMBOL, expr, "numpy")

        def profile(r):
            r = np.asarray(r, dtype=float)
            return np.asarray(fn(r), dtype=float) + np.zeros_like(r)

        return CurvatureField(model, lambda x: profile(chart_radius(x)), expression, radial_profile=profile,
                              samples=samples, seed=seed)

    planar = expr.subs(R_SYMBOL, sp.sqrt(X_SYMBOL ** 2 + Y_SYMBOL ** 2))
    fn = sp.lambdify((X_SYMBOL, Y_SYMBOL), planar, "numpy")

    def evaluator(points):
        return np.asarray(fn(points[..., 0], points[..., 1]), dtype=float) + np.zeros(points.shape[:-1])

    return CurvatureField(model, evaluator, expression, samples=samples, seed=seed)


def build_field(model: ManifoldModel, kind: CurvatureFieldEnum, value: Optional[float] = None,
                expression: Optional[str] = None, samples: int = DEFAULT_SUP_SAMPLES, seed: int = 0) -> CurvatureField:
    kind = CurvatureFieldEnum(kind)
    if kind == CurvatureFieldEnum.NEGATIVE_RICCI_MIN:
        return negative_ricci_min_field(model, samples, seed)
    if kind == CurvatureFieldEnum.CONSTANT:
        if value is None:
            raise LabInputError("Constant curvature field needs a value")
        return constant_field(model, value)
    if expression is None:
        raise LabInputError("Expression curvature field needs an expression")
    return expression_field(model, expression, samples, seed)


def is_admissible(field: CurvatureField, points) -> bool:
    """K_x >= -ricci_min(x) at every given point, i.e. Ric >= -K holds there."""
    points = as_points(points)
    return bool(np.all(field(points) >= -gauss_curvature(field.model, points) - 1e-12))
