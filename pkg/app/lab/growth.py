"""
Volume growth of geodesic balls against the entropy-convexity growth bound

    V_R <= V_2e (V_2e / V_e)^(R/e) exp[K(B_x0(R + 2e)) / 2 * R (R + e)]

evaluated in log space, since the exponential overflows long before the
interesting radii.
"""

import math
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from app.enums.lab_enums import TransportMethodEnum
from app.lab.curvature import CurvatureField
from app.lab.entropy import entropy_along_path, mesh_entropy
from app.lab.errors import DomainError, LabInputError
from app.lab.geometry import ManifoldModel, ball_volume, chart_radius, check_in_chart
from app.lab.measures import grid_from_profile, uniform_ball_lattice, uniform_ball_profile
from app.lab.transport import interpolate, monotone_radial_map, plan_between

logger = logging.getLogger(__name__)

JENSEN_TOLERANCE = 1e-6

# (model, x0, R) -> area of B_x0(R)
VolumeFn = Callable[[ManifoldModel, np.ndarray, float], float]


def _check_growth_args(V_eps: float, V_2eps: float, R: float, eps: float) -> None:
    if not (V_eps > 0.0 and V_2eps > 0.0):
        raise DomainError(f"Ball volumes must be positive, got V_eps={V_eps}, V_2eps={V_2eps}")
    if not eps > 0.0:
        raise DomainError(f"eps must be positive, got {eps}")
    if R < 2.0 * eps:
        raise DomainError(f"Growth bound needs R >= 2 eps, got R={R}, eps={eps}")


def log_growth_bound(V_eps: float, V_2eps: float, K_ball: float, R: float, eps: float) -> float:
    """Natural log of the growth bound."""
    _check_growth_args(V_eps, V_2eps, R, eps)
    log_v1, log_v2 = math.log(V_eps), math.log(V_2eps)
    return log_v2 + (R / eps) * (log_v2 - log_v1) + 0.5 * K_ball * R * (R + eps)


def growth_bound(V_eps: float, V_2eps: float, K_ball: float, R: float, eps: float) -> float:
    """
    V_2e (V_2e / V_e)^(R/e) exp[K_ball / 2 * R (R + e)].

    Returns inf when the bound exceeds double precision.

    Raises:
        DomainError: if a volume is not positive or R < 2 eps
    """
    log_bound = log_growth_bound(V_eps, V_2eps, K_ball, R, eps)
    if log_bound > math.log(np.finfo(float).max):
        return math.inf
    return math.exp(log_bound)


def linear_k_ball(C: float, rho_o_x0: float, R: float, eps: float) -> float:
    """K(B_x0(R + 2e)) for a field with K_x <= C (1 + rho(o, x))."""
    return C * (1.0 + rho_o_x0 + R + 2.0 * eps)


def growth_bound_linear(V_eps: float, V_2eps: float, C: float, rho_o_x0: float, R: float, eps: float) -> float:
    """Growth bound for curvature fields that grow at most linearly with the distance from the origin."""
    if C < 0.0:
        raise DomainError(f"C must be nonnegative, got {C}")
    if rho_o_x0 < 0.0:
        raise DomainError(f"rho_o(x0) must be nonnegative, got {rho_o_x0}")
    return growth_bound(V_eps, V_2eps, linear_k_ball(C, rho_o_x0, R, eps), R, eps)


@dataclass
class GrowthReport:
    x0: List[float]
    eps: float
    R_grid: List[float]
    V: List[float]
    bound: List[float]
    K_ball: List[float]
    margins: List[float]
    log_margins: List[float]
    V_eps: float
    V_2eps: float
    bound_linear: Optional[List[float]] = None
    log_margins_linear: Optional[List[float]] = None
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = all(m >= 0.0 for m in self.log_margins)
        if self.log_margins_linear is not None:
            self.passed = self.passed and all(m >= 0.0 for m in self.log_margins_linear)

    def rows(self) -> List[Dict[str, float]]:
        rows = []
        for i, R in enumerate(self.R_grid):
            row = {"R": R, "V_R": self.V[i], "bound": self.bound[i], "log_margin": self.log_margins[i]}
            if self.bound_linear is not None:
                row["bound_linear"] = self.bound_linear[i]
                row["log_margin_linear"] = self.log_margins_linear[i]
            rows.append(row)
        return rows

    def to_dict(self) -> Dict[str, object]:
        data = asdict(self)
        data["pass"] = data.pop("passed")
        return data


def max_admissible_R(model: ManifoldModel, x0, eps: float) -> float:
    """Largest R with B_x0(R + 2e) inside the chart disc."""
    return model.r_max - float(chart_radius(check_in_chart(model, x0))) - 2.0 * eps


def verify_growth(model: ManifoldModel, K: CurvatureField, x0, eps: float, R_grid: Sequence[float],
                  C: Optional[float] = None, volume: VolumeFn = ball_volume) -> GrowthReport:
    """
    Compare measured ball volumes V_R with the growth bound over R_grid.

    K(B_x0(R + 2e)) comes from the field's ball supremum. With C given the
    linear-growth form is evaluated too, with rho_o(x0) the distance from the
    chart origin.

    Raises:
        DomainError: if B_x0(R + 2e) leaves the chart for some R, naming the largest admissible R
    """
    x0 = check_in_chart(model, x0)
    R_grid = sorted(float(R) for R in R_grid)
    if not R_grid:
        raise LabInputError("R grid is empty")
    limit = max_admissible_R(model, x0, eps)
    if R_grid[-1] > limit * (1.0 + 1e-12):
        raise DomainError(f"Ball B(x0, R + 2 eps) with R={R_grid[-1]} exits the chart;"
                          f" the largest admissible R is {limit:.6g}")
    V_eps = volume(model, x0, eps)
    V_2eps = volume(model, x0, 2.0 * eps)
    rho_o = float(chart_radius(x0))

    V, bounds, k_balls, margins, log_margins = [], [], [], [], []
    linear, log_linear = [], []
    for R in R_grid:
        V_R = volume(model, x0, R)
        k_ball = K.sup_on_ball(x0, R + 2.0 * eps)
        log_bound = log_growth_bound(V_eps, V_2eps, k_ball, R, eps)
        bound = growth_bound(V_eps, V_2eps, k_ball, R, eps)
        V.append(V_R)
        k_balls.append(k_ball)
        bounds.append(bound)
        margins.append(bound - V_R)
        log_margins.append(log_bound - math.log(V_R))
        if C is not None:
            linear.append(growth_bound_linear(V_eps, V_2eps, C, rho_o, R, eps))
            log_linear.append(log_growth_bound(V_eps, V_2eps, linear_k_ball(C, rho_o, R, eps), R, eps)
                              - math.log(V_R))

    report = GrowthReport(x0=x0.tolist(), eps=eps, R_grid=R_grid, V=V, bound=bounds, K_ball=k_balls,
                          margins=margins, log_margins=log_margins, V_eps=V_eps, V_2eps=V_2eps,
                          bound_linear=linear if C is not None else None,
                          log_margins_linear=log_linear if C is not None else None)
    logger.info(f"Volume growth at x0={report.x0}, eps={eps}: min log-margin {min(log_margins):.4g},"
                f" pass={report.passed}")
    return report


def growth_curve(model: ManifoldModel, K: CurvatureField, x0, eps: float, R_grid: Sequence[float],
                 C: Optional[float] = None, volume: VolumeFn = ball_volume) -> List[Dict[str, float]]:
    return verify_growth(model, K, x0, eps, R_grid, C, volume=volume).rows()


@dataclass
class JensenStep:
    t: float
    support_radius: float
    entropy: float
    lower_bound: float
    slack: float


def check_jensen_step(model: ManifoldModel, x0, eps: float, R: float, t_grid: Sequence[float],
                      spacing_ratio: float = 0.1, tolerance: float = JENSEN_TOLERANCE,
                      volume: VolumeFn = ball_volume) -> List[JensenStep]:
    """
    Ent(mu_t) >= -log V_(e + t(R + e)) along the interpolation from the uniform
    measure on B_e(x0) to the uniform measure on B_R(x0).

    At the chart origin both measures are radial grids and Ent(mu_t) is exact;
    elsewhere they are matched lattices moved along the optimal permutation.
    """
    x0 = check_in_chart(model, x0)
    if not 0.0 < eps < R:
        raise DomainError(f"Jensen step needs 0 < eps < R, got eps={eps}, R={R}")
    if float(chart_radius(x0)) + R + 2.0 * eps > model.r_max:
        raise DomainError(f"Ball B(x0, R + 2 eps) exits the chart (r_max={model.r_max})")

    if float(chart_radius(x0)) == 0.0:
        mu0 = grid_from_profile(model, uniform_ball_profile(eps))
        mu1 = grid_from_profile(model, uniform_ball_profile(R))
        radial_map = monotone_radial_map(model, mu0, mu1)
        ent_at = lambda t: entropy_along_path(model, mu0, radial_map, t)
    else:
        spacing = spacing_ratio * eps
        mu0 = uniform_ball_lattice(model, x0, eps, spacing)
        mu1 = uniform_ball_lattice(model, x0, R, spacing * R / eps)
        plan = plan_between(model, mu0, mu1, TransportMethodEnum.EXACT)
        ent_at = lambda t: mesh_entropy(model, interpolate(plan, t))

    steps = []
    for t in t_grid:
        radius = eps + t * (R + eps)
        lower = -math.log(volume(model, x0, radius))
        ent = ent_at(float(t))
        steps.append(JensenStep(t=float(t), support_radius=radius, entropy=ent, lower_bound=lower,
                                slack=ent - lower))
    worst = min(step.slack for step in steps)
    if worst < -tolerance:
        logger.warning(f"Jensen step fails at x0={x0.tolist()}: min slack {worst:.3e}")
    return steps
