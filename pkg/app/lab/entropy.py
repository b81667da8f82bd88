"""
Relative entropy Ent(nu) = integral of rho log rho dm, its behaviour along
Wasserstein geodesics, the K-weighted convexity check and the small-ball
curvature probe.
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.enums.lab_enums import EntropyEstimatorEnum, EntropyStateEnum, RealizationEnum, TransportMethodEnum
from app.lab.curvature import CurvatureField
from app.lab.errors import DomainError, GeometryInconsistencyError, LabInputError, SingularMeasureError
from app.lab.geometry import (
    ManifoldModel,
    as_points,
    chart_radius,
    check_in_chart,
    exp_map,
    gauss_curvature,
    log_map,
    log_maps,
    metric_norm,
    metric_tensor,
    orthonormal_frame,
)
from app.lab.jacobi import radial_jacobian
from app.lab.measures import (
    GridMeasure,
    ParticleMeasure,
    gauss_legendre,
    grid_from_profile,
    RadialProfile,
    triangle_areas,
    uniform_ball_lattice,
)
from app.lab.transport import RadialMap, interpolate, monotone_radial_map, plan_between, pushforward_grid

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 5e-3
DEFAULT_T_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))


############################
######### ENTROPY ##########
############################

def _xlogy_masses(masses: np.ndarray, areas: np.ndarray) -> float:
    positive = masses > 0.0
    return float(np.sum(masses[positive] * np.log(masses[positive] / areas[positive])))


def mesh_entropy(model: ManifoldModel, particles: ParticleMeasure, points: Optional[np.ndarray] = None) -> float:
    """
    Entropy of the piecewise-constant density carried by a triangulated particle measure.

    Raises:
        SingularMeasureError: if the measure has no mesh
        GeometryInconsistencyError: if a triangle is folded or degenerate
    """
    if not particles.has_mesh:
        raise SingularMeasureError("Particle measure without a mesh has no density")
    points = particles.points if points is None else np.asarray(points, dtype=float)
    areas = triangle_areas(model, points, particles.triangles)
    if np.any(areas <= 0.0):
        raise GeometryInconsistencyError(f"{int(np.sum(areas <= 0.0))} folded triangle(s) in the pushed mesh")
    return _xlogy_masses(particles.triangle_weights, areas)


def entropy(model: ManifoldModel, mu: Union[GridMeasure, ParticleMeasure]) -> float:
    """
    Ent(mu) = sum of m_i log(m_i / area_i), with 0 log 0 = 0.

    Raises:
        SingularMeasureError: for a bare point cloud (Ent = +inf)
    """
    if isinstance(mu, GridMeasure):
        return _xlogy_masses(mu.masses, mu.areas)
    return mesh_entropy(model, mu)


def entropy_state(model: ManifoldModel, mu) -> Tuple[EntropyStateEnum, Optional[float]]:
    """Entropy as a report state: finite with its value, or infinite without one."""
    try:
        return EntropyStateEnum.FINITE, entropy(model, mu)
    except SingularMeasureError:
        return EntropyStateEnum.INFINITE, None


def binned_entropy(model: ManifoldModel, points: np.ndarray, weights: np.ndarray, width: float,
                   origin: np.ndarray) -> float:
    """Entropy of a point cloud re-binned on square chart cells of the given width anchored at origin."""
    cells = np.floor((points - origin) / width).astype(np.int64)
    keys, inverse = np.unique(cells, axis=0, return_inverse=True)
    masses = np.bincount(inverse.ravel(), weights=weights, minlength=len(keys))
    centers = origin + (keys + 0.5) * width
    density = np.sqrt(np.linalg.det(metric_tensor(model, centers)))
    return _xlogy_masses(masses, width * width * density)


def entropy_along_path(model: ManifoldModel, mu0: GridMeasure, radial_map: RadialMap, t: float,
                       nodes: int = 8) -> float:
    """
    Ent(mu_t) = Ent(mu0) - integral of log J_t dmu0 for mu_t = (F_t)_# mu0.

    Raises:
        GeometryInconsistencyError: if J_t <= 0 somewhere on the support
    """
    if not 0.0 <= t <= 1.0:
        raise LabInputError(f"t must lie in [0, 1], got {t}")
    ent0 = entropy(model, mu0)
    if t == 0.0:
        return ent0
    F_t = radial_map.interpolant(t)
    cdf = radial_map.cdf0
    f = model.warp.f

    def integrand(s):
        jac = radial_jacobian(model, F_t, s.ravel()).reshape(s.shape)
        if np.any(~np.isfinite(jac)) or np.any(jac <= 0.0):
            raise GeometryInconsistencyError(f"Transport Jacobian J_{t} is not positive on the support")
        return np.log(jac) * cdf.density(s) * f(s)

    edges = cdf.edges
    correction = 2.0 * math.pi * float(gauss_legendre(edges[:-1], edges[1:], integrand, nodes).sum())
    return ent0 - correction


############################
##### CONVEXITY CHECK ######
############################

@dataclass
class ConvexityReport:
    t_grid: List[float]
    ent_values: List[float]
    rhs_values: List[float]
    slack: List[float]
    K_integral: float
    w2_sq: float
    tolerance: float
    realization: RealizationEnum
    ent_direct: Optional[List[float]] = None
    concavity_slack: Optional[List[float]] = None
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(min(self.slack) >= -self.tolerance) if self.slack else True

    @property
    def min_slack(self) -> float:
        return float(min(self.slack)) if self.slack else 0.0

    def to_dict(self) -> Dict[str, object]:
        data = asdict(self)
        data["realization"] = self.realization.value
        data["ent"] = data.pop("ent_values")
        data["rhs"] = data.pop("rhs_values")
        data["pass"] = data.pop("passed")
        return data


def k_integral_radial(model: ManifoldModel, K: CurvatureField, radial_map: RadialMap, nodes: int = 4) -> float:
    """Integral of K(B_x(rho(F(x), x))) rho(F(x), x)^2 dmu0 for a radial transport."""
    cdf = radial_map.cdf0
    x, w = np.polynomial.legendre.leggauss(nodes)
    a, b = cdf.edges[:-1, None], cdf.edges[1:, None]
    s = 0.5 * (a + b) + 0.5 * (b - a) * x
    s = s.ravel()
    displacement = np.abs(radial_map(s) - s)
    centers = np.stack([s, np.zeros_like(s)], axis=-1)
    if K.is_radial or K.constant is not None:
        sup = K.sup_on_balls(centers, displacement)
        weight = 2.0 * math.pi * cdf.density(s) * model.warp.f(s) * (0.5 * (b - a) * w).ravel()
        return float(np.sum(sup * displacement ** 2 * weight))
    # non-radial field on a radial pair: average the ball suprema over the angle
    angles = 2.0 * math.pi * (np.arange(16) + 0.5) / 16
    total = 0.0
    for angle in angles:
        rotated = np.stack([s * math.cos(angle), s * math.sin(angle)], axis=-1)
        sup = K.sup_on_balls(rotated, displacement)
        weight = cdf.density(s) * model.warp.f(s) * (0.5 * (b - a) * w).ravel()
        total += float(np.sum(sup * displacement ** 2 * weight)) * (2.0 * math.pi / len(angles))
    return total


def _check_radial_convexity(model, K, mu0, mu1, t_grid, tolerance, cross_validate) -> ConvexityReport:
    radial_map = monotone_radial_map(model, mu0, mu1)
    ent0, ent1 = entropy(model, mu0), entropy(model, mu1)
    k_int = k_integral_radial(model, K, radial_map)
    ent_values, rhs_values, slack, direct = [], [], [], []
    for t in t_grid:
        ent_t = entropy_along_path(model, mu0, radial_map, t)
        rhs = (1.0 - t) * ent0 + t * ent1 + 0.5 * t * (1.0 - t) * k_int
        ent_values.append(ent_t)
        rhs_values.append(rhs)
        slack.append(rhs - ent_t)
        if cross_validate:
            pushed = mu1 if t == 1.0 else pushforward_grid(radial_map, mu0, t)
            direct.append(entropy(model, pushed))
    return ConvexityReport(t_grid=list(t_grid), ent_values=ent_values, rhs_values=rhs_values, slack=slack,
                           K_integral=k_int, w2_sq=radial_map.cost(), tolerance=tolerance,
                           realization=RealizationEnum.RADIAL, ent_direct=direct if cross_validate else None)


def _check_discrete_convexity(model, K, mu0, mu1, t_grid, tolerance, workers) -> ConvexityReport:
    for name, measure in (("mu0", mu0), ("mu1", mu1)):
        if not isinstance(measure, ParticleMeasure) or not measure.has_mesh:
            raise LabInputError(f"{name} must be a triangulated particle measure for the discrete realization")
    plan = plan_between(model, mu0, mu1, TransportMethodEnum.EXACT, workers=workers)
    if not plan.is_permutation():
        raise LabInputError("Discrete realization needs an optimal plan that is a permutation (equal-size lattices)")
    ent0, ent1 = mesh_entropy(model, mu0), mesh_entropy(model, mu1)
    i, j, mass = plan.support()
    moved = mu1.points[j]
    displacement = metric_norm(model, mu0.points[i], log_maps(model, mu0.points[i], moved))
    k_int = float(np.sum(mass * K.sup_on_balls(mu0.points[i], displacement) * displacement ** 2))

    def ent_at(t):
        if t == 0.0:
            return ent0
        if t == 1.0:
            return ent1
        return mesh_entropy(model, interpolate(plan, t))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        ent_values = list(pool.map(ent_at, t_grid))
    rhs_values = [(1.0 - t) * ent0 + t * ent1 + 0.5 * t * (1.0 - t) * k_int for t in t_grid]
    slack = [rhs - ent for rhs, ent in zip(rhs_values, ent_values)]
    return ConvexityReport(t_grid=list(t_grid), ent_values=ent_values, rhs_values=rhs_values, slack=slack,
                           K_integral=k_int, w2_sq=plan.cost, tolerance=tolerance,
                           realization=RealizationEnum.DISCRETE)


def check_convexity(model: ManifoldModel, K: CurvatureField, mu0, mu1, t_grid: Sequence[float] = DEFAULT_T_GRID,
                    realization: RealizationEnum = RealizationEnum.RADIAL, tolerance: float = DEFAULT_TOLERANCE,
                    cross_validate: bool = False, workers: int = 1) -> ConvexityReport:
    """
    Evaluate Ent(mu_t) <= (1-t) Ent(mu0) + t Ent(mu1) + t(1-t)/2 * K-integral on a t grid.

    The radial realization takes rotationally symmetric grid measures and uses
    the entropy-Jacobian identity; the discrete one takes triangulated lattices
    and moves their meshes along the optimal permutation.
    """
    realization = RealizationEnum(realization)
    if any(not 0.0 <= t <= 1.0 for t in t_grid):
        raise LabInputError(f"t grid must lie in [0, 1], got {list(t_grid)}")
    if realization == RealizationEnum.RADIAL:
        report = _check_radial_convexity(model, K, mu0, mu1, t_grid, tolerance, cross_validate)
    else:
        report = _check_discrete_convexity(model, K, mu0, mu1, t_grid, tolerance, workers)
    logger.info(f"Entropy convexity ({realization.value}): min slack {report.min_slack:.3e}, pass={report.passed}")
    return report


def convexity_refinement(model: ManifoldModel, K: CurvatureField, profile0: RadialProfile, profile1: RadialProfile,
                         resolutions: Sequence[Tuple[int, int]], t_grid: Sequence[float] = DEFAULT_T_GRID,
                         tolerance: float = DEFAULT_TOLERANCE) -> List[ConvexityReport]:
    """Radial convexity check repeated on successively refined grids."""
    reports = []
    for n_r, n_theta in resolutions:
        mu0 = grid_from_profile(model, profile0, n_r, n_theta)
        mu1 = grid_from_profile(model, profile1, n_r, n_theta)
        reports.append(check_convexity(model, K, mu0, mu1, t_grid, RealizationEnum.RADIAL, tolerance))
    return reports


############################
###### CURVATURE PROBE #####
############################

@dataclass
class ProbeResult:
    z0: List[float]
    r: float
    beta: float
    direction: List[float]
    ent_gap: float
    w2_sq: float
    estimate: float
    comparison: float
    tolerance: float
    estimator: EntropyEstimatorEnum
    estimator_std: float = 0.0
    containment: Optional[Dict[str, float]] = None
    violation: bool = field(init=False)

    def __post_init__(self):
        if not self.w2_sq > 0.0:
            raise GeometryInconsistencyError(f"Probe transport cost must be positive, got {self.w2_sq}")
        self.violation = bool(self.estimate > self.comparison + self.tolerance)

    def to_dict(self) -> Dict[str, object]:
        data = asdict(self)
        data["estimator"] = self.estimator.value
        return data


def _probe_frames(model: ManifoldModel, z0: np.ndarray, direction: np.ndarray, r: float):
    e1, _ = orthonormal_frame(model, z0, direction)
    c0 = exp_map(model, z0, -r * e1)
    c1 = exp_map(model, z0, r * e1)
    # along the geodesic c0 -> z0 -> c1 the unit tangent is parallel; the normal follows by orientation
    frame0 = orthonormal_frame(model, c0, log_map(model, c0, z0))
    frame1 = orthonormal_frame(model, c1, -log_map(model, c1, z0))
    return e1, (c0, frame0), (c1, frame1)


def ellipse_containment(model: ManifoldModel, z0, frame: Tuple[np.ndarray, np.ndarray], points: np.ndarray,
                        r: float, beta: float, eps0: float = 0.1) -> Dict[str, float]:
    """
    Check supp mu_1/2 inside the ellipse with semiaxes beta_i = beta (1 + r^2 (k_i + eps0/2n) / 2).

    k_1 = 0 along the geodesic and k_2 = the Gauss curvature at z0 across it.
    """
    n = 2
    z0 = as_points(z0)
    e1, e2 = frame
    kappa = float(gauss_curvature(model, z0))
    semiaxes = beta * (1.0 + r * r * (np.array([0.0, kappa]) + eps0 / (2 * n)) / 2.0)
    g = metric_tensor(model, z0)
    v = log_maps(model, np.broadcast_to(z0, points.shape), points)
    coords = np.stack([v @ g @ e1, v @ g @ e2], axis=-1)
    normalized = np.sqrt(np.sum((coords / semiaxes) ** 2, axis=-1))
    return {
        "semiaxis_1": float(semiaxes[0]),
        "semiaxis_2": float(semiaxes[1]),
        "max_normalized_radius": float(normalized.max()),
        "fraction_inside": float(np.mean(normalized <= 1.0)),
    }


def curvature_probe(model: ManifoldModel, z0, r: float, beta: float, K: CurvatureField,
                    direction=(1.0, 0.0), spacing: Optional[float] = None,
                    estimator: EntropyEstimatorEnum = EntropyEstimatorEnum.MESH, tolerance: float = 0.1,
                    eps0: float = 0.1, offsets: int = 4) -> ProbeResult:
    """
    Small-ball probe of the curvature bound at z0.

    Uniform measures on B_beta(exp_z0(-r e1)) and B_beta(exp_z0(r e1)) are
    matched by the exact discrete plan; 8 (Ent(mu_1/2) - Ent(mu0)/2 - Ent(mu1)/2) / W2^2
    estimates -Ric(z0) in the limit and is compared with K(B_z0(6r)).

    Raises:
        DomainError: unless beta <= r/10 and B_z0(6r) lies in the chart
    """
    z0 = check_in_chart(model, z0)
    estimator = EntropyEstimatorEnum(estimator)
    if not 0.0 < beta <= r / 10.0 * (1.0 + 1e-12):
        raise DomainError(f"Probe needs 0 < beta <= r/10, got beta={beta}, r={r}")
    if float(chart_radius(z0)) + 6.0 * r > model.r_max:
        raise DomainError(f"Probe ball B(z0, 6r) with r={r} exits the chart (r_max={model.r_max})")
    spacing = beta / 6.0 if spacing is None else spacing
    direction = np.asarray(direction, dtype=float)

    e1, (c0, frame0), (c1, frame1) = _probe_frames(model, z0, direction, r)
    mu0 = uniform_ball_lattice(model, c0, beta, spacing, frame0)
    mu1 = uniform_ball_lattice(model, c1, beta, spacing, frame1)
    plan = plan_between(model, mu0, mu1, TransportMethodEnum.EXACT)
    mid = interpolate(plan, 0.5)

    std = 0.0
    if estimator == EntropyEstimatorEnum.MESH:
        if not plan.is_permutation():
            raise GeometryInconsistencyError("Probe plan is not a permutation; the mesh cannot be moved")
        gap = mesh_entropy(model, mid) - 0.5 * mesh_entropy(model, mu0) - 0.5 * mesh_entropy(model, mu1)
    else:
        width = beta / 4.0
        gaps = []
        for k in range(offsets):
            shift = width * np.array([k % 2, k // 2 % 2], dtype=float) / 2.0
            ents = [binned_entropy(model, m.points, m.weights, width, m.points.T @ m.weights - width / 2 + shift)
                    for m in (mu0, mid, mu1)]
            gaps.append(ents[1] - 0.5 * ents[0] - 0.5 * ents[2])
        gap = float(np.mean(gaps))
        std = float(np.std(gaps))

    estimate = 8.0 * gap / plan.cost
    _, e2 = orthonormal_frame(model, z0, e1)
    containment = ellipse_containment(model, z0, (e1, e2), mid.points, r, beta, eps0)
    result = ProbeResult(z0=z0.tolist(), r=r, beta=beta, direction=direction.tolist(), ent_gap=gap,
                         w2_sq=plan.cost, estimate=estimate, comparison=K.sup_on_ball(z0, 6.0 * r),
                         tolerance=tolerance, estimator=estimator, estimator_std=std, containment=containment)
    logger.debug(f"Probe z0={z0.tolist()} r={r}: estimate={estimate:.5f}, comparison={result.comparison:.5f}")
    return result


@dataclass
class ProbeExtrapolation:
    z0: List[float]
    radii: List[float]
    estimates: List[float]
    spreads: List[float]
    comparison: float
    intercept: float
    slope: float
    tolerance: float
    violation: bool
    probes: List[ProbeResult]

    def to_dict(self) -> Dict[str, object]:
        data = {k: v for k, v in asdict(self).items() if k != "probes"}
        data["probes"] = [p.to_dict() for p in self.probes]
        return data


def probe_extrapolate(model: ManifoldModel, z0, radii: Sequence[float], K: CurvatureField,
                      beta_ratio: float = 0.1, directions: int = 8, spacing_ratio: float = 1.0 / 6.0,
                      estimator: EntropyEstimatorEnum = EntropyEstimatorEnum.MESH, tolerance: float = 0.1,
                      eps0: float = 0.1, workers: int = 1, seed: int = 0) -> ProbeExtrapolation:
    """
    Run the probe over radii and directions and fit estimate(r) = a + b r^2.

    Directions are equally spaced from a seeded random phase. The intercept a
    is the r -> 0 estimate; spreads are (max - min) / |mean| per radius.
    """
    if len(radii) < 2:
        raise LabInputError("Extrapolation needs at least two probe radii")
    phase = float(np.random.default_rng(seed).uniform(0.0, 2.0 * math.pi))
    angles = phase + 2.0 * math.pi * np.arange(directions) / directions
    tasks = [(float(r), (math.cos(a), math.sin(a))) for r in radii for a in angles]

    def run(task):
        r, direction = task
        return curvature_probe(model, z0, r, beta_ratio * r, K, direction, spacing=spacing_ratio * beta_ratio * r,
                               estimator=estimator, tolerance=tolerance, eps0=eps0)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        probes = list(pool.map(run, tasks))

    estimates, spreads = [], []
    for index in range(len(radii)):
        values = np.array([p.estimate for p in probes[index * directions:(index + 1) * directions]])
        mean = float(values.mean())
        estimates.append(mean)
        spreads.append(float((values.max() - values.min()) / abs(mean)) if mean != 0.0 else 0.0)
    r2 = np.asarray(radii, dtype=float) ** 2
    slope, intercept = np.polyfit(r2, np.asarray(estimates), 1)
    comparison = min(p.comparison for p in probes)
    violation = bool(intercept > comparison + tolerance or any(p.violation for p in probes))
    return ProbeExtrapolation(z0=list(as_points(z0).tolist()), radii=[float(r) for r in radii], estimates=estimates,
                              spreads=spreads, comparison=comparison, intercept=float(intercept),
                              slope=float(slope), tolerance=tolerance, violation=violation, probes=probes)
