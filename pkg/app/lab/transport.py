"""
Optimal transport between measures on a model surface.

Three realizations of the quadratic transport problem:
1. solve_exact     network simplex on a cost matrix (ot.emd) with a dual certificate
2. solve_sinkhorn  entropic regularization (ot.sinkhorn), log-domain on underflow,
                   rounded onto the exact marginals
3. RadialMap       monotone rearrangement along meridians for rotationally
                   symmetric grid measures, F = C1^-1 o C0
"""

import csv
import math
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import ot

from app.enums.lab_enums import TransportMethodEnum
from app.lab.errors import LabInputError, LabNumericError
from app.lab.geometry import GeodesicBatch, ManifoldModel, cost_matrix, geodesics
from app.lab.measures import GridMeasure, ParticleMeasure, gauss_legendre

logger = logging.getLogger(__name__)

MARGINAL_TOL = 1e-9
EMD_MAX_ITER = 1_000_000
SINKHORN_MAX_ITER = 200_000
SINKHORN_STOP = 1e-10
# exp(-x) underflows double precision a little beyond this
UNDERFLOW_EXPONENT = 700.0
BISECTION_STEPS = 60


############################
####### DISCRETE OT ########
############################

@dataclass(frozen=True)
class TransportPlan:
    coupling: np.ndarray
    costs: np.ndarray
    cost: float
    source_weights: np.ndarray
    target_weights: np.ndarray
    method: TransportMethodEnum
    dual_gap: Optional[float] = None
    epsilon: Optional[float] = None
    model: Optional[ManifoldModel] = None
    source: Optional[ParticleMeasure] = None
    target: Optional[ParticleMeasure] = None

    def marginal_error(self) -> float:
        rows = np.abs(self.coupling.sum(axis=1) - self.source_weights)
        cols = np.abs(self.coupling.sum(axis=0) - self.target_weights)
        return float(max(rows.max(initial=0.0), cols.max(initial=0.0)))

    def support(self, threshold: float = 1e-15) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(i, j, mass) of the entries carrying mass, in row-major order."""
        cutoff = threshold * max(float(self.coupling.max(initial=0.0)), 1e-300)
        i, j = np.nonzero(self.coupling > cutoff)
        return i, j, self.coupling[i, j]

    def is_permutation(self) -> bool:
        i, _, _ = self.support()
        return len(i) == self.coupling.shape[0] == self.coupling.shape[1] and len(np.unique(i)) == len(i)

    def matching_geodesics(self) -> GeodesicBatch:
        if self.model is None or self.source is None or self.target is None:
            raise LabInputError("Plan carries no measures; matching geodesics need points")
        i, j, _ = self.support()
        return geodesics(self.model, self.source.points[i], self.target.points[j])

    def __repr__(self):
        return f"<TransportPlan(method={self.method.value}, shape={self.coupling.shape}, cost={self.cost:.6g})>"


def _check_problem(costs, source_w, target_w) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    costs = np.ascontiguousarray(np.atleast_2d(np.asarray(costs, dtype=np.float64)))
    a = np.asarray(source_w, dtype=np.float64).ravel()
    b = np.asarray(target_w, dtype=np.float64).ravel()
    if costs.shape != (a.size, b.size):
        raise LabInputError(f"Cost matrix shape {costs.shape} does not match weights ({a.size}, {b.size})")
    if not np.all(np.isfinite(costs)):
        raise LabInputError("Cost matrix has non-finite entries")
    if np.any(a < 0.0) or np.any(b < 0.0):
        raise LabInputError("Transport weights must be nonnegative")
    if abs(a.sum() - b.sum()) > MARGINAL_TOL:
        raise LabInputError(f"Infeasible marginals: source mass {a.sum():.12g} != target mass {b.sum():.12g}")
    return costs, a, b


def solve_exact(costs, source_w, target_w) -> TransportPlan:
    """
    Optimal plan by the network simplex, certified by its dual potentials.

    Raises:
        LabInputError: if the marginals have different total mass
        LabNumericError: if the simplex stops early or the dual gap is too large
    """
    costs, a, b = _check_problem(costs, source_w, target_w)
    coupling, log = ot.emd(a, b, costs, numItermax=EMD_MAX_ITER, log=True)
    if log.get("warning"):
        raise LabNumericError(f"Network simplex stopped: {log['warning']}")
    primal = float(np.sum(coupling * costs))
    dual = float(a @ log["u"] + b @ log["v"])
    scale = max(1.0, float(np.abs(costs).max(initial=0.0)))
    gap = abs(primal - dual)
    infeasibility = float(np.max(log["u"][:, None] + log["v"][None, :] - costs, initial=0.0))
    if gap > 1e-9 * scale or infeasibility > 1e-9 * scale:
        raise LabNumericError("Exact plan failed its dual certificate", residual=max(gap, infeasibility))
    return TransportPlan(coupling=coupling, costs=costs, cost=primal, source_weights=a, target_weights=b,
                         method=TransportMethodEnum.EXACT, dual_gap=gap)


def round_to_marginals(coupling: np.ndarray, source_w: np.ndarray, target_w: np.ndarray) -> np.ndarray:
    """Project an approximate plan onto the transport polytope: scale rows, scale columns, fix the rest rank-one."""
    plan = np.array(coupling, dtype=np.float64)
    rows = plan.sum(axis=1)
    plan *= np.minimum(1.0, np.divide(source_w, rows, out=np.ones_like(rows), where=rows > 0.0))[:, None]
    cols = plan.sum(axis=0)
    plan *= np.minimum(1.0, np.divide(target_w, cols, out=np.ones_like(cols), where=cols > 0.0))[None, :]
    err_rows = source_w - plan.sum(axis=1)
    err_cols = target_w - plan.sum(axis=0)
    total = err_rows.sum()
    if total > 0.0:
        plan += np.outer(err_rows, err_cols) / total
    return plan


def solve_sinkhorn(costs, source_w, target_w, epsilon: float) -> TransportPlan:
    """
    Entropic plan at regularization epsilon, rounded onto the marginals.

    Raises:
        LabInputError: on epsilon <= 0 or infeasible marginals
        LabNumericError: if even the log-domain iteration produces no finite plan
    """
    if not epsilon > 0.0:
        raise LabInputError(f"Sinkhorn regularization must be positive, got {epsilon}")
    costs, a, b = _check_problem(costs, source_w, target_w)
    method = "sinkhorn"
    if float(costs.max(initial=0.0)) / epsilon > UNDERFLOW_EXPONENT:
        logger.warning(f"Sinkhorn kernel underflows at epsilon={epsilon:.3e}; restarting in the log domain")
        method = "sinkhorn_log"
    coupling = ot.sinkhorn(a, b, costs, epsilon, method=method, numItermax=SINKHORN_MAX_ITER,
                           stopThr=SINKHORN_STOP, warn=False)
    if method == "sinkhorn" and (not np.all(np.isfinite(coupling)) or np.any(coupling.sum(axis=1)[a > 0] == 0.0)):
        logger.warning(f"Sinkhorn scaling lost mass at epsilon={epsilon:.3e}; restarting in the log domain")
        coupling = ot.sinkhorn(a, b, costs, epsilon, method="sinkhorn_log", numItermax=SINKHORN_MAX_ITER,
                               stopThr=SINKHORN_STOP, warn=False)
    if not np.all(np.isfinite(coupling)):
        raise LabNumericError(f"Sinkhorn produced a non-finite plan at epsilon={epsilon:.3e}")
    plan = round_to_marginals(coupling, a, b)
    return TransportPlan(coupling=plan, costs=costs, cost=float(np.sum(plan * costs)), source_weights=a,
                         target_weights=b, method=TransportMethodEnum.SINKHORN, epsilon=epsilon)


def as_particles(measure: Union[GridMeasure, ParticleMeasure]) -> ParticleMeasure:
    if isinstance(measure, GridMeasure):
        return measure.to_particles()
    return measure


def plan_between(model: ManifoldModel, mu, nu, method: TransportMethodEnum = TransportMethodEnum.EXACT,
                 epsilon: Optional[float] = None, workers: int = 1,
                 costs: Optional[np.ndarray] = None) -> TransportPlan:
    """Solve on the squared-distance cost matrix between two measures, built here unless passed in."""
    method = TransportMethodEnum(method)
    source, target = as_particles(mu), as_particles(nu)
    if costs is None:
        costs = cost_matrix(model, source.points, target.points, workers=workers)
    if method == TransportMethodEnum.EXACT:
        plan = solve_exact(costs, source.weights, target.weights)
    elif method == TransportMethodEnum.SINKHORN:
        if epsilon is None:
            epsilon = 1e-3 * max(float(np.max(costs)), 1e-300)
        plan = solve_sinkhorn(costs, source.weights, target.weights, epsilon)
    else:
        raise LabInputError("The radial method has no cost matrix; use monotone_radial_map")
    return replace(plan, model=model, source=source, target=target)


def check_cyclical_monotonicity(plan: TransportPlan, samples: int = 1000, seed: int = 0) -> float:
    """
    Largest sampled violation of c_ij + c_kl <= c_il + c_kj over support pairs.

    Zero (up to rounding) for an optimal plan.
    """
    i, j, _ = plan.support()
    if len(i) < 2:
        return 0.0
    rng = np.random.default_rng(seed)
    first = rng.integers(0, len(i), size=samples)
    second = rng.integers(0, len(i), size=samples)
    c = plan.costs
    violation = c[i[first], j[first]] + c[i[second], j[second]] - c[i[first], j[second]] - c[i[second], j[first]]
    return float(max(0.0, violation.max()))


def plan_triplets(plan: TransportPlan) -> List[Dict[str, float]]:
    """Sparse (i, j, mass, cost) rows of the plan support."""
    i, j, mass = plan.support()
    return [{"i": int(a), "j": int(b), "mass": float(m), "cost": float(plan.costs[a, b])} for a, b, m in zip(i, j, mass)]


def export_plan_csv(plan: TransportPlan, path: Union[str, Path]) -> Path:
    """Write the plan as sparse triplets (i, j, mass, cost)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=["i", "j", "mass", "cost"])
        writer.writeheader()
        for row in plan_triplets(plan):
            writer.writerow({**row, "mass": repr(row["mass"]), "cost": repr(row["cost"])})
    return path


############################
####### RADIAL MAPS ########
############################

class RadialCDF:
    """Normalised radial mass distribution C(r) of a rotationally symmetric grid measure."""

    def __init__(self, measure: GridMeasure):
        self.measure = measure
        self.model = measure.model
        self.edges = measure.r_edges
        self.r_min, self.r_max = float(self.edges[0]), float(self.edges[-1])
        f = self.model.warp.f
        if measure.profile is not None:
            profile = measure.profile
            masses = profile.radial_mass(self.model, self.edges[:-1], self.edges[1:])
            total = float(masses.sum())
            self._density = lambda s: profile(s) / total
        else:
            # cell-average density, constant on each radial cell
            masses = measure.radial_masses
            shell = 2.0 * math.pi * gauss_legendre(self.edges[:-1], self.edges[1:], f)
            cell_density = masses / shell
            total = float(masses.sum())

            def piecewise(s):
                cell = np.clip(np.searchsorted(self.edges, s, side="right") - 1, 0, len(cell_density) - 1)
                inside = (s >= self.r_min) & (s <= self.r_max)
                return np.where(inside, cell_density[cell], 0.0)

            self._density = piecewise
        self.cumulative = np.concatenate([[0.0], np.cumsum(masses / total)])
        self.cumulative[-1] = 1.0

    def density(self, r) -> np.ndarray:
        """Radial density rho(r) with 2 pi * integral of rho f = 1."""
        return self._density(np.asarray(r, dtype=float))

    def __call__(self, r) -> np.ndarray:
        r = np.clip(np.asarray(r, dtype=float), self.r_min, self.r_max)
        cell = np.clip(np.searchsorted(self.edges, r, side="right") - 1, 0, len(self.edges) - 2)
        left = self.edges[cell]
        partial = 2.0 * math.pi * gauss_legendre(left, r, lambda s: self.density(s) * self.model.warp.f(s))
        return np.clip(self.cumulative[cell] + partial, 0.0, 1.0)

    def inverse(self, c) -> np.ndarray:
        """Smallest r with C(r) = c, by bisection inside the bracketing cell."""
        c = np.clip(np.asarray(c, dtype=float), 0.0, 1.0)
        cell = np.clip(np.searchsorted(self.cumulative, c, side="left") - 1, 0, len(self.edges) - 2)
        lo, hi = self.edges[cell].copy(), self.edges[cell + 1].copy()
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            below = self(mid) < c
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)


class RadialMap:
    """
    Monotone rearrangement (r, theta) -> (F(r), theta) pushing mu0 onto mu1.

    F = C1^-1 o C0 with C_i the radial mass CDFs. F' follows from
    rho0(r) f(r) = rho1(F) f(F) F'.
    """

    def __init__(self, model: ManifoldModel, source: GridMeasure, target: GridMeasure):
        self.model = model
        self.source = source
        self.target = target
        self.cdf0 = RadialCDF(source)
        self.cdf1 = RadialCDF(target)
        self.pole = model.tolerances.pole_threshold
        self._clamp_warned = False

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        outside = (r < self.cdf0.r_min - 1e-12) | (r > self.cdf0.r_max + 1e-12)
        if np.any(outside) and not self._clamp_warned:
            logger.warning(f"Radial map evaluated outside the source support [{self.cdf0.r_min}, {self.cdf0.r_max}];"
                           f" clamping")
            self._clamp_warned = True
        return self.cdf1.inverse(self.cdf0(r))

    def inverse(self, s) -> np.ndarray:
        return self.cdf0.inverse(self.cdf1(s))

    def derivative(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        image = self(r)
        f = self.model.warp.f
        rho0 = self.cdf0.density(r)
        rho1 = self.cdf1.density(image)
        near = (r < self.pole) & (image < self.pole)
        safe_r = np.where(r > 0.0, r, 1.0)
        safe_image = np.where(image > 0.0, image, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = rho0 * f(safe_r) / (rho1 * f(safe_image))
            # f(r) ~ r near the pole: rho0 r = rho1 F F'
            limit = np.sqrt(rho0 / rho1)
        return np.where(near, limit, slope)

    def interpolant(self, t: float) -> "RadialInterpolant":
        return RadialInterpolant(self, t)

    def cost(self, nodes: int = 8) -> float:
        """W2^2 of the map: integral of (F(r) - r)^2 dmu0 by Gauss-Legendre on each source cell."""
        edges = self.cdf0.edges
        f = self.model.warp.f
        integrand = lambda s: (self(s) - s) ** 2 * self.cdf0.density(s) * f(s)
        return float(2.0 * math.pi * gauss_legendre(edges[:-1], edges[1:], integrand, nodes).sum())

    def __repr__(self):
        return f"<RadialMap(source={self.source!r}, target={self.target!r})>"


class RadialInterpolant:
    """F_t(r) = (1-t) r + t F(r): the meridian geodesic point at parameter t."""

    def __init__(self, radial_map: RadialMap, t: float):
        if not 0.0 <= t <= 1.0:
            raise LabInputError(f"t must lie in [0, 1], got {t}")
        self.map = radial_map
        self.t = float(t)

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return (1.0 - self.t) * r + self.t * self.map(r)

    def derivative(self, r) -> np.ndarray:
        return (1.0 - self.t) + self.t * self.map.derivative(r)


def monotone_radial_map(model: ManifoldModel, mu0: GridMeasure, mu1: GridMeasure) -> RadialMap:
    """
    Raises:
        LabInputError: if either measure is not rotationally symmetric or lives on another model
    """
    for name, measure in (("mu0", mu0), ("mu1", mu1)):
        if not isinstance(measure, GridMeasure):
            raise LabInputError(f"{name} must be a grid measure for the radial map")
        if not measure.is_rotationally_symmetric():
            raise LabInputError(f"{name} is not rotationally symmetric; use a discrete plan instead")
        if measure.model.spec() != model.spec():
            raise LabInputError(f"{name} lives on {measure.model!r}, not {model!r}")
    return RadialMap(model, mu0, mu1)


def pushforward_grid(radial_map: RadialMap, mu0: GridMeasure, t: float) -> GridMeasure:
    """mu_t = (F_t)_# mu0 on the pushed grid: cell masses move with their edges."""
    F_t = radial_map.interpolant(t)
    edges = F_t(mu0.r_edges)
    if np.any(np.diff(edges) <= 0.0):
        raise LabNumericError(f"Pushed grid is not strictly increasing at t={t}")
    radial = gauss_legendre(edges[:-1], edges[1:], radial_map.model.warp.f)
    areas = radial[:, None] * np.diff(mu0.theta_edges)[None, :]
    return GridMeasure(model=mu0.model, r_edges=edges, theta_edges=mu0.theta_edges, areas=areas,
                       density=mu0.masses / areas)


############################
###### INTERPOLATION #######
############################

def interpolate(plan_or_map: Union[TransportPlan, RadialMap], t: float):
    """
    Displacement interpolation mu_t.

    Plans move each matched pair to its geodesic point at t (a permutation plan
    keeps the source mesh); radial maps push the source grid.
    """
    if not 0.0 <= t <= 1.0:
        raise LabInputError(f"t must lie in [0, 1], got {t}")
    if isinstance(plan_or_map, RadialMap):
        if t == 0.0:
            return plan_or_map.source
        if t == 1.0:
            return plan_or_map.target
        return pushforward_grid(plan_or_map, plan_or_map.source, t)

    plan = plan_or_map
    if plan.source is None or plan.target is None:
        raise LabInputError("Plan carries no measures to interpolate")
    if t == 0.0:
        return plan.source
    if t == 1.0:
        return plan.target
    i, j, mass = plan.support()
    points = plan.matching_geodesics().evaluate(t)
    if plan.is_permutation() and plan.source.has_mesh:
        order = np.empty_like(i)
        order[i] = np.arange(len(i))
        return plan.source.moved(points[order])
    return ParticleMeasure(points=points, weights=mass / mass.sum())


def w2(model: ManifoldModel, mu, nu, method: TransportMethodEnum = TransportMethodEnum.EXACT,
       epsilon: Optional[float] = None, workers: int = 1) -> float:
    """W2(mu, nu) by the selected method."""
    method = TransportMethodEnum(method)
    if method == TransportMethodEnum.RADIAL:
        return math.sqrt(max(monotone_radial_map(model, mu, nu).cost(), 0.0))
    plan = plan_between(model, mu, nu, method, epsilon=epsilon, workers=workers)
    return math.sqrt(max(plan.cost, 0.0))
