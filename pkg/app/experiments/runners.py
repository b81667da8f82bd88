"""
One runner per subcommand. Each takes a validated ExperimentConfig and returns
an ExperimentResult holding the JSON report and the CSV tables.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List

import numpy as np

from app.cache import cached_ball_volume, cached_cost_matrix
from app.enums.lab_enums import CommandEnum, RealizationEnum, TransportMethodEnum
from app.experiments.builders import field_from_config, is_lattice, measure_from_config, model_from_config
from app.lab.comparison import distortion_lower_bound, rs_gap_grid
from app.lab.curvature import negative_ricci_min_field
from app.lab.entropy import check_convexity, probe_extrapolate
from app.lab.errors import LabInputError
from app.lab.geometry import distances
from app.lab.growth import check_jensen_step, verify_growth
from app.lab.jacobi import (
    closed_form_distortion,
    exponent_chain,
    radial_concavity_slacks,
    richardson_distortion,
    volume_distortions,
)
from app.lab.measures import GridMeasure
from app.lab.transport import (
    as_particles,
    check_cyclical_monotonicity,
    monotone_radial_map,
    plan_between,
    plan_triplets,
)
from app.schemas.config import ExperimentConfig, GridConfig

logger = logging.getLogger(__name__)

RICHARDSON_MIN_ORDER = 2.0
CONCAVITY_RADII = 16


@dataclass
class ExperimentResult:
    command: CommandEnum
    passed: bool
    report: Dict[str, Any]
    tables: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1


def _header(config: ExperimentConfig, model=None) -> Dict[str, Any]:
    header = {
        "schema_version": config.schema_version,
        "command": config.command.value,
        "seed": config.seed,
        "tolerance_scale": config.tolerance_scale,
    }
    if model is not None:
        header["model"] = model.spec()
    return header


############################
######### COMPARE ##########
############################

def run_compare(config: ExperimentConfig) -> ExperimentResult:
    section = config.compare
    rows = rs_gap_grid(section.t_grid, section.r_grid, section.n_values, k_min=section.k_min,
                       k_points=section.k_points)
    gaps = [row[-1] for row in rows]
    min_gap = min(gaps)
    tolerance = section.tolerance * config.tolerance_scale
    passed = min_gap >= -tolerance
    report = {
        **_header(config),
        "rows": len(rows),
        "min_rs_gap": min_gap,
        "tolerance": tolerance,
        "pass": passed,
    }
    table = [{"t": t, "r": r, "k": k, "n": n, "rs_gap": gap} for t, r, k, n, gap in rows]
    return ExperimentResult(CommandEnum.COMPARE, passed, report, {"rs_gap": table})


############################
######## DISTORTION ########
############################

def _sample_pairs(rng: np.random.Generator, count: int, radius: float):
    def disc(size):
        r = radius * np.sqrt(rng.uniform(0.0, 1.0, size))
        theta = rng.uniform(0.0, 2.0 * math.pi, size)
        return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)

    X, Y = disc(count), disc(count)
    t = rng.uniform(0.05, 0.95, count)
    return X, Y, t


def run_distortion(config: ExperimentConfig) -> ExperimentResult:
    section = config.distortion
    model = model_from_config(config.model)
    rng = np.random.default_rng(config.seed)
    radius = section.sample_radius if section.sample_radius is not None else min(0.5 * model.r_max, 3.0)
    X, Y, t = _sample_pairs(rng, section.samples, radius)
    L = distances(model, X, Y)
    values = volume_distortions(model, X, Y, t)
    tolerance = section.tolerance * config.tolerance_scale
    lemma_tolerance = section.lemma_tolerance * config.tolerance_scale

    table = []
    report = _header(config, model)
    if model.is_constant_curvature:
        kappa = model.curvature_constant
        reference = closed_form_distortion(kappa, t, L)
        rel_err = np.abs(values - reference) / reference
        passed = bool(rel_err.max() < tolerance)
        report.update({"check": "closed-form", "max_rel_err": float(rel_err.max())})
        k_min = np.full_like(L, kappa)
        for i in range(len(L)):
            table.append({"x1": X[i, 0], "x2": X[i, 1], "y1": Y[i, 0], "y2": Y[i, 1], "t": t[i], "L": L[i],
                          "v": values[i], "reference": reference[i], "rel_err": rel_err[i]})
    else:
        # inf of ricci_min over B_x(L), which contains the segment
        K = negative_ricci_min_field(model, seed=config.seed)
        k_min = -K.sup_on_balls(X, L)
        bound = distortion_lower_bound(t, L, k_min, 2)
        slack = values - bound
        passed = bool(slack.min() >= -lemma_tolerance)
        report.update({"check": "distortion-lemma", "min_slack": float(slack.min())})
        for i in range(len(L)):
            table.append({"x1": X[i, 0], "x2": X[i, 1], "y1": Y[i, 0], "y2": Y[i, 1], "t": t[i], "L": L[i],
                          "v": values[i], "k_min": k_min[i], "bound": bound[i], "slack": slack[i]})

    report["exponent_chain"] = exponent_chain(float(t[0]), float(L[0]), float(k_min[0]), float(values[0]))
    if section.richardson:
        richardson = richardson_distortion(model, X[0], Y[0], float(t[0]), r0=section.r0, levels=section.levels)
        report["richardson"] = {
            "radii": richardson.radii,
            "ratios": richardson.ratios,
            "extrapolated": richardson.extrapolated,
            "observed_order": richardson.observed_order,
            "v": float(values[0]),
        }
        passed = passed and richardson.observed_order >= RICHARDSON_MIN_ORDER
    report.update({"samples": section.samples, "sample_radius": radius, "tolerance": tolerance,
                   "lemma_tolerance": lemma_tolerance, "pass": passed})
    return ExperimentResult(CommandEnum.DISTORTION, passed, report, {"distortion": table})


############################
######### TRANSPORT ########
############################

def run_transport(config: ExperimentConfig) -> ExperimentResult:
    section = config.transport
    model = model_from_config(config.model)
    tolerance = section.tolerance * config.tolerance_scale
    report = _header(config, model)
    tables = {}

    radial_cost = None
    if not is_lattice(config.source) and not is_lattice(config.target):
        fine0 = measure_from_config(model, config.source, config.grid)
        fine1 = measure_from_config(model, config.target, config.grid)
        if fine0.is_rotationally_symmetric() and fine1.is_rotationally_symmetric():
            radial_cost = monotone_radial_map(model, fine0, fine1).cost()
            report["radial_w2_sq"] = radial_cost

    checks = []
    if section.method == TransportMethodEnum.RADIAL:
        if radial_cost is None:
            raise LabInputError("The radial method needs two rotationally symmetric grid measures")
        report["w2"] = math.sqrt(max(radial_cost, 0.0))
    else:
        coarse = GridConfig(n_r=section.n_r, n_theta=section.n_theta)
        mu = measure_from_config(model, config.source, coarse)
        nu = measure_from_config(model, config.target, coarse)
        source, target = as_particles(mu), as_particles(nu)
        costs = cached_cost_matrix(model, source.points, target.points, workers=config.workers)
        plan = plan_between(model, source, target, section.method, epsilon=section.epsilon, costs=costs)
        violation = check_cyclical_monotonicity(plan, seed=config.seed)
        report.update({
            "method": section.method.value,
            "w2_sq": plan.cost,
            "w2": math.sqrt(max(plan.cost, 0.0)),
            "marginal_error": plan.marginal_error(),
            "monotonicity_violation": violation,
            "support_size": int(len(plan.support()[0])),
        })
        checks.append(plan.marginal_error() <= 1e-9 * config.tolerance_scale)
        if section.method == TransportMethodEnum.EXACT:
            report["dual_gap"] = plan.dual_gap
            checks.append(violation <= 1e-9 * max(1.0, float(plan.costs.max())))
        else:
            exact = plan_between(model, source, target, TransportMethodEnum.EXACT, costs=costs)
            report["epsilon"] = plan.epsilon
            report["exact_w2_sq"] = exact.cost
            checks.append(abs(plan.cost - exact.cost) <= 1e-3 * max(1.0, exact.cost) * config.tolerance_scale)
        if radial_cost is not None:
            report["radial_difference"] = abs(plan.cost - radial_cost)
            checks.append(abs(plan.cost - radial_cost) <= tolerance)
        if section.export_plan:
            tables["plan"] = plan_triplets(plan)

    passed = all(checks)
    report.update({"tolerance": tolerance, "pass": passed})
    return ExperimentResult(CommandEnum.TRANSPORT, passed, report, tables)


############################
######### ENTROPY ##########
############################

def _concavity_slacks(model, mu0: GridMeasure, mu1: GridMeasure, t_grid) -> List[Dict[str, float]]:
    radial_map = monotone_radial_map(model, mu0, mu1)
    lo, hi = radial_map.cdf0.r_min, radial_map.cdf0.r_max
    radii = np.linspace(lo, hi, CONCAVITY_RADII + 2)[1:-1]
    rows = []
    for t in t_grid:
        if not 0.0 < t < 1.0:
            continue
        slacks = radial_concavity_slacks(model, radial_map, radii, t)
        rows.extend({"t": t, "r": r, "slack": s} for r, s in zip(radii.tolist(), slacks.tolist()))
    return rows


def run_convexity(config: ExperimentConfig) -> ExperimentResult:
    section = config.convexity
    model = model_from_config(config.model)
    K = field_from_config(model, config.curvature, config.seed)
    report = _header(config, model)
    table, runs = [], []
    passed = True

    if section.realization == RealizationEnum.DISCRETE:
        factors = [1]
    else:
        factors = sorted(set(section.refinement))
    for factor in factors:
        tolerance = (section.tolerance if factor == 1 else section.refined_tolerance) * config.tolerance_scale
        mu0 = measure_from_config(model, config.source, config.grid, scale=factor)
        mu1 = measure_from_config(model, config.target, config.grid, scale=factor)
        result = check_convexity(model, K, mu0, mu1, section.t_grid, section.realization, tolerance,
                                 cross_validate=section.cross_validate, workers=config.workers)
        passed = passed and result.passed
        runs.append({"refinement": factor, "grid_resolution": [config.grid.n_r * factor, config.grid.n_theta * factor],
                     **result.to_dict()})
        for i, t in enumerate(result.t_grid):
            row = {"refinement": factor, "t": t, "ent": result.ent_values[i], "rhs": result.rhs_values[i],
                   "slack": result.slack[i]}
            if result.ent_direct is not None:
                row["ent_direct"] = result.ent_direct[i]
            table.append(row)

    tables = {"convexity": table}
    if section.realization == RealizationEnum.RADIAL:
        mu0 = measure_from_config(model, config.source, config.grid)
        mu1 = measure_from_config(model, config.target, config.grid)
        concavity = _concavity_slacks(model, mu0, mu1, section.t_grid)
        min_concavity = min((row["slack"] for row in concavity), default=0.0)
        concavity_tolerance = section.concavity_tolerance * config.tolerance_scale
        passed = passed and min_concavity >= -concavity_tolerance
        report["jacobian_concavity"] = {"min_slack": min_concavity, "tolerance": concavity_tolerance}
        tables["jacobian_concavity"] = concavity

    report.update({"curvature_field": K.label, "realization": section.realization.value, "runs": runs,
                   "pass": passed})
    return ExperimentResult(CommandEnum.CHECK_ENTROPY_CONVEXITY, passed, report, tables)


def run_probe(config: ExperimentConfig) -> ExperimentResult:
    section = config.probe
    model = model_from_config(config.model)
    K = field_from_config(model, config.curvature, config.seed)
    result = probe_extrapolate(model, np.asarray(section.z0, dtype=float), section.radii, K,
                               beta_ratio=section.beta_ratio, directions=section.directions,
                               spacing_ratio=section.spacing_ratio, estimator=section.estimator,
                               tolerance=section.tolerance * config.tolerance_scale, eps0=section.eps0,
                               workers=config.workers, seed=config.seed)
    passed = not result.violation
    report = {**_header(config, model), "curvature_field": K.label, "estimator": section.estimator.value,
              **result.to_dict(), "pass": passed}
    table = [
        {"r": p.r, "beta": p.beta, "direction_x": p.direction[0], "direction_y": p.direction[1],
         "ent_gap": p.ent_gap, "w2_sq": p.w2_sq, "estimate": p.estimate, "comparison": p.comparison,
         "estimator_std": p.estimator_std, "violation": p.violation}
        for p in result.probes
    ]
    return ExperimentResult(CommandEnum.PROBE_CURVATURE, passed, report, {"probe": table})


############################
########## GROWTH ##########
############################

def run_growth(config: ExperimentConfig) -> ExperimentResult:
    section = config.growth
    model = model_from_config(config.model)
    K = field_from_config(model, config.curvature, config.seed)
    x0 = np.asarray(section.x0, dtype=float)
    growth = verify_growth(model, K, x0, section.eps, section.R_grid, C=section.C, volume=cached_ball_volume)
    passed = growth.passed
    report = {**_header(config, model), "curvature_field": K.label, **growth.to_dict()}
    tables = {"growth": growth.rows()}
    if section.jensen_R is not None:
        steps = check_jensen_step(model, x0, section.eps, section.jensen_R, section.jensen_t_grid,
                                  volume=cached_ball_volume)
        tolerance = section.jensen_tolerance * config.tolerance_scale
        min_slack = min(step.slack for step in steps)
        passed = passed and min_slack >= -tolerance
        report["jensen"] = {"R": section.jensen_R, "min_slack": min_slack, "tolerance": tolerance}
        tables["jensen"] = [vars(step) for step in steps]
    report["pass"] = passed
    return ExperimentResult(CommandEnum.VOLUME_GROWTH, passed, report, tables)


RUNNERS: Dict[CommandEnum, Callable[[ExperimentConfig], ExperimentResult]] = {
    CommandEnum.COMPARE: run_compare,
    CommandEnum.DISTORTION: run_distortion,
    CommandEnum.TRANSPORT: run_transport,
    CommandEnum.CHECK_ENTROPY_CONVEXITY: run_convexity,
    CommandEnum.PROBE_CURVATURE: run_probe,
    CommandEnum.VOLUME_GROWTH: run_growth,
}


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Dispatch on config.command; the suite runs the built-in battery."""
    if config.command == CommandEnum.SUITE:
        from app.experiments.suite import run_suite
        return run_suite(config)
    logger.info(f"Running {config.command.value} (seed={config.seed}, workers={config.workers})")
    return RUNNERS[config.command](config)
