import math

import numpy as np
import pytest

from app.enums.lab_enums import EntropyEstimatorEnum, EntropyStateEnum, RealizationEnum
from app.lab.curvature import constant_field, negative_ricci_min_field
from app.lab.entropy import (
    check_convexity,
    convexity_refinement,
    curvature_probe,
    entropy,
    entropy_along_path,
    entropy_state,
    k_integral_radial,
    mesh_entropy,
    probe_extrapolate,
)
from app.lab.errors import DomainError, LabInputError, SingularMeasureError
from app.lab.measures import (
    ParticleMeasure,
    grid_from_profile,
    triangle_areas,
    uniform_ball_lattice,
    uniform_ball_profile,
)
from app.lab.transport import monotone_radial_map

T_GRID = (0.25, 0.5, 0.75)


def discs(model, n_r=64, n_theta=8):
    mu0 = grid_from_profile(model, uniform_ball_profile(1.0), n_r=n_r, n_theta=n_theta)
    mu1 = grid_from_profile(model, uniform_ball_profile(2.0), n_r=n_r, n_theta=n_theta)
    return mu0, mu1


def test_uniform_entropy_is_minus_log_volume(euclidean, hyperbolic):
    mu, _ = discs(euclidean)
    assert entropy(euclidean, mu) == pytest.approx(-math.log(math.pi), rel=1e-12)
    mu, _ = discs(hyperbolic)
    assert entropy(hyperbolic, mu) == pytest.approx(-1.22739, abs=1e-5)


def test_mesh_entropy_of_a_lattice(euclidean):
    lattice = uniform_ball_lattice(euclidean, [0.0, 0.0], 1.0, 0.2)
    hull_area = triangle_areas(euclidean, lattice.points, lattice.triangles).sum()
    assert mesh_entropy(euclidean, lattice) == pytest.approx(-math.log(hull_area), rel=1e-12)
    assert entropy(euclidean, lattice) == mesh_entropy(euclidean, lattice)


def test_point_clouds_have_infinite_entropy(euclidean):
    cloud = ParticleMeasure(points=np.array([[0.0, 0.0], [1.0, 0.0]]), weights=np.array([0.5, 0.5]))
    with pytest.raises(SingularMeasureError):
        entropy(euclidean, cloud)
    assert entropy_state(euclidean, cloud) == (EntropyStateEnum.INFINITE, None)
    mu, _ = discs(euclidean, n_r=8)
    state, value = entropy_state(euclidean, mu)
    assert state == EntropyStateEnum.FINITE
    assert value == pytest.approx(-math.log(math.pi))


def test_entropy_along_flat_dilation(euclidean):
    mu0, mu1 = discs(euclidean)
    radial_map = monotone_radial_map(euclidean, mu0, mu1)
    for t in (0.0, 0.3, 1.0):
        expected = -math.log(math.pi * (1.0 + t) ** 2)
        assert entropy_along_path(euclidean, mu0, radial_map, t) == pytest.approx(expected, rel=1e-8)
    with pytest.raises(LabInputError):
        entropy_along_path(euclidean, mu0, radial_map, -0.1)


def test_k_integral_of_a_constant_field(euclidean):
    mu0, mu1 = discs(euclidean)
    radial_map = monotone_radial_map(euclidean, mu0, mu1)
    # K W2^2 with W2^2 = 1/2
    assert k_integral_radial(euclidean, constant_field(euclidean, 2.0), radial_map) == pytest.approx(1.0, rel=1e-7)


def test_flat_convexity_with_cross_validation(euclidean):
    mu0, mu1 = discs(euclidean)
    report = check_convexity(euclidean, constant_field(euclidean, 0.0), mu0, mu1, T_GRID, cross_validate=True)
    assert report.passed
    for t, slack in zip(T_GRID, report.slack):
        assert slack == pytest.approx(2.0 * math.log(1.0 + t) - 2.0 * t * math.log(2.0), abs=1e-7)
    np.testing.assert_allclose(report.ent_direct, report.ent_values, rtol=1e-8)
    assert report.w2_sq == pytest.approx(0.5)
    data = report.to_dict()
    assert {"ent", "rhs", "pass", "slack", "realization"} <= set(data)
    assert data["realization"] == "radial"


def test_hyperbolic_convexity_holds_with_the_true_bound(hyperbolic):
    mu0, mu1 = discs(hyperbolic)
    report = check_convexity(hyperbolic, negative_ricci_min_field(hyperbolic), mu0, mu1, T_GRID)
    assert report.passed
    assert report.K_integral > 0.0
    assert report.min_slack >= -report.tolerance


def test_discrete_convexity_on_translates(euclidean):
    mu0 = uniform_ball_lattice(euclidean, [-1.0, 0.0], 0.5, 0.1)
    mu1 = uniform_ball_lattice(euclidean, [1.0, 0.0], 0.5, 0.1)
    report = check_convexity(euclidean, constant_field(euclidean, 0.0), mu0, mu1, T_GRID,
                             realization=RealizationEnum.DISCRETE, tolerance=1e-9, workers=2)
    assert report.passed
    np.testing.assert_allclose(report.slack, 0.0, atol=1e-9)
    assert report.w2_sq == pytest.approx(4.0)


def test_convexity_input_checks(euclidean):
    mu0, mu1 = discs(euclidean, n_r=8)
    field = constant_field(euclidean, 0.0)
    with pytest.raises(LabInputError):
        check_convexity(euclidean, field, mu0, mu1, (0.5, 1.5))
    with pytest.raises(LabInputError):
        check_convexity(euclidean, field, mu0, mu1, T_GRID, realization=RealizationEnum.DISCRETE)


def test_convexity_refinement(hyperbolic):
    reports = convexity_refinement(hyperbolic, constant_field(hyperbolic, 1.0), uniform_ball_profile(1.0),
                                   uniform_ball_profile(2.0), [(16, 4), (32, 8)], T_GRID)
    assert len(reports) == 2
    assert all(report.passed for report in reports)


def test_flat_probe_reads_zero(euclidean):
    result = curvature_probe(euclidean, [0.0, 0.0], 0.5, 0.05, constant_field(euclidean, 0.0))
    assert result.estimate == pytest.approx(0.0, abs=1e-8)
    assert result.w2_sq == pytest.approx(1.0, rel=1e-12)
    assert not result.violation
    assert result.containment["fraction_inside"] == 1.0
    assert result.to_dict()["estimator"] == "mesh"


def test_hyperbolic_probe_reads_the_curvature(hyperbolic):
    result = curvature_probe(hyperbolic, [0.0, 0.0], 0.2, 0.02, constant_field(hyperbolic, 1.0))
    assert result.estimate == pytest.approx(1.0, abs=0.15)
    assert result.comparison == 1.0


def test_binned_probe_estimator(euclidean):
    result = curvature_probe(euclidean, [0.0, 0.0], 0.5, 0.05, constant_field(euclidean, 0.0),
                             estimator=EntropyEstimatorEnum.BINNING)
    assert result.estimator == EntropyEstimatorEnum.BINNING
    assert result.estimator_std >= 0.0
    assert abs(result.estimate) < 0.5


def test_probe_domain(euclidean):
    field = constant_field(euclidean, 0.0)
    with pytest.raises(DomainError):
        curvature_probe(euclidean, [0.0, 0.0], 0.5, 0.1, field)
    with pytest.raises(DomainError):
        curvature_probe(euclidean, [8.0, 0.0], 0.5, 0.05, field)


def test_probe_extrapolation(euclidean):
    result = probe_extrapolate(euclidean, [0.0, 0.0], [0.4, 0.2], constant_field(euclidean, 0.0), directions=2,
                               workers=2, seed=5)
    assert len(result.probes) == 4
    assert result.intercept == pytest.approx(0.0, abs=1e-6)
    assert not result.violation
    assert len(result.to_dict()["probes"]) == 4
    with pytest.raises(LabInputError):
        probe_extrapolate(euclidean, [0.0, 0.0], [0.4], constant_field(euclidean, 0.0))
