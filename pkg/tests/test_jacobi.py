import math

import numpy as np
import pytest

from app.lab.comparison import distortion_lower_bound
from app.lab.errors import DomainError, LabInputError
from app.lab.geometry import distance, geodesic
from app.lab.jacobi import (
    check_jacobian_concavity,
    closed_form_distortion,
    distortion_ratio,
    exponent_chain,
    radial_concavity_slacks,
    radial_jacobian,
    richardson_distortion,
    solve_jacobi,
    volume_distortion,
    volume_distortions,
)


class Dilation:
    def __call__(self, r):
        return 2.0 * np.asarray(r, dtype=float)

    def derivative(self, r):
        return np.full_like(np.asarray(r, dtype=float), 2.0)


def shift(r):
    return np.asarray(r, dtype=float) + 1.0


def test_hyperbolic_jacobi_field(hyperbolic):
    solution = solve_jacobi(hyperbolic, geodesic(hyperbolic, [0.0, 0.0], [2.0, 0.0]))
    assert solution.A(1.0).shape == (1, 1)
    assert float(solution.A(1.0)[0, 0]) == pytest.approx(math.sinh(2.0), rel=1e-9)
    assert float(solution.A_prime(0.0)[0, 0]) == pytest.approx(2.0, rel=1e-12)
    np.testing.assert_allclose(solution.wronskian(np.linspace(0.0, 1.0, 5)), 0.0, atol=1e-12)


def test_sphere_jacobi_field_through_the_pole(sphere):
    solution = solve_jacobi(sphere, geodesic(sphere, [-0.5, 0.0], [0.5, 0.0]))
    assert solution.length == pytest.approx(1.0)
    assert float(solution.determinant(1.0)) == pytest.approx(math.sin(1.0), rel=1e-9)


def test_variable_curvature_jacobi_field(mild_warp):
    segment = geodesic(mild_warp, [0.6, -0.2], [-0.3, 0.9])
    solution = solve_jacobi(mild_warp, segment)
    s = np.linspace(0.05, 1.0, 8)
    assert np.all(solution.determinant(s) > 0.0)
    tangent, normal = solution.frame(0.5)
    assert tangent.shape == normal.shape == (2,)
    np.testing.assert_allclose(solution.velocity(0.0), segment.initial_velocity, atol=1e-10)
    ratio = float(solution.A(0.5)[0, 0] / (0.5 * solution.A(1.0)[0, 0]))
    direct = volume_distortion(mild_warp, [0.6, -0.2], [-0.3, 0.9], 0.5).value
    assert direct == pytest.approx(ratio, rel=1e-8)


def test_degenerate_segment_has_zero_field(euclidean):
    solution = solve_jacobi(euclidean, geodesic(euclidean, [1.0, 1.0], [1.0, 1.0]))
    assert float(solution.A(0.5)[0, 0]) == 0.0
    with pytest.raises(DomainError):
        solution.frame(0.5)


def test_hyperbolic_distortion_attains_the_bound(hyperbolic):
    value = volume_distortion(hyperbolic, [0.0, 0.0], [2.0, 0.0], 0.5).value
    assert value == pytest.approx(math.sinh(1.0) / (0.5 * math.sinh(2.0)), rel=1e-8)
    assert value == pytest.approx(float(closed_form_distortion(-1.0, 0.5, 2.0)), rel=1e-8)
    assert value == pytest.approx(distortion_lower_bound(0.5, 2.0, -1.0, 2), rel=1e-8)


def test_flat_distortion_is_one(euclidean):
    values = volume_distortions(euclidean, [[0.0, 0.0], [1.0, 2.0]], [[3.0, 0.0], [-1.0, 0.5]], [0.3, 0.8])
    np.testing.assert_allclose(values, 1.0, rtol=1e-10)


def test_distortion_on_variable_curvature_is_sandwiched(mild_warp):
    x, y = np.array([1.0, 0.0]), np.array([-0.5, 1.0])
    L = distance(mild_warp, x, y)
    for t in (0.25, 0.5, 0.75):
        value = volume_distortion(mild_warp, x, y, t).value
        # Ricci lies between -4 and the pole value -1.4/1.1
        assert value >= distortion_lower_bound(t, L, -4.0, 2) - 1e-9
        assert value <= float(closed_form_distortion(-1.4 / 1.1, t, L)) + 1e-9


def test_distortion_domain(euclidean):
    assert volume_distortion(euclidean, [0.0, 0.0], [1.0, 0.0], 1.0).value == 1.0
    with pytest.raises(DomainError):
        volume_distortion(euclidean, [1.0, 0.0], [1.0, 0.0], 0.5)
    with pytest.raises(DomainError):
        volume_distortion(euclidean, [0.0, 0.0], [1.0, 0.0], 0.0)


def test_flat_distortion_ratio_is_exact(euclidean):
    assert distortion_ratio(euclidean, [0.0, 0.0], [2.0, 1.0], 0.5, 0.1) == pytest.approx(1.0, abs=1e-12)
    result = richardson_distortion(euclidean, [0.0, 0.0], [2.0, 1.0], 0.5)
    assert result.observed_order == math.inf
    assert result.extrapolated == pytest.approx(1.0, abs=1e-12)
    assert result.radii == [0.08, 0.04, 0.02, 0.01]


def test_hyperbolic_distortion_ratio_converges(hyperbolic):
    result = richardson_distortion(hyperbolic, [0.0, 0.0], [1.0, 0.0], 0.5)
    expected = math.sinh(0.5) / (0.5 * math.sinh(1.0))
    assert result.extrapolated == pytest.approx(expected, rel=2e-3)
    errors = [abs(ratio - expected) for ratio in result.ratios]
    assert errors[-1] <= errors[0]
    assert result.observed_order >= 2.0


@pytest.mark.parametrize("x, y, t", [
    ([0.0, 0.0], [1.0, 0.0], 0.5),
    ([0.3, -0.2], [-0.9, 1.1], 0.25),
    ([1.2, 0.4], [-0.5, -0.8], 0.8),
])
def test_hyperbolic_distortion_ratio_is_second_order(hyperbolic, x, y, t):
    result = richardson_distortion(hyperbolic, x, y, t)
    assert result.observed_order >= 2.0
    L = distance(hyperbolic, x, y)
    assert result.extrapolated == pytest.approx(float(closed_form_distortion(-1.0, t, L)), rel=1e-5)


def test_richardson_needs_four_levels(euclidean):
    with pytest.raises(LabInputError):
        richardson_distortion(euclidean, [0.0, 0.0], [1.0, 0.0], 0.5, levels=3)


def test_radial_jacobian(euclidean, hyperbolic):
    assert radial_jacobian(euclidean, Dilation(), 0.7) == pytest.approx(4.0)
    assert radial_jacobian(euclidean, Dilation(), 0.0) == pytest.approx(4.0)
    assert radial_jacobian(hyperbolic, shift, 1.0) == pytest.approx(math.sinh(2.0) / math.sinh(1.0), rel=1e-6)
    with pytest.raises(DomainError):
        radial_jacobian(hyperbolic, shift, 0.0)


def test_concavity_slack_vanishes_on_flat_maps(euclidean):
    slacks = radial_concavity_slacks(euclidean, Dilation(), [0.5, 1.0, 2.0], 0.5)
    np.testing.assert_allclose(slacks, 0.0, atol=1e-10)
    translation = check_jacobian_concavity(euclidean, [0.0, 0.0], [1.0, 0.0], 0.5, 1.0, 1.0)
    assert translation == pytest.approx(0.0, abs=1e-12)


def test_concavity_slack_positive_for_hyperbolic_shift(hyperbolic):
    slacks = radial_concavity_slacks(hyperbolic, shift, [0.2, 1.0, 3.0], 0.5)
    assert np.all(slacks > 0.0)
    assert slacks[1] == pytest.approx(0.048, abs=5e-3)


def test_concavity_input_checks(euclidean):
    with pytest.raises(LabInputError):
        check_jacobian_concavity(euclidean, [0.0, 0.0], [1.0, 0.0], 0.5, 0.0, 1.0)
    with pytest.raises(DomainError):
        check_jacobian_concavity(euclidean, [0.0, 0.0], [1.0, 0.0], 1.0, 1.0, 1.0)


def test_exponent_chain_in_dimension_two():
    v = distortion_lower_bound(0.5, 2.0, -1.0, 2)
    chain = exponent_chain(0.5, 2.0, -1.0, v)
    assert set(chain) == {"(n-1)/n", "1-1/n", "1/n"}
    assert all(entry["exponent"] == 0.5 for entry in chain.values())
    assert all(entry["holds"] for entry in chain.values())


def test_exponent_chain_separates_in_dimension_three():
    ratio = distortion_lower_bound(0.5, 2.0, -1.0, 3) ** 0.5
    chain = exponent_chain(0.5, 2.0, -1.0, ratio ** 2, n=3)
    assert chain["(n-1)/n"]["holds"]
    assert chain["1-1/n"]["holds"]
    assert not chain["1/n"]["holds"]
