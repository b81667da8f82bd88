import math

import pytest

from app.lab.curvature import constant_field
from app.lab.errors import DomainError, LabInputError
from app.lab.growth import (
    check_jensen_step,
    growth_bound,
    growth_bound_linear,
    growth_curve,
    linear_k_ball,
    log_growth_bound,
    max_admissible_R,
    verify_growth,
)


def test_log_growth_bound():
    # log V2 + (R/e)(log V2 - log V1) with V1 = 1, V2 = e
    assert log_growth_bound(1.0, math.e, 0.0, 2.0, 1.0) == pytest.approx(3.0)
    assert log_growth_bound(1.0, math.e, 2.0, 2.0, 1.0) == pytest.approx(3.0 + 6.0)
    assert growth_bound(1.0, math.e, 0.0, 2.0, 1.0) == pytest.approx(math.exp(3.0))


def test_growth_bound_overflows_to_inf():
    assert growth_bound(1.0, math.e, 1000.0, 100.0, 1.0) == math.inf
    assert math.isfinite(log_growth_bound(1.0, math.e, 1000.0, 100.0, 1.0))


@pytest.mark.parametrize("args", [
    (0.0, 1.0, 0.0, 2.0, 1.0),
    (1.0, -1.0, 0.0, 2.0, 1.0),
    (1.0, 2.0, 0.0, 2.0, 0.0),
    (1.0, 2.0, 0.0, 1.5, 1.0),
])
def test_growth_bound_domain(args):
    with pytest.raises(DomainError):
        growth_bound(*args)


def test_linear_growth_bound():
    assert linear_k_ball(1.0, 0.5, 2.0, 0.25) == pytest.approx(4.0)
    assert growth_bound_linear(1.0, math.e, 0.0, 3.0, 2.0, 1.0) == pytest.approx(growth_bound(1.0, math.e, 0.0, 2.0, 1.0))
    with pytest.raises(DomainError):
        growth_bound_linear(1.0, math.e, -1.0, 0.0, 2.0, 1.0)
    with pytest.raises(DomainError):
        growth_bound_linear(1.0, math.e, 1.0, -0.5, 2.0, 1.0)


def test_flat_growth(euclidean):
    report = verify_growth(euclidean, constant_field(euclidean, 0.0), [0.0, 0.0], 1.0, [4.0, 2.0, 3.0])
    assert report.passed
    assert report.R_grid == [2.0, 3.0, 4.0]
    assert report.V == pytest.approx([math.pi * R * R for R in report.R_grid], rel=1e-8)
    assert report.V_2eps / report.V_eps == pytest.approx(4.0, rel=1e-8)
    assert all(margin > 0.0 for margin in report.margins)
    assert report.to_dict()["pass"] is True


def test_growth_uses_the_given_volume_function(euclidean):
    radii = []

    def disc_area(model, x0, R):
        radii.append(R)
        return math.pi * R * R

    report = verify_growth(euclidean, constant_field(euclidean, 0.0), [0.0, 0.0], 1.0, [3.0], volume=disc_area)
    assert radii == [1.0, 2.0, 3.0]
    assert report.V == pytest.approx([9.0 * math.pi])


def test_hyperbolic_growth_with_the_true_bound(hyperbolic):
    report = verify_growth(hyperbolic, constant_field(hyperbolic, 1.0), [0.0, 0.0], 1.0, [2.0, 4.0, 6.0])
    assert report.passed
    assert report.K_ball == [1.0, 1.0, 1.0]
    expected = [2.0 * math.pi * (math.cosh(R) - 1.0) for R in report.R_grid]
    assert report.V == pytest.approx(expected, rel=1e-8)


def test_linear_form_is_reported(euclidean):
    report = verify_growth(euclidean, constant_field(euclidean, 0.0), [1.0, 0.0], 0.5, [1.0, 2.0], C=0.5)
    assert report.passed
    rows = report.rows()
    assert set(rows[0]) == {"R", "V_R", "bound", "log_margin", "bound_linear", "log_margin_linear"}
    assert all(row["bound_linear"] >= row["bound"] for row in rows)


def test_growth_inside_the_chart(euclidean):
    assert max_admissible_R(euclidean, [0.0, 0.0], 1.0) == pytest.approx(8.0)
    assert max_admissible_R(euclidean, [3.0, 4.0], 0.5) == pytest.approx(4.0)
    field = constant_field(euclidean, 0.0)
    with pytest.raises(DomainError, match="largest admissible R is 8"):
        verify_growth(euclidean, field, [0.0, 0.0], 1.0, [2.0, 9.0])
    with pytest.raises(LabInputError):
        verify_growth(euclidean, field, [0.0, 0.0], 1.0, [])


def test_growth_curve_rows(sphere):
    rows = growth_curve(sphere, constant_field(sphere, -1.0), [0.0, 0.0], 0.1, [0.2, 0.4, 0.6])
    assert [row["R"] for row in rows] == [0.2, 0.4, 0.6]
    for row in rows:
        assert row["V_R"] == pytest.approx(2.0 * math.pi * (1.0 - math.cos(row["R"])), rel=1e-8)
        assert row["log_margin"] >= 0.0


def test_jensen_step_at_the_pole(euclidean):
    steps = check_jensen_step(euclidean, [0.0, 0.0], 0.5, 2.0, [0.0, 0.5, 1.0])
    assert [step.support_radius for step in steps] == [0.5, 1.75, 3.0]
    assert steps[0].slack == pytest.approx(0.0, abs=1e-9)
    assert all(step.slack >= -1e-6 for step in steps)
    # the true support radius is eps + t (R - eps)
    assert steps[1].entropy == pytest.approx(-math.log(math.pi * 1.25 ** 2), rel=1e-8)


def test_jensen_step_off_the_pole(euclidean):
    steps = check_jensen_step(euclidean, [1.0, 0.0], 0.5, 1.5, [0.0, 0.5, 1.0])
    assert all(step.slack > 0.0 for step in steps)


def test_jensen_step_domain(euclidean):
    with pytest.raises(DomainError):
        check_jensen_step(euclidean, [0.0, 0.0], 2.0, 1.0, [0.5])
    with pytest.raises(DomainError):
        check_jensen_step(euclidean, [6.0, 0.0], 1.0, 3.0, [0.5])
