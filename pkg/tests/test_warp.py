import math

import numpy as np
import pytest

from app.lab.errors import DomainError, LabInputError, WarpExpressionError
from app.lab.warp import ExpressionWarp, SplineWarp, parse_warp_expression


@pytest.mark.parametrize("expression", ["", "   ", "sinh(r", "r)", "foo(r)", "r + x", "r $ 2"])
def test_rejects_expressions_outside_grammar(expression):
    with pytest.raises(WarpExpressionError):
        parse_warp_expression(expression)


def test_error_reports_position():
    with pytest.raises(WarpExpressionError) as info:
        parse_warp_expression("r + tan(r)")
    assert info.value.position == 4
    assert "tan" in str(info.value)


def test_caret_is_power():
    warp = ExpressionWarp("r + r^3")
    assert float(warp.f(2.0)) == pytest.approx(10.0)


def test_hyperbolic_warp_derivatives():
    warp = ExpressionWarp("sinh(r)")
    r = np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(warp.f(r), np.sinh(r))
    np.testing.assert_allclose(warp.df(r), np.cosh(r))
    np.testing.assert_allclose(warp.d2f(r), np.sinh(r))
    assert warp.d3f0 == pytest.approx(1.0)


def test_curvature_is_constant_for_model_warps():
    r = np.array([0.0, 1e-4, 0.3, 1.0])
    np.testing.assert_allclose(ExpressionWarp("sinh(r)").gauss_curvature(r), -1.0, atol=1e-9)
    np.testing.assert_allclose(ExpressionWarp("sin(r)").gauss_curvature(r), 1.0, atol=1e-9)
    np.testing.assert_allclose(ExpressionWarp("r").gauss_curvature(r), 0.0, atol=1e-12)


def test_constant_derivative_broadcasts():
    warp = ExpressionWarp("r")
    assert warp.df(np.zeros(5)).shape == (5,)
    assert warp.d2f(np.ones((2, 3))).shape == (2, 3)


def test_validate_accepts_normalised_warp():
    ExpressionWarp("(sinh(r) + 0.25*sinh(2*r))/1.5").validate(3.0)


@pytest.mark.parametrize("expression", ["1 + r", "2*r", "sin(r)"])
def test_validate_rejects_bad_warps(expression):
    with pytest.raises(LabInputError):
        ExpressionWarp(expression).validate(4.0)


def test_spline_warp_recovers_sinh():
    r = np.linspace(0.0, 3.0, 301)
    warp = SplineWarp(r, np.sinh(r))
    probe = np.array([0.5, 1.5, 2.5])
    np.testing.assert_allclose(warp.f(probe), np.sinh(probe), rtol=1e-7)
    np.testing.assert_allclose(warp.df(probe), np.cosh(probe), rtol=1e-5)
    np.testing.assert_allclose(warp.gauss_curvature(probe), -1.0, atol=1e-2)
    warp.validate(3.0)


def test_spline_warp_domain():
    r = np.linspace(0.0, 1.0, 11)
    warp = SplineWarp(r, r)
    with pytest.raises(DomainError):
        warp.f(1.5)


def test_spline_warp_table_checks(tmp_path):
    with pytest.raises(LabInputError):
        SplineWarp(np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 2.0]))
    with pytest.raises(LabInputError):
        SplineWarp(np.array([0.1, 1.0, 2.0, 3.0]), np.array([0.1, 1.0, 2.0, 3.0]))

    missing = tmp_path / "missing.txt"
    with pytest.raises(LabInputError):
        SplineWarp.from_file(missing)

    three_columns = tmp_path / "three.txt"
    three_columns.write_text("0 0 0\n1 1 1\n2 2 2\n3 3 3\n")
    with pytest.raises(LabInputError):
        SplineWarp.from_file(three_columns)


def test_spline_warp_from_file(tmp_path):
    path = tmp_path / "sin_warp.txt"
    rows = [f"{r:.6f} {math.sin(r):.12f}" for r in np.linspace(0.0, 1.2, 61)]
    path.write_text("\n".join(rows) + "\n")
    warp = SplineWarp.from_file(path)
    assert warp.label == "sin_warp.txt"
    assert float(warp.f(0.6)) == pytest.approx(math.sin(0.6), rel=1e-6)
