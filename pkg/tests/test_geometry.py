import math

import numpy as np
import pytest

from app.enums.lab_enums import ModelKindEnum
from app.lab.errors import DomainError, LabInputError
from app.lab.geometry import (
    ball_volume,
    build_model,
    check_in_chart,
    cost_matrix,
    distance,
    distances,
    exp_map,
    geodesic,
    geodesics,
    log_map,
    metric_norm,
    metric_tensor,
    orthonormal_frame,
    ricci_min,
    sphere_cap,
    surface_of_revolution,
)
from app.lab.warp import ExpressionWarp


@pytest.fixture(scope="module")
def sinh_revolution():
    """The hyperbolic plane, but routed through the generic surface-of-revolution code."""
    return surface_of_revolution(ExpressionWarp("sinh(r)"), 6.0)


def hyperbolic_chart_distance(p, q):
    r1, r2 = math.hypot(*p), math.hypot(*q)
    dtheta = math.atan2(q[1], q[0]) - math.atan2(p[1], p[0])
    return math.acosh(math.cosh(r1) * math.cosh(r2) - math.sinh(r1) * math.sinh(r2) * math.cos(dtheta))


def test_euclidean_distance(euclidean):
    assert distance(euclidean, [0.0, 0.0], [3.0, 4.0]) == pytest.approx(5.0)
    assert distance(euclidean, [1.0, 1.0], [1.0, 1.0]) == 0.0


def test_hyperbolic_distance_closed_form(hyperbolic):
    p, q = (1.0, 0.0), (0.0, 1.0)
    assert distance(hyperbolic, p, q) == pytest.approx(math.acosh(math.cosh(1.0) ** 2), rel=1e-12)


def test_sphere_distance_closed_form(sphere):
    p, q = (0.5, 0.0), (0.0, 0.5)
    assert distance(sphere, p, q) == pytest.approx(math.acos(math.cos(0.5) ** 2), rel=1e-12)


@pytest.mark.parametrize("p,q", [
    ((1.0, 0.0), (0.0, 1.5)),
    ((0.3, -0.2), (-1.1, 0.8)),
    ((2.0, 0.0), (-2.0, 0.1)),
])
def test_shooting_matches_hyperbolic_closed_form(sinh_revolution, p, q):
    assert distance(sinh_revolution, p, q) == pytest.approx(hyperbolic_chart_distance(p, q), rel=1e-7)


def test_exp_inverts_log(mild_warp):
    p = np.array([0.4, -0.3])
    q = np.array([-0.9, 1.1])
    v = log_map(mild_warp, p, q)
    np.testing.assert_allclose(exp_map(mild_warp, p, v), q, atol=1e-8)
    assert float(metric_norm(mild_warp, p, v)) == pytest.approx(distance(mild_warp, p, q), rel=1e-10)


def test_geodesic_endpoints_and_midpoint(euclidean, mild_warp):
    segment = geodesic(euclidean, [0.0, 0.0], [2.0, 0.0])
    np.testing.assert_allclose(segment(0.5), [1.0, 0.0], atol=1e-12)
    assert segment.length == pytest.approx(2.0)

    p, q = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    curved = geodesic(mild_warp, p, q)
    np.testing.assert_allclose(curved(0.0), p, atol=1e-10)
    np.testing.assert_allclose(curved(1.0), q, atol=1e-7)
    # constant speed: the midpoint halves the length
    mid = curved(0.5)
    assert distance(mild_warp, p, mid) == pytest.approx(curved.length / 2.0, rel=1e-6)


def test_geodesic_batch_evaluates_per_segment_times(hyperbolic):
    batch = geodesics(hyperbolic, [[0.0, 0.0], [0.0, 0.0]], [[1.0, 0.0], [0.0, 2.0]])
    assert len(batch) == 2
    points = batch.evaluate(np.array([0.5, 0.25]))
    np.testing.assert_allclose(points, [[0.5, 0.0], [0.0, 0.5]], atol=1e-12)


def test_metric_is_identity_on_the_plane(euclidean):
    g = metric_tensor(euclidean, np.array([[0.0, 0.0], [3.0, -1.0]]))
    np.testing.assert_allclose(g, np.broadcast_to(np.eye(2), (2, 2, 2)), atol=1e-12)


def test_orthonormal_frame(mild_warp):
    p = np.array([1.2, 0.5])
    e1, e2 = orthonormal_frame(mild_warp, p, np.array([1.0, 1.0]))
    g = metric_tensor(mild_warp, p)
    assert e1 @ g @ e1 == pytest.approx(1.0)
    assert e2 @ g @ e2 == pytest.approx(1.0)
    assert e1 @ g @ e2 == pytest.approx(0.0, abs=1e-12)
    assert e1[0] * e2[1] - e1[1] * e2[0] > 0.0


def test_ricci_min(hyperbolic, mild_warp, strong_warp):
    assert ricci_min(hyperbolic, [1.0, 2.0]) == -1.0
    assert ricci_min(mild_warp, [0.0, 0.0]) == pytest.approx(-1.4 / 1.1)
    assert ricci_min(strong_warp, [0.0, 0.0]) == pytest.approx(-2.0)
    a = 0.25
    expected = -(1.0 + 8.0 * a * math.cosh(1.0)) / (1.0 + 2.0 * a * math.cosh(1.0))
    assert ricci_min(strong_warp, [0.0, 1.0]) == pytest.approx(expected, rel=1e-10)


def test_chart_checks(euclidean):
    with pytest.raises(DomainError):
        check_in_chart(euclidean, [11.0, 0.0])
    with pytest.raises(LabInputError):
        check_in_chart(euclidean, [1.0, 2.0, 3.0])
    with pytest.raises(DomainError):
        sphere_cap(1.6)
    with pytest.raises(LabInputError):
        build_model(ModelKindEnum.SURFACE_OF_REVOLUTION)


def test_build_model_defaults():
    model = build_model(ModelKindEnum.HYPERBOLIC_PLANE)
    assert model.r_max == 12.0
    assert model.curvature_constant == -1.0
    assert model.spec() == {"kind": "hyperbolic-plane", "warp": "sinh(r)", "r_max": 12.0}
    assert build_model("sphere-cap", r_max=1.0).r_max == 1.0


@pytest.mark.parametrize("model_name,R,expected", [
    ("euclidean", 2.0, 4.0 * math.pi),
    ("hyperbolic", 1.0, 2.0 * math.pi * (math.cosh(1.0) - 1.0)),
    ("sphere", 1.0, 2.0 * math.pi * (1.0 - math.cos(1.0))),
])
def test_ball_volume_closed_forms(request, model_name, R, expected):
    model = request.getfixturevalue(model_name)
    assert ball_volume(model, [0.0, 0.0], R) == pytest.approx(expected, rel=1e-9)


def test_ball_volume_is_translation_invariant_on_constant_curvature(hyperbolic):
    assert ball_volume(hyperbolic, [2.0, 1.0], 1.0) == pytest.approx(3.41230, abs=1e-4)


def test_off_pole_ball_volume_matches_hyperbolic(sinh_revolution):
    volume = ball_volume(sinh_revolution, [1.0, 0.0], 1.0)
    assert volume == pytest.approx(2.0 * math.pi * (math.cosh(1.0) - 1.0), rel=1e-6)


def test_ball_volume_domain(euclidean, mild_warp):
    assert ball_volume(euclidean, [1.0, 1.0], 0.0) == 0.0
    with pytest.raises(DomainError):
        ball_volume(mild_warp, [2.0, 0.0], 1.5)
    with pytest.raises(DomainError):
        ball_volume(euclidean, [0.0, 0.0], -1.0)


def test_cost_matrix_constant_curvature(euclidean):
    X = np.array([[0.0, 0.0], [1.0, 0.0]])
    Y = np.array([[0.0, 2.0], [3.0, 0.0], [1.0, 1.0]])
    costs, logs = cost_matrix(euclidean, X, Y, with_logs=True)
    expected = ((X[:, None, :] - Y[None, :, :]) ** 2).sum(-1)
    np.testing.assert_allclose(costs, expected, atol=1e-12)
    np.testing.assert_allclose(logs, Y[None, :, :] - X[:, None, :], atol=1e-12)


def test_cost_matrix_does_not_depend_on_workers(mild_warp):
    X = np.array([[0.1, 0.0], [0.5, 0.5], [-0.4, 0.2]])
    Y = np.array([[1.0, 0.0], [0.0, -1.0], [-0.7, 0.7]])
    serial = cost_matrix(mild_warp, X, Y, workers=1, chunk_size=2)
    parallel = cost_matrix(mild_warp, X, Y, workers=3, chunk_size=2)
    np.testing.assert_array_equal(serial, parallel)
    assert serial[0, 0] == pytest.approx(distance(mild_warp, X[0], Y[0]) ** 2, rel=1e-8)


@pytest.mark.parametrize("fixture_name", ["euclidean", "hyperbolic", "sphere", "mild_warp"])
def test_triangle_inequality(request, rng, fixture_name):
    model = request.getfixturevalue(fixture_name)
    radius = min(0.75 * model.r_max, 3.0)
    count = 1000

    def sample():
        r = radius * np.sqrt(rng.uniform(0.0, 1.0, count))
        theta = rng.uniform(0.0, 2.0 * math.pi, count)
        return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)

    A, B, C = sample(), sample(), sample()
    violation = distances(model, A, C) - distances(model, A, B) - distances(model, B, C)
    assert violation.max() < 1e-9
