"""
Normal Jacobi fields along geodesics and the quantities built from them.

Along a geodesic gamma: [0, 1] -> M of length L the normal Jacobi matrix solves
A'' + L^2 K(gamma(s)) A = 0 with A(0) = 0, A'(0) = L I. In dimension 2 the
normal block is 1x1; it is kept as a matrix so that determinants and
Wronskians read as in the general statement. The full Jacobi matrix adds the
tangential factor sL, which gives

    v_t(x, y) = det Abar(t) / (t^n det Abar(1)) = A(t) / (t A(1))    (n = 2).
"""

import math
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from app.lab.comparison import comparison_S
from app.lab.errors import ConjugatePointError, DomainError, LabInputError, LabNumericError
from app.lab.geometry import (
    ConstantCurvatureGeometry,
    GeodesicSegment,
    ManifoldModel,
    RevolutionFlow,
    as_points,
    check_in_chart,
    distance,
    exp_maps,
    geodesics,
    log_maps,
    metric_tensor,
    orthonormal_frame,
)

logger = logging.getLogger(__name__)

DIMENSION = 2
FD_STEP = 1e-6
ORDER_DIGITS = 2


############################
##### JACOBI EQUATION ######
############################

class _JacobiFlow:
    """Batched integration of the normal Jacobi equation (jointly with the geodesic when curvature varies)."""

    def __init__(self, model: ManifoldModel, starts: np.ndarray, velocities: np.ndarray, lengths: np.ndarray):
        self.model = model
        self.count = starts.shape[0]
        self.lengths = lengths
        tol = model.tolerances
        n = self.count
        if model.is_constant_curvature:
            kappa = model.curvature_constant
            self.rows, self.a_row = 2, 0
            y0 = np.concatenate([np.zeros(n), lengths])
            speed_sq = lengths ** 2

            def rhs(_s, y):
                return np.concatenate([y[n:], -kappa * speed_sq * y[:n]])
        else:
            flow = RevolutionFlow(model)
            self.rows, self.a_row = 7, 4
            p0 = flow.covector(starts, velocities)
            y0 = np.concatenate([starts[:, 0], starts[:, 1], p0[:, 0], p0[:, 1],
                                 np.zeros(n), lengths, np.zeros(n)])
            rhs = flow.jacobi_rhs
            self.flow = flow

        moving = lengths > 0.0
        events = None
        if np.any(moving):
            start_value = float(np.min(lengths[moving]))
            a_slice = slice(self.a_row * n, (self.a_row + 1) * n)

            def conjugate(s, y):
                if s <= 0.0:
                    return start_value
                return float(np.min(y[a_slice][moving] / s))

            conjugate.terminal = True
            conjugate.direction = -1
            events = conjugate

        self.solution = solve_ivp(rhs, (0.0, 1.0), y0, method="DOP853", rtol=tol.ode_rtol, atol=tol.ode_atol,
                                  dense_output=True, events=events)
        if self.solution.status == 1:
            raise ConjugatePointError(float(self.solution.t_events[0][0]))
        if not self.solution.success:
            raise LabNumericError(f"Jacobi integration failed: {self.solution.message}")

    def state(self, s: np.ndarray) -> np.ndarray:
        """Shape (rows, count, len(s))."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return self.solution.sol(s).reshape(self.rows, self.count, s.size)

    def A(self, s) -> np.ndarray:
        return self.state(s)[self.a_row]

    def A_prime(self, s) -> np.ndarray:
        return self.state(s)[self.a_row + 1]


@dataclass(frozen=True)
class JacobiSolution:
    """Normal Jacobi matrix along one geodesic, A(0) = 0, A'(0) = L I."""

    model: ManifoldModel
    geodesic: GeodesicSegment
    _flow: Optional[_JacobiFlow]

    @property
    def length(self) -> float:
        return self.geodesic.length

    def A(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self._flow is None:
            return np.zeros(s.shape + (DIMENSION - 1, DIMENSION - 1))
        return self._flow.A(s.ravel())[0].reshape(s.shape + (1, 1))

    def A_prime(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self._flow is None:
            return np.zeros(s.shape + (DIMENSION - 1, DIMENSION - 1))
        return self._flow.A_prime(s.ravel())[0].reshape(s.shape + (1, 1))

    def wronskian(self, s) -> np.ndarray:
        """A^T A' - A'^T A, which stays zero along a solution of the Jacobi equation."""
        a, da = self.A(s), self.A_prime(s)
        return np.swapaxes(a, -1, -2) @ da - np.swapaxes(da, -1, -2) @ a

    def determinant(self, s) -> np.ndarray:
        return np.linalg.det(self.A(s))

    def velocity(self, s: float) -> np.ndarray:
        """gamma'(s) in chart components."""
        seg = self.geodesic
        if self._flow is not None and hasattr(self._flow, "flow"):
            state = self._flow.state(np.array([s]))[:4, 0, 0]
            return self._flow.flow.velocity(state[:2], state[2:])
        if s == 0.0 or self.length == 0.0:
            return seg.initial_velocity
        point = seg(s)
        if s < 1.0:
            return log_maps(self.model, point, seg.q)[0] / (1.0 - s)
        return -log_maps(self.model, seg.q, seg.p)[0]

    def frame(self, s: float) -> Tuple[np.ndarray, np.ndarray]:
        """Parallel orthonormal frame (T, E): T the unit tangent, E the unit normal."""
        if self.length == 0.0:
            raise DomainError("A degenerate geodesic has no tangent frame")
        return orthonormal_frame(self.model, self.geodesic(s), self.velocity(s))


def solve_jacobi(model: ManifoldModel, segment: GeodesicSegment) -> JacobiSolution:
    """
    Integrate the normal Jacobi equation along a geodesic segment.

    Raises:
        ConjugatePointError: if det A vanishes before s = 1
        DomainError: if the geodesic leaves the chart
    """
    check_in_chart(model, np.stack([segment.p, segment.q]))
    if segment.length == 0.0:
        return JacobiSolution(model=model, geodesic=segment, _flow=None)
    flow = _JacobiFlow(model, segment.p[None], segment.initial_velocity[None], np.array([segment.length]))
    return JacobiSolution(model=model, geodesic=segment, _flow=flow)


############################
#### VOLUME DISTORTION #####
############################

@dataclass(frozen=True)
class DistortionValue:
    x: np.ndarray
    y: np.ndarray
    t: float
    value: float

    def __post_init__(self):
        if not self.value > 0.0:
            raise LabNumericError(f"Volume distortion must be positive, got {self.value}")


def _check_t(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any((t <= 0.0) | (t > 1.0)):
        raise DomainError(f"t must lie in (0, 1], got {t}")
    return t


def volume_distortions(model: ManifoldModel, X, Y, t) -> np.ndarray:
    """v_t(x_i, y_i) for many pairs in one Jacobi integration; t is a scalar or one value per pair."""
    X = check_in_chart(model, np.atleast_2d(X))
    Y = check_in_chart(model, np.atleast_2d(Y))
    t = np.broadcast_to(_check_t(t), X.shape[:1])
    if np.any(np.all(X == Y, axis=-1)):
        raise DomainError("Volume distortion needs x != y")
    batch = geodesics(model, X, Y)
    flow = _JacobiFlow(model, batch.starts, batch.velocities, batch.lengths)
    idx = np.arange(X.shape[0])
    unique_t, inverse = np.unique(t, return_inverse=True)
    a_t = flow.A(unique_t)[idx, inverse]
    a_1 = flow.A(np.array([1.0]))[:, 0]
    return a_t / (t * a_1)


def volume_distortion(model: ManifoldModel, x, y, t: float) -> DistortionValue:
    """
    v_t(x, y) = det Abar(t) / (t^n det Abar(1)).

    Raises:
        DomainError: if x == y, t outside (0, 1] or a point outside the chart
        ConjugatePointError: propagated from the Jacobi integration
    """
    x, y = as_points(x), as_points(y)
    if float(t) == 1.0:
        check_in_chart(model, np.stack([x, y]))
        if np.all(x == y):
            raise DomainError("Volume distortion needs x != y")
        return DistortionValue(x=x, y=y, t=1.0, value=1.0)
    value = float(volume_distortions(model, x[None], y[None], float(t))[0])
    return DistortionValue(x=x, y=y, t=float(t), value=value)


def closed_form_distortion(kappa: float, t, L) -> np.ndarray:
    """(s_kappa(tL) / (t s_kappa(L)))^(n-1) on constant curvature kappa, n = 2."""
    geometry = ConstantCurvatureGeometry(kappa)
    t = np.asarray(t, dtype=float)
    return (geometry.jacobi_scalar(t * L) / (t * geometry.jacobi_scalar(L))) ** (DIMENSION - 1)


def _polygon_area(model: ManifoldModel, polygon: np.ndarray) -> float:
    """Shoelace area in the chart times the volume density at the vertex centroid."""
    x, y = polygon[:, 0], polygon[:, 1]
    chart_area = 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
    density = math.sqrt(float(np.linalg.det(metric_tensor(model, polygon.mean(axis=0)))))
    return chart_area * density


def distortion_ratio(model: ManifoldModel, x, y, t: float, r: float, n_boundary: int = 256) -> float:
    """
    Finite-r ratio m(Z_t(x, B_r(y))) / m(B_{tr}(y)).

    Both regions are approximated by polygons through images of the same
    boundary angles, so the polygonal error cancels to leading order.
    """
    x, y = as_points(x), as_points(y)
    _check_t(t)
    if r <= 0.0:
        raise DomainError(f"Ball radius must be positive, got {r}")
    angles = 2.0 * math.pi * np.arange(n_boundary) / n_boundary
    e1, e2 = orthonormal_frame(model, y, np.array([1.0, 0.0]))
    directions = np.cos(angles)[:, None] * e1 + np.sin(angles)[:, None] * e2
    base = np.broadcast_to(y, directions.shape)
    boundary = exp_maps(model, base, r * directions)
    moved = exp_maps(model, np.broadcast_to(x, boundary.shape), t * log_maps(model, np.broadcast_to(x, boundary.shape), boundary))
    reference = exp_maps(model, base, t * r * directions)
    return _polygon_area(model, moved) / _polygon_area(model, reference)


@dataclass(frozen=True)
class RichardsonResult:
    radii: List[float]
    ratios: List[float]
    extrapolated: float
    observed_order: float


def richardson_distortion(model: ManifoldModel, x, y, t: float, r0: float = 0.08, levels: int = 4,
                          n_boundary: int = 256) -> RichardsonResult:
    """
    Extrapolate the finite-r ratio to r -> 0 with halving radii and report the observed order.

    The polygonal ratio is even in r, so its error expands in r^2, r^4, ...
    The order is read off successive differences with the r^4 term removed,
    and the value is extrapolated with fixed exponents 2 then 4.
    """
    if levels < 4:
        raise LabInputError("Richardson extrapolation needs at least 4 radii")
    radii = [r0 / 2 ** i for i in range(levels)]
    ratios = np.array([distortion_ratio(model, x, y, t, r, n_boundary) for r in radii])
    diffs = np.diff(ratios)
    reduced = diffs[:-1] - 16.0 * diffs[1:]
    e1, e2 = abs(float(reduced[-2])), abs(float(reduced[-1]))
    if np.abs(diffs[-3:]).max() <= 1e-12 * max(1.0, abs(float(ratios[-1]))) or e2 == 0.0:
        # already converged to rounding
        order = math.inf
    else:
        # r^6 and higher terms stay below the rounding digit
        order = round(math.log2(e1 / e2), ORDER_DIGITS)
    first = ratios[1:] + (ratios[1:] - ratios[:-1]) / 3.0
    second = first[1:] + (first[1:] - first[:-1]) / 15.0
    extrapolated = float(second[-1])
    logger.debug(f"Richardson distortion: ratios={ratios.tolist()}, order={order}")
    return RichardsonResult(radii=radii, ratios=ratios.tolist(), extrapolated=extrapolated, observed_order=order)


############################
#### RADIAL JACOBIANS ######
############################

def _map_derivative(F: Callable, r: np.ndarray) -> np.ndarray:
    derivative = getattr(F, "derivative", None)
    if derivative is not None:
        return np.asarray(derivative(r), dtype=float)
    h = FD_STEP
    forward = r < h
    lo = np.where(forward, r, r - h)
    hi = r + h
    return (np.asarray(F(hi), dtype=float) - np.asarray(F(lo), dtype=float)) / (hi - lo)


def radial_jacobian(model: ManifoldModel, F_t: Callable, r) -> np.ndarray:
    """
    J_t(r) = F_t'(r) f(F_t(r)) / f(r), the Jacobian of (r, theta) -> (F_t(r), theta).

    Near the pole, with F_t(0) = 0, the limit F_t'(0)^2 is used.

    Raises:
        DomainError: at r = 0 when F_t(0) > 0 (the pole is spread over a circle)
    """
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    image = np.asarray(F_t(r), dtype=float)
    slope = _map_derivative(F_t, r)
    near = r < model.tolerances.pole_threshold
    fixed_pole = abs(float(np.asarray(F_t(np.array([0.0])))[0])) < 1e-12
    if np.any(r == 0.0) and not fixed_pole:
        raise DomainError("Radial map moves the pole: Jacobian at r=0 is unbounded")
    safe = np.where(r > 0.0, r, 1.0)
    ratio = model.warp.f(image) / model.warp.f(safe)
    jacobian = slope * ratio
    if fixed_pole:
        jacobian = np.where(near, slope * slope, jacobian)
    return float(jacobian[0]) if scalar else jacobian


def check_jacobian_concavity(model: ManifoldModel, x, F_image, t: float, J_t: float, J_1: float) -> float:
    """
    J_t^(1/n) - (1-t) v_{1-t}(F(x), x)^(1/n) - t v_t(x, F(x))^(1/n) J_1^(1/n).

    Nonnegative when the transport Jacobian is concave in the sense of the
    distortion estimate; the caller compares against its tolerance.
    """
    if not (J_t > 0.0 and J_1 > 0.0):
        raise LabInputError(f"Jacobians must be positive, got J_t={J_t}, J_1={J_1}")
    if not 0.0 < t < 1.0:
        raise DomainError(f"t must lie in (0, 1), got {t}")
    x, F_image = as_points(x), as_points(F_image)
    if distance(model, x, F_image) == 0.0:
        back, forward = 1.0, 1.0
    else:
        back = volume_distortion(model, F_image, x, 1.0 - t).value
        forward = volume_distortion(model, x, F_image, t).value
    n = DIMENSION
    return J_t ** (1.0 / n) - (1.0 - t) * back ** (1.0 / n) - t * forward ** (1.0 / n) * J_1 ** (1.0 / n)


def radial_concavity_slacks(model: ManifoldModel, F: Callable, radii: Sequence[float], t: float) -> np.ndarray:
    """Concavity slack along the ray theta = 0 for the interpolation F_t(r) = (1-t) r + t F(r)."""
    radii = np.asarray(radii, dtype=float)
    images = np.asarray(F(radii), dtype=float)

    def F_t(r):
        return (1.0 - t) * r + t * np.asarray(F(r), dtype=float)

    if hasattr(F, "derivative"):
        F_t.derivative = lambda r: (1.0 - t) + t * np.asarray(F.derivative(r), dtype=float)

    J_t = radial_jacobian(model, F_t, radii)
    J_1 = radial_jacobian(model, F, radii)
    X = np.stack([radii, np.zeros_like(radii)], axis=-1)
    Y = np.stack([images, np.zeros_like(images)], axis=-1)
    moving = np.abs(images - radii) > 0.0
    back = np.ones_like(radii)
    forward = np.ones_like(radii)
    if np.any(moving):
        back[moving] = volume_distortions(model, Y[moving], X[moving], 1.0 - t)
        forward[moving] = volume_distortions(model, X[moving], Y[moving], t)
    n = DIMENSION
    return J_t ** (1.0 / n) - (1.0 - t) * back ** (1.0 / n) - t * forward ** (1.0 / n) * J_1 ** (1.0 / n)


############################
##### EXPONENT CHAIN #######
############################

def exponent_chain(t: float, L: float, k: float, v_t: float, n: int = DIMENSION) -> Dict[str, Dict[str, float]]:
    """
    Compare v_t^(1/n) with the distortion lower bound raised to each candidate exponent.

    The distortion bound v_t >= (S(tL)/S(L))^(n-1) implies
    v_t^(1/n) >= (S(tL)/S(L))^((n-1)/n); the form 1 - 1/n is the same number,
    and 1/n is the alternative reading.
    """
    ratio = comparison_S(t * L, k, n) / comparison_S(L, k, n)
    root = v_t ** (1.0 / n)
    chain = {}
    for label, exponent in (("(n-1)/n", (n - 1) / n), ("1-1/n", 1.0 - 1.0 / n), ("1/n", 1.0 / n)):
        bound = ratio ** exponent
        chain[label] = {"exponent": exponent, "bound": bound, "v_root": root, "holds": bool(root >= bound - 1e-12)}
    return chain
