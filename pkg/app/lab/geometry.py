"""
Two-dimensional model surfaces in a polar normal chart.

Every model is written as dr^2 + f(r)^2 dtheta^2 around a pole o (the chart
origin). Points are Cartesian chart coordinates x = (r cos theta, r sin theta),
i.e. normal coordinates at o, so the pole needs no special chart. Tangent
vectors are chart components.

Constant-curvature kinds use closed forms through the hyperboloid / sphere
embeddings. Surfaces of revolution integrate the geodesic Hamiltonian flow
H = 1/2 [w |p|^2 + q (x.p)^2], w = r^2/f^2, q = (1 - w)/r^2, which is smooth at
the pole; boundary-value problems are solved by batched shooting.
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy.integrate import quad, solve_ivp

from app.enums.lab_enums import ModelKindEnum
from app.lab.errors import DomainError, LabInputError, LabNumericError
from app.lab.warp import ExpressionWarp, Warp

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# hemisphere: beyond it the cap is no longer geodesically convex
SPHERE_CAP_LIMIT = math.pi / 2.0


@dataclass(frozen=True)
class Tolerances:
    ode_rtol: float = 1e-11
    ode_atol: float = 1e-12
    shoot_tol: float = 1e-10
    shoot_max_iter: int = 30
    quad_rtol: float = 1e-10
    pole_threshold: float = 1e-3

    def __post_init__(self):
        for name in ("ode_rtol", "ode_atol", "shoot_tol", "quad_rtol", "pole_threshold"):
            if getattr(self, name) <= 0.0:
                raise LabInputError(f"Tolerance {name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class ManifoldModel:
    kind: ModelKindEnum
    warp: Warp
    r_max: float
    tolerances: Tolerances = field(default_factory=Tolerances)
    dimension: int = 2

    def __post_init__(self):
        if self.dimension != 2:
            raise LabInputError(f"Only two-dimensional models are supported, got n={self.dimension}")
        if not self.r_max > 0.0:
            raise LabInputError(f"r_max must be positive, got {self.r_max}")
        if self.kind == ModelKindEnum.SPHERE_CAP and self.r_max >= SPHERE_CAP_LIMIT:
            raise DomainError(f"Sphere cap radius {self.r_max} is not geodesically convex (needs r_max < pi/2)")
        self.warp.validate(self.r_max)

    @property
    def curvature_constant(self) -> Optional[float]:
        return {
            ModelKindEnum.EUCLIDEAN_PLANE: 0.0,
            ModelKindEnum.HYPERBOLIC_PLANE: -1.0,
            ModelKindEnum.SPHERE_CAP: 1.0,
        }.get(self.kind)

    @property
    def is_constant_curvature(self) -> bool:
        return self.curvature_constant is not None

    def spec(self) -> Dict[str, object]:
        return {"kind": self.kind.value, "warp": self.warp.label, "r_max": self.r_max}

    def __repr__(self):
        return f"<ManifoldModel(kind={self.kind.value}, warp={self.warp.label}, r_max={self.r_max})>"


def euclidean_plane(r_max: float = 10.0, tolerances: Optional[Tolerances] = None) -> ManifoldModel:
    return ManifoldModel(ModelKindEnum.EUCLIDEAN_PLANE, ExpressionWarp("r"), r_max, tolerances or Tolerances())


def hyperbolic_plane(r_max: float = 12.0, tolerances: Optional[Tolerances] = None) -> ManifoldModel:
    return ManifoldModel(ModelKindEnum.HYPERBOLIC_PLANE, ExpressionWarp("sinh(r)"), r_max, tolerances or Tolerances())


def sphere_cap(r_max: float = 1.2, tolerances: Optional[Tolerances] = None) -> ManifoldModel:
    return ManifoldModel(ModelKindEnum.SPHERE_CAP, ExpressionWarp("sin(r)"), r_max, tolerances or Tolerances())


def surface_of_revolution(warp: Warp, r_max: float, tolerances: Optional[Tolerances] = None) -> ManifoldModel:
    return ManifoldModel(ModelKindEnum.SURFACE_OF_REVOLUTION, warp, r_max, tolerances or Tolerances())


def build_model(kind: ModelKindEnum, warp: Optional[Warp] = None, r_max: Optional[float] = None,
                tolerances: Optional[Tolerances] = None) -> ManifoldModel:
    kind = ModelKindEnum(kind)
    if kind == ModelKindEnum.SURFACE_OF_REVOLUTION:
        if warp is None or r_max is None:
            raise LabInputError("surface-of-revolution needs a warp and r_max")
        return surface_of_revolution(warp, r_max, tolerances)
    factory = {
        ModelKindEnum.EUCLIDEAN_PLANE: euclidean_plane,
        ModelKindEnum.HYPERBOLIC_PLANE: hyperbolic_plane,
        ModelKindEnum.SPHERE_CAP: sphere_cap,
    }[kind]
    return factory(r_max, tolerances) if r_max is not None else factory(tolerances=tolerances)


############################
####### CHART HELPERS ######
############################

def as_points(points: ArrayLike) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.shape[-1] != 2:
        raise LabInputError(f"Chart points must have 2 coordinates, got shape {points.shape}")
    return points


def chart_radius(points: np.ndarray) -> np.ndarray:
    return np.hypot(points[..., 0], points[..., 1])


def check_in_chart(model: ManifoldModel, points: ArrayLike) -> np.ndarray:
    """
    Raises:
        DomainError: if a point lies outside the chart disc r <= r_max
    """
    points = as_points(points)
    radii = chart_radius(points)
    if np.any(radii > model.r_max * (1.0 + 1e-12)):
        worst = float(np.max(radii))
        raise DomainError(f"Point at radius {worst:.6g} lies outside the chart (r_max={model.r_max})")
    return points


def _unit_directions(points: np.ndarray, radii: np.ndarray) -> np.ndarray:
    safe = np.where(radii > 0.0, radii, 1.0)[..., None]
    units = points / safe
    return np.where((radii > 0.0)[..., None], units, np.array([1.0, 0.0]))


def _sinc_like(x: np.ndarray, sign: float) -> np.ndarray:
    """sin(x)/x for sign=+1, sinh(x)/x for sign=-1, 1 for sign=0; series near 0."""
    x = np.asarray(x, dtype=float)
    if sign == 0.0:
        return np.ones_like(x)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    exact = np.sin(safe) / safe if sign > 0 else np.sinh(safe) / safe
    x2 = x * x
    series = 1.0 - sign * x2 / 6.0 + x2 * x2 / 120.0
    return np.where(small, series, exact)


############################
## CONSTANT CURVATURE ######
############################

class ConstantCurvatureGeometry:
    """
    Closed-form distance, exp and log for curvature kappa in the pole normal chart.

    kappa != 0 is reduced to the unit model by the chart dilation x -> sqrt|kappa| x.
    """

    def __init__(self, kappa: float):
        self.kappa = float(kappa)
        self.sign = float(np.sign(self.kappa))
        self.scale = math.sqrt(abs(self.kappa)) if self.kappa != 0.0 else 1.0

    def _sn(self, x):
        return np.sin(x) if self.sign > 0 else np.sinh(x)

    def _cs(self, x):
        return np.cos(x) if self.sign > 0 else np.cosh(x)

    def _to_ambient(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        r = chart_radius(x)
        u = _unit_directions(x, r)
        ambient = np.concatenate([self._cs(r)[..., None], self._sn(r)[..., None] * u], axis=-1)
        return ambient, r, u, _sinc_like(r, self.sign)

    def _from_ambient(self, ambient: np.ndarray) -> np.ndarray:
        spatial = ambient[..., 1:]
        norm = np.hypot(spatial[..., 0], spatial[..., 1])
        if self.sign > 0:
            r = np.arctan2(norm, ambient[..., 0])
        else:
            r = np.arcsinh(norm)
        return spatial / _sinc_like(r, self.sign)[..., None]

    def distance(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        if self.sign == 0.0:
            return np.linalg.norm(q - p, axis=-1)
        p, q = self.scale * p, self.scale * q
        rp, rq = chart_radius(p), chart_radius(q)
        up, uq = _unit_directions(p, rp), _unit_directions(q, rq)
        chord = np.sum((up - uq) ** 2, axis=-1) / 4.0
        half = self._sn((rp - rq) / 2.0) ** 2 + self._sn(rp) * self._sn(rq) * chord
        half = np.sqrt(np.maximum(half, 0.0))
        d = 2.0 * (np.arcsin(np.minimum(half, 1.0)) if self.sign > 0 else np.arcsinh(half))
        return d / self.scale

    def exp(self, p: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self.sign == 0.0:
            return p + v
        p, v = self.scale * p, self.scale * v
        X, r, u, sinc_r = self._to_ambient(p)
        dr = np.sum(u * v, axis=-1)
        tangential = v - dr[..., None] * u
        dX0 = -self.sign * self._sn(r) * dr
        dXs = self._cs(r)[..., None] * dr[..., None] * u + sinc_r[..., None] * tangential
        V = np.concatenate([dX0[..., None], dXs], axis=-1)
        length = np.sqrt(dr ** 2 + (sinc_r ** 2) * np.sum(tangential ** 2, axis=-1))
        Y = self._cs(length)[..., None] * X + _sinc_like(length, self.sign)[..., None] * V
        return self._from_ambient(Y) / self.scale

    def log(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        if self.sign == 0.0:
            return q - p
        d = self.distance(p, q) * self.scale
        p, q = self.scale * p, self.scale * q
        X, r, u, sinc_r = self._to_ambient(p)
        Y, _, _, _ = self._to_ambient(q)
        V = (Y - self._cs(d)[..., None] * X) / _sinc_like(d, self.sign)[..., None]
        Vs = V[..., 1:]
        radial = np.sum(u * Vs, axis=-1)
        dr = radial / self._cs(r)
        v = dr[..., None] * u + (Vs - radial[..., None] * u) / sinc_r[..., None]
        return v / self.scale

    def jacobi_scalar(self, s: ArrayLike) -> np.ndarray:
        """s_kappa(s): the normal Jacobi field with A(0)=0, A'(0)=1 at arclength s."""
        s = np.asarray(s, dtype=float)
        return s * _sinc_like(self.scale * s, self.sign)


############################
## SURFACE OF REVOLUTION ###
############################

class RevolutionFlow:
    """Vectorised geodesic and Jacobi flow for dr^2 + f(r)^2 dtheta^2 in the normal chart."""

    def __init__(self, model: ManifoldModel):
        self.model = model
        self.warp = model.warp
        self.pole = model.tolerances.pole_threshold
        c = model.warp.d3f0
        self._w_pole = 1.0
        self._q_pole = c / 3.0
        self._wr_pole = -2.0 * c / 3.0

    def coefficients(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """w, q, w'/r and q'/r at radius r, with their pole limits below the threshold."""
        near = r < self.pole
        rs = np.where(near, self.pole, r)
        f = self.warp.f(rs)
        df = self.warp.df(rs)
        ratio = rs / f
        w = ratio * ratio
        one_minus_w = (f - rs) * (f + rs) / (f * f)
        q = one_minus_w / (rs * rs)
        wr = 2.0 * (f - rs * df) / (f * f * f)
        qr = -wr / (rs * rs) - 2.0 * one_minus_w / (rs ** 4)
        w = np.where(near, self._w_pole, w)
        q = np.where(near, self._q_pole, q)
        wr = np.where(near, self._wr_pole, wr)
        qr = np.where(near, 0.0, qr)
        return w, q, wr, qr

    def metric(self, x: np.ndarray) -> np.ndarray:
        """g = (I - q x x^T)/w at each point, shape (..., 2, 2)."""
        w, q, _, _ = self.coefficients(chart_radius(x))
        outer = x[..., :, None] * x[..., None, :]
        eye = np.broadcast_to(np.eye(2), outer.shape)
        return (eye - q[..., None, None] * outer) / w[..., None, None]

    def covector(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.einsum("...ij,...j->...i", self.metric(x), v)

    def velocity(self, x: np.ndarray, p: np.ndarray) -> np.ndarray:
        w, q, _, _ = self.coefficients(chart_radius(x))
        xp = np.sum(x * p, axis=-1)
        return w[..., None] * p + (q * xp)[..., None] * x

    def _geodesic_terms(self, x1, x2, p1, p2):
        r = np.hypot(x1, x2)
        w, q, wr, qr = self.coefficients(r)
        xp = x1 * p1 + x2 * p2
        pp = p1 * p1 + p2 * p2
        dx1 = w * p1 + q * xp * x1
        dx2 = w * p2 + q * xp * x2
        radial = -0.5 * (wr * pp + qr * xp * xp)
        dp1 = radial * x1 - q * xp * p1
        dp2 = radial * x2 - q * xp * p2
        speed_sq = w * pp + q * xp * xp
        return dx1, dx2, dp1, dp2, r, speed_sq

    def geodesic_rhs(self, _s: float, y: np.ndarray) -> np.ndarray:
        x1, x2, p1, p2 = y.reshape(4, -1)
        dx1, dx2, dp1, dp2, _, _ = self._geodesic_terms(x1, x2, p1, p2)
        return np.concatenate([dx1, dx2, dp1, dp2])

    def jacobi_rhs(self, _s: float, y: np.ndarray) -> np.ndarray:
        """Geodesic flow plus A'' = -|v|^2 K(gamma) A and the running integral of A."""
        x1, x2, p1, p2, a, da, _ = y.reshape(7, -1)
        dx1, dx2, dp1, dp2, r, speed_sq = self._geodesic_terms(x1, x2, p1, p2)
        curvature = self.warp.gauss_curvature(r, self.pole)
        return np.concatenate([dx1, dx2, dp1, dp2, da, -speed_sq * curvature * a, a])

    def integrate(self, starts: np.ndarray, velocities: np.ndarray, dense: bool = False):
        n = starts.shape[0]
        p0 = self.covector(starts, velocities)
        y0 = np.concatenate([starts[:, 0], starts[:, 1], p0[:, 0], p0[:, 1]])
        tol = self.model.tolerances
        solution = solve_ivp(self.geodesic_rhs, (0.0, 1.0), y0, method="DOP853",
                             rtol=tol.ode_rtol, atol=tol.ode_atol, dense_output=dense)
        if not solution.success:
            raise LabNumericError(f"Geodesic integration failed: {solution.message}")
        end = solution.y[:, -1].reshape(4, n)
        return np.stack([end[0], end[1]], axis=-1), solution


def _flow(model: ManifoldModel) -> RevolutionFlow:
    return RevolutionFlow(model)


def _comparison_geometry(model: ManifoldModel, P: np.ndarray, Q: np.ndarray) -> ConstantCurvatureGeometry:
    """Nearest constant-curvature model for a shooting initial guess."""
    curvature = 0.5 * (gauss_curvature(model, P) + gauss_curvature(model, Q))
    kappa = float(np.median(curvature)) if curvature.size else 0.0
    reach = float(np.max(chart_radius(P) + chart_radius(Q))) if P.size else 0.0
    if kappa > 0.0 and math.sqrt(kappa) * reach >= 0.8 * math.pi:
        kappa = 0.0
    return ConstantCurvatureGeometry(kappa)


def _shoot(model: ManifoldModel, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Batched Newton shooting for v with exp_P(v) = Q; Jacobians by forward differences."""
    tol = model.tolerances
    flow = _flow(model)
    V = _comparison_geometry(model, P, Q).log(P, Q)
    scale = np.maximum(1.0, chart_radius(Q))
    active = np.ones(P.shape[0], dtype=bool)
    residual = np.full(P.shape[0], np.inf)
    for iteration in range(tol.shoot_max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        base_v = V[idx]
        h = 1e-7 * np.maximum(1.0, np.linalg.norm(base_v, axis=-1))
        starts = np.concatenate([P[idx]] * 3)
        trial = np.concatenate([base_v,
                                base_v + np.stack([h, np.zeros_like(h)], axis=-1),
                                base_v + np.stack([np.zeros_like(h), h], axis=-1)])
        ends, _ = flow.integrate(starts, trial)
        m = idx.size
        end0, end1, end2 = ends[:m], ends[m:2 * m], ends[2 * m:]
        miss = end0 - Q[idx]
        residual[idx] = np.linalg.norm(miss, axis=-1)
        done = residual[idx] <= tol.shoot_tol * scale[idx]
        active[idx[done]] = False
        if np.all(done):
            break
        jac = np.stack([(end1 - end0) / h[:, None], (end2 - end0) / h[:, None]], axis=-1)
        try:
            step = np.linalg.solve(jac, miss[..., None])[..., 0]
        except np.linalg.LinAlgError as e:
            raise LabNumericError("Singular shooting Jacobian (conjugate point on a trial geodesic)",
                                  residual=float(np.max(residual[idx]))) from e
        limit = np.maximum(0.5, 0.5 * np.linalg.norm(base_v, axis=-1))
        norm = np.linalg.norm(step, axis=-1)
        step *= np.minimum(1.0, limit / np.maximum(norm, 1e-300))[:, None]
        step[done] = 0.0
        V[idx] = base_v - step
    if np.any(active):
        worst = float(np.max(residual[active]))
        raise LabNumericError(f"Geodesic shooting did not converge for {int(active.sum())} pair(s)", residual=worst)
    logger.debug(f"Shooting converged for {P.shape[0]} pair(s) in {iteration + 1} iteration(s)")
    return V


############################
####### OPERATIONS #########
############################

def metric_tensor(model: ManifoldModel, points: ArrayLike) -> np.ndarray:
    return _flow(model).metric(as_points(points))


def metric_norm(model: ManifoldModel, points: ArrayLike, vectors: ArrayLike) -> np.ndarray:
    points, vectors = as_points(points), as_points(vectors)
    g = metric_tensor(model, points)
    return np.sqrt(np.maximum(np.einsum("...i,...ij,...j->...", vectors, g, vectors), 0.0))


def gauss_curvature(model: ManifoldModel, points: ArrayLike) -> np.ndarray:
    points = as_points(points)
    if model.is_constant_curvature:
        return np.full(points.shape[:-1], model.curvature_constant)
    return model.warp.gauss_curvature(chart_radius(points), model.tolerances.pole_threshold)


def ricci_min(model: ManifoldModel, p: ArrayLike) -> float:
    """Minimal Ricci eigenvalue at p; equals the Gauss curvature in dimension 2."""
    p = check_in_chart(model, p)
    return float(gauss_curvature(model, p))


def exp_maps(model: ManifoldModel, P: ArrayLike, V: ArrayLike) -> np.ndarray:
    P = check_in_chart(model, np.atleast_2d(P))
    V = as_points(np.atleast_2d(V))
    if model.is_constant_curvature:
        return ConstantCurvatureGeometry(model.curvature_constant).exp(P, V)
    ends, _ = _flow(model).integrate(P, V)
    return ends


def exp_map(model: ManifoldModel, p: ArrayLike, v: ArrayLike) -> np.ndarray:
    return exp_maps(model, np.asarray(p, dtype=float)[None], np.asarray(v, dtype=float)[None])[0]


def log_maps(model: ManifoldModel, P: ArrayLike, Q: ArrayLike) -> np.ndarray:
    P = check_in_chart(model, np.atleast_2d(P))
    Q = check_in_chart(model, np.atleast_2d(Q))
    P, Q = np.broadcast_arrays(P, Q)
    if model.is_constant_curvature:
        return ConstantCurvatureGeometry(model.curvature_constant).log(P, Q)
    V = np.zeros_like(P)
    moving = np.any(P != Q, axis=-1)
    if np.any(moving):
        V[moving] = _shoot(model, np.ascontiguousarray(P[moving]), np.ascontiguousarray(Q[moving]))
    return V


def log_map(model: ManifoldModel, p: ArrayLike, q: ArrayLike) -> np.ndarray:
    return log_maps(model, np.asarray(p, dtype=float)[None], np.asarray(q, dtype=float)[None])[0]


def distances(model: ManifoldModel, P: ArrayLike, Q: ArrayLike) -> np.ndarray:
    P = check_in_chart(model, np.atleast_2d(P))
    Q = check_in_chart(model, np.atleast_2d(Q))
    if model.is_constant_curvature:
        P, Q = np.broadcast_arrays(P, Q)
        return ConstantCurvatureGeometry(model.curvature_constant).distance(P, Q)
    V = log_maps(model, P, Q)
    return metric_norm(model, np.broadcast_to(P, V.shape), V)


def distance(model: ManifoldModel, p: ArrayLike, q: ArrayLike) -> float:
    """
    Riemannian distance between two chart points.

    Raises:
        DomainError: if p or q lies outside the chart
        LabNumericError: if shooting does not converge (surfaces of revolution)
    """
    return float(distances(model, np.asarray(p, dtype=float)[None], np.asarray(q, dtype=float)[None])[0])


@dataclass(frozen=True)
class GeodesicSegment:
    p: np.ndarray
    q: np.ndarray
    length: float
    initial_velocity: np.ndarray
    evaluator: Callable[[ArrayLike], np.ndarray]

    def __call__(self, t: ArrayLike) -> np.ndarray:
        return self.evaluator(t)

    def __repr__(self):
        return f"<GeodesicSegment(p={self.p.tolist()}, q={self.q.tolist()}, length={self.length:.6g})>"


@dataclass(frozen=True)
class GeodesicBatch:
    """Many minimizing segments at once; evaluate(t) accepts a scalar or one t per segment."""

    model: ManifoldModel
    starts: np.ndarray
    ends: np.ndarray
    velocities: np.ndarray
    lengths: np.ndarray

    def __len__(self):
        return self.starts.shape[0]

    def evaluate(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            if t == 0.0:
                return self.starts.copy()
            if t == 1.0:
                return self.ends.copy()
        scaled = self.velocities * (t[..., None] if t.ndim else t)
        return exp_maps(self.model, self.starts, scaled)

    def segment(self, i: int) -> GeodesicSegment:
        return _segment(self.model, self.starts[i], self.ends[i], self.velocities[i], float(self.lengths[i]))


def _segment(model: ManifoldModel, p: np.ndarray, q: np.ndarray, v: np.ndarray, length: float) -> GeodesicSegment:
    if model.is_constant_curvature:
        geometry = ConstantCurvatureGeometry(model.curvature_constant)

        def evaluator(t: ArrayLike) -> np.ndarray:
            t = np.asarray(t, dtype=float)
            return geometry.exp(np.broadcast_to(p, t.shape + (2,)), t[..., None] * v)
    else:
        _, solution = _flow(model).integrate(p[None], v[None], dense=True)

        def evaluator(t: ArrayLike) -> np.ndarray:
            t = np.asarray(t, dtype=float)
            state = solution.sol(np.clip(t, 0.0, 1.0).ravel())
            return np.stack([state[0], state[1]], axis=-1).reshape(t.shape + (2,))

    return GeodesicSegment(p=p, q=q, length=length, initial_velocity=v, evaluator=evaluator)


def geodesics(model: ManifoldModel, P: ArrayLike, Q: ArrayLike) -> GeodesicBatch:
    P = check_in_chart(model, np.atleast_2d(P))
    Q = check_in_chart(model, np.atleast_2d(Q))
    P, Q = (np.ascontiguousarray(a) for a in np.broadcast_arrays(P, Q))
    V = log_maps(model, P, Q)
    return GeodesicBatch(model=model, starts=P, ends=Q, velocities=V, lengths=metric_norm(model, P, V))


def geodesic(model: ManifoldModel, p: ArrayLike, q: ArrayLike) -> GeodesicSegment:
    """
    Minimizing constant-speed segment from p to q.

    Raises:
        DomainError: if p or q lies outside the chart
        LabNumericError: if shooting does not converge
    """
    batch = geodesics(model, np.asarray(p, dtype=float)[None], np.asarray(q, dtype=float)[None])
    return batch.segment(0)


def orthonormal_frame(model: ManifoldModel, p: ArrayLike, direction: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """Positively oriented g-orthonormal frame (e1, e2) at p with e1 along direction."""
    p = as_points(p)
    direction = as_points(direction)
    g = metric_tensor(model, p)
    e1 = direction / metric_norm(model, p, direction)[..., None]
    lowered = np.einsum("...ij,...j->...i", g, e1)
    e2 = np.stack([-lowered[..., 1], lowered[..., 0]], axis=-1)
    e2 = e2 / metric_norm(model, p, e2)[..., None]
    return e1, e2


def cost_matrix(model: ManifoldModel, X: ArrayLike, Y: ArrayLike, workers: int = 1,
                chunk_size: int = 4096, with_logs: bool = False):
    """
    Squared geodesic distances between every x_i and y_j.

    Pairs are split into fixed chunks, so the result does not depend on the
    number of workers. Returns (costs, logs) when with_logs is set, where
    logs[i, j] = log_{x_i}(y_j).
    """
    X = check_in_chart(model, np.atleast_2d(X))
    Y = check_in_chart(model, np.atleast_2d(Y))
    n, m = X.shape[0], Y.shape[0]
    P = np.repeat(X, m, axis=0)
    Q = np.tile(Y, (n, 1))
    if model.is_constant_curvature:
        geometry = ConstantCurvatureGeometry(model.curvature_constant)
        costs = geometry.distance(P, Q) ** 2
        logs = geometry.log(P, Q) if with_logs else None
    else:
        bounds = [(start, min(start + chunk_size, P.shape[0])) for start in range(0, P.shape[0], chunk_size)]

        def work(bound):
            lo, hi = bound
            return log_maps(model, P[lo:hi], Q[lo:hi])

        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            logs = np.concatenate(list(pool.map(work, bounds))) if bounds else np.zeros((0, 2))
        costs = metric_norm(model, P, logs) ** 2
    costs = costs.reshape(n, m)
    if with_logs:
        return costs, logs.reshape(n, m, 2)
    return costs


def ball_volume(model: ManifoldModel, x0: ArrayLike, R: float) -> float:
    """
    Riemannian area of the closed geodesic ball of radius R around x0.

    Integrates the volume element in geodesic polar coordinates at x0. On
    constant curvature and at the pole of a surface of revolution the element
    is rotationally symmetric and a single radial quadrature suffices; off the
    pole the angular integral is refined until it settles.

    Raises:
        DomainError: if the ball leaves the chart
    """
    x0 = check_in_chart(model, x0)
    if R < 0.0:
        raise DomainError(f"Ball radius must be nonnegative, got {R}")
    if float(chart_radius(x0)) + R > model.r_max * (1.0 + 1e-12):
        raise DomainError(
            f"Ball of radius {R} around radius {float(chart_radius(x0)):.6g} exits the chart "
            f"(max admissible radius {model.r_max - float(chart_radius(x0)):.6g})"
        )
    if R == 0.0:
        return 0.0
    rtol = model.tolerances.quad_rtol
    if model.is_constant_curvature:
        geometry = ConstantCurvatureGeometry(model.curvature_constant)
        radial, _ = quad(lambda s: float(geometry.jacobi_scalar(s)), 0.0, R, epsrel=rtol, epsabs=0.0, limit=200)
        return 2.0 * math.pi * radial
    if float(chart_radius(x0)) == 0.0:
        radial, _ = quad(lambda s: float(model.warp.f(s)), 0.0, R, epsrel=rtol, epsabs=0.0, limit=200)
        return 2.0 * math.pi * radial
    return _off_pole_ball_volume(model, x0, R)


def _off_pole_ball_volume(model: ManifoldModel, x0: np.ndarray, R: float) -> float:
    flow = _flow(model)
    tol = model.tolerances
    previous = None
    nodes = 16
    while nodes <= 1024:
        phi = 2.0 * math.pi * np.arange(nodes) / nodes
        directions = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        starts = np.broadcast_to(x0, directions.shape)
        e1, _ = orthonormal_frame(model, starts, directions)
        velocities = R * e1
        p0 = flow.covector(starts, velocities)
        y0 = np.concatenate([starts[:, 0], starts[:, 1], p0[:, 0], p0[:, 1],
                             np.zeros(nodes), np.full(nodes, R), np.zeros(nodes)])
        solution = solve_ivp(flow.jacobi_rhs, (0.0, 1.0), y0, method="DOP853", rtol=tol.ode_rtol, atol=tol.ode_atol)
        if not solution.success:
            raise LabNumericError(f"Volume-element integration failed: {solution.message}")
        # A is in units of the parameter s in [0, 1]; the arclength element contributes R
        radial = solution.y[:, -1].reshape(7, nodes)[6] * R
        # directions are uniform in the chart angle, not the g-angle at x0
        g = flow.metric(x0[None])[0]
        weight = _angular_jacobian(g, directions)
        current = float(np.mean(radial * weight) * 2.0 * math.pi)
        if previous is not None and abs(current - previous) <= tol.quad_rtol * abs(current):
            return current
        previous = current
        nodes *= 2
    logger.warning(f"Angular quadrature for ball volume stopped at {nodes // 2} nodes")
    return previous


def _angular_jacobian(g: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """d(g-angle)/d(chart angle) for unit chart directions under the constant metric g."""
    norm_sq = np.einsum("ni,ij,nj->n", directions, g, directions)
    return math.sqrt(np.linalg.det(g)) / norm_sq
