"""
Probability measures on a model surface.

GridMeasure     density on a polar chart grid with exact Riemannian cell areas
ParticleMeasure weighted point cloud, optionally carrying a triangulation whose
                triangles hold mass (a piecewise-constant density once the
                vertices are moved)
RadialProfile   rotationally symmetric density presets used to build grids
"""

import math
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.spatial import Delaunay

from app.enums.lab_enums import MeasurePresetEnum
from app.lab.errors import LabInputError
from app.lab.geometry import ManifoldModel, check_in_chart, exp_maps, metric_tensor, orthonormal_frame

logger = logging.getLogger(__name__)

GAUSS_NODES = 8
DEFAULT_RADIAL_CELLS = 256
DEFAULT_ANGULAR_CELLS = 64


def gauss_legendre(a: np.ndarray, b: np.ndarray, fn: Callable[[np.ndarray], np.ndarray],
                   nodes: int = GAUSS_NODES) -> np.ndarray:
    """Integrate fn over each [a_i, b_i] with an n-point Gauss-Legendre rule."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    points = 0.5 * (a + b) + half * x
    return np.sum(fn(points) * w, axis=-1) * half[..., 0]


############################
###### RADIAL PROFILES #####
############################

@dataclass(frozen=True)
class RadialProfile:
    """Unnormalised density rho(r) supported on [r_min, r_max] around the chart origin."""

    name: str
    density: Callable[[np.ndarray], np.ndarray]
    r_min: float
    r_max: float
    params: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.r_min < self.r_max:
            raise LabInputError(f"Profile {self.name} needs 0 <= r_min < r_max, got [{self.r_min}, {self.r_max}]")

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        inside = (r >= self.r_min) & (r <= self.r_max)
        return np.where(inside, self.density(np.clip(r, self.r_min, self.r_max)), 0.0)

    def radial_mass(self, model: ManifoldModel, a, b) -> np.ndarray:
        """2 pi * integral of rho(s) f(s) ds over [a, b] clipped to the support."""
        a = np.clip(np.asarray(a, dtype=float), self.r_min, self.r_max)
        b = np.clip(np.asarray(b, dtype=float), self.r_min, self.r_max)
        return 2.0 * math.pi * gauss_legendre(a, np.maximum(a, b), lambda s: self.density(s) * model.warp.f(s))

    def spec(self) -> Dict[str, object]:
        return {"preset": self.name, **self.params}


def uniform_ball_profile(radius: float) -> RadialProfile:
    return RadialProfile(MeasurePresetEnum.UNIFORM_BALL.value, lambda r: np.ones_like(r), 0.0, radius,
                         {"radius": radius})


def annulus_profile(inner: float, outer: float) -> RadialProfile:
    return RadialProfile(MeasurePresetEnum.ANNULUS.value, lambda r: np.ones_like(r), inner, outer,
                         {"inner": inner, "outer": outer})


def gaussian_profile(sigma: float, radius: float) -> RadialProfile:
    """exp(-r^2 / (2 sigma^2)) truncated at radius."""
    if sigma <= 0.0:
        raise LabInputError(f"Profile width sigma must be positive, got {sigma}")
    return RadialProfile(MeasurePresetEnum.RADIAL_PROFILE.value, lambda r: np.exp(-0.5 * (r / sigma) ** 2),
                         0.0, radius, {"sigma": sigma, "radius": radius})


def table_profile(r: np.ndarray, density: np.ndarray, label: str = "table") -> RadialProfile:
    r = np.asarray(r, dtype=float)
    density = np.asarray(density, dtype=float)
    if r.ndim != 1 or r.shape != density.shape or r.size < 2:
        raise LabInputError("Density table needs at least 2 rows of (r, density)")
    if np.any(np.diff(r) <= 0.0):
        raise LabInputError("Density table radii must be strictly increasing")
    if np.any(density < 0.0):
        raise LabInputError("Density table values must be nonnegative")
    interpolant = PchipInterpolator(r, density)
    return RadialProfile(MeasurePresetEnum.TABLE.value, lambda s: np.maximum(interpolant(s), 0.0),
                         float(r[0]), float(r[-1]), {"table": label})


def table_profile_from_file(path: Union[str, Path]) -> RadialProfile:
    path = Path(path)
    if not path.exists():
        raise LabInputError(f"Density table file not found: {path}")
    try:
        table = np.loadtxt(path, ndmin=2)
    except ValueError as e:
        raise LabInputError(f"Density table {path} does not parse as two numeric columns: {e}") from e
    if table.shape[1] != 2:
        raise LabInputError(f"Density table {path} must have exactly two columns, found {table.shape[1]}")
    return table_profile(table[:, 0], table[:, 1], label=path.name)


def build_profile(preset: MeasurePresetEnum, radius: Optional[float] = None, inner: Optional[float] = None,
                  outer: Optional[float] = None, sigma: Optional[float] = None,
                  table: Optional[str] = None) -> RadialProfile:
    preset = MeasurePresetEnum(preset)
    if preset == MeasurePresetEnum.UNIFORM_BALL:
        if radius is None:
            raise LabInputError("uniform-ball needs a radius")
        return uniform_ball_profile(radius)
    if preset == MeasurePresetEnum.ANNULUS:
        if inner is None or outer is None:
            raise LabInputError("annulus needs inner and outer radii")
        return annulus_profile(inner, outer)
    if preset == MeasurePresetEnum.RADIAL_PROFILE:
        if sigma is None or radius is None:
            raise LabInputError("radial-profile needs sigma and a truncation radius")
        return gaussian_profile(sigma, radius)
    if table is None:
        raise LabInputError("table preset needs a density table file")
    return table_profile_from_file(table)


############################
######## GRID MEASURE ######
############################

@dataclass(frozen=True)
class GridMeasure:
    """Cell-average density on the polar cells [r_i, r_i+1] x [theta_j, theta_j+1]."""

    model: ManifoldModel
    r_edges: np.ndarray
    theta_edges: np.ndarray
    areas: np.ndarray
    density: np.ndarray
    profile: Optional[RadialProfile] = None

    def __post_init__(self):
        if self.density.shape != self.areas.shape:
            raise LabInputError(f"Density shape {self.density.shape} does not match the grid {self.areas.shape}")
        if not np.all(np.isfinite(self.density)) or np.any(self.density < 0.0):
            raise LabInputError("Grid density must be finite and nonnegative")
        total = float(np.sum(self.density * self.areas))
        if abs(total - 1.0) > 1e-10:
            raise LabInputError(f"Grid measure has total mass {total}, expected 1")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.areas.shape

    @property
    def masses(self) -> np.ndarray:
        return self.density * self.areas

    @property
    def radial_masses(self) -> np.ndarray:
        return self.masses.sum(axis=1)

    @property
    def centers(self) -> np.ndarray:
        """Cell centers: area-centroid radius and mid angle, shape (n_r, n_theta, 2)."""
        f = self.model.warp.f
        a, b = self.r_edges[:-1], self.r_edges[1:]
        radius = gauss_legendre(a, b, lambda s: s * f(s)) / gauss_legendre(a, b, f)
        angle = 0.5 * (self.theta_edges[:-1] + self.theta_edges[1:])
        return np.stack([radius[:, None] * np.cos(angle)[None, :], radius[:, None] * np.sin(angle)[None, :]], axis=-1)

    def is_rotationally_symmetric(self) -> bool:
        if self.profile is not None:
            return True
        return bool(np.allclose(self.density, self.density[:, :1], rtol=1e-12, atol=0.0))

    def to_particles(self) -> "ParticleMeasure":
        masses = self.masses.ravel()
        keep = masses > 0.0
        return ParticleMeasure(points=self.centers.reshape(-1, 2)[keep], weights=masses[keep] / masses[keep].sum())

    def __repr__(self):
        label = self.profile.name if self.profile is not None else "custom"
        return f"<GridMeasure({label}, grid={self.shape[0]}x{self.shape[1]}, model={self.model.kind.value})>"


def _polar_areas(model: ManifoldModel, r_edges: np.ndarray, theta_edges: np.ndarray) -> np.ndarray:
    radial = gauss_legendre(r_edges[:-1], r_edges[1:], model.warp.f)
    return radial[:, None] * np.diff(theta_edges)[None, :]


def grid_from_profile(model: ManifoldModel, profile: RadialProfile, n_r: int = DEFAULT_RADIAL_CELLS,
                      n_theta: int = DEFAULT_ANGULAR_CELLS) -> GridMeasure:
    """
    Discretise a radial profile on a grid aligned with its support.

    Cell masses are exact integrals of rho f, so uniform profiles give exactly
    constant densities.
    """
    if n_r < 1 or n_theta < 1:
        raise LabInputError(f"Grid resolution must be positive, got {n_r}x{n_theta}")
    check_in_chart(model, np.array([profile.r_max, 0.0]))
    r_edges = np.linspace(profile.r_min, profile.r_max, n_r + 1)
    theta_edges = np.linspace(0.0, 2.0 * math.pi, n_theta + 1)
    areas = _polar_areas(model, r_edges, theta_edges)
    radial_mass = profile.radial_mass(model, r_edges[:-1], r_edges[1:])
    total = float(radial_mass.sum())
    if not total > 0.0:
        raise LabInputError(f"Profile {profile.name} has no mass on [{profile.r_min}, {profile.r_max}]")
    masses = (radial_mass / total)[:, None] * (np.diff(theta_edges) / (2.0 * math.pi))[None, :]
    return GridMeasure(model=model, r_edges=r_edges, theta_edges=theta_edges, areas=areas,
                       density=masses / areas, profile=profile)


def grid_from_function(model: ManifoldModel, density: Callable[[np.ndarray], np.ndarray], r_range: Tuple[float, float],
                       n_r: int = DEFAULT_RADIAL_CELLS, n_theta: int = DEFAULT_ANGULAR_CELLS) -> GridMeasure:
    """Midpoint-rule discretisation of an arbitrary density given on chart points (normalised here)."""
    lo, hi = r_range
    check_in_chart(model, np.array([hi, 0.0]))
    r_edges = np.linspace(lo, hi, n_r + 1)
    theta_edges = np.linspace(0.0, 2.0 * math.pi, n_theta + 1)
    areas = _polar_areas(model, r_edges, theta_edges)
    mid_r = 0.5 * (r_edges[:-1] + r_edges[1:])
    mid_t = 0.5 * (theta_edges[:-1] + theta_edges[1:])
    points = np.stack([mid_r[:, None] * np.cos(mid_t)[None, :], mid_r[:, None] * np.sin(mid_t)[None, :]], axis=-1)
    values = np.asarray(density(points), dtype=float)
    if np.any(values < 0.0) or not np.all(np.isfinite(values)):
        raise LabInputError("Density function must be finite and nonnegative on the grid")
    total = float(np.sum(values * areas))
    if not total > 0.0:
        raise LabInputError("Density function has no mass on the grid")
    return GridMeasure(model=model, r_edges=r_edges, theta_edges=theta_edges, areas=areas, density=values / total)


############################
###### PARTICLE MEASURE ####
############################

@dataclass(frozen=True)
class ParticleMeasure:
    points: np.ndarray
    weights: np.ndarray
    triangles: Optional[np.ndarray] = None
    triangle_weights: Optional[np.ndarray] = None

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if points.shape[-1] != 2 or points.shape[0] != weights.shape[0]:
            raise LabInputError(f"Particle points {points.shape} and weights {weights.shape} do not match")
        if np.any(weights < 0.0):
            raise LabInputError("Particle weights must be nonnegative")
        total = float(weights.sum())
        if abs(total - 1.0) > 1e-9:
            raise LabInputError(f"Particle weights sum to {total}, expected 1")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights / total)
        if (self.triangles is None) != (self.triangle_weights is None):
            raise LabInputError("Triangles and triangle weights come together")

    def __len__(self):
        return self.points.shape[0]

    @property
    def has_mesh(self) -> bool:
        return self.triangles is not None

    def moved(self, points: np.ndarray) -> "ParticleMeasure":
        """Same weights and mesh on new vertex positions."""
        return replace(self, points=np.asarray(points, dtype=float))

    def __repr__(self):
        mesh = f", triangles={len(self.triangles)}" if self.has_mesh else ""
        return f"<ParticleMeasure(points={len(self)}{mesh})>"


def dirac(point) -> ParticleMeasure:
    return ParticleMeasure(points=np.asarray(point, dtype=float)[None], weights=np.ones(1))


def triangle_areas(model: ManifoldModel, points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Riemannian triangle areas: chart area times the volume density at the centroid."""
    a, b, c = points[triangles[:, 0]], points[triangles[:, 1]], points[triangles[:, 2]]
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    density = np.sqrt(np.linalg.det(metric_tensor(model, (a + b + c) / 3.0)))
    return 0.5 * cross * density


def hex_lattice(radius: float, spacing: float) -> np.ndarray:
    """Triangular lattice points of the given spacing inside the closed disc of the given radius."""
    if spacing <= 0.0 or radius <= 0.0:
        raise LabInputError(f"Lattice needs positive radius and spacing, got {radius}, {spacing}")
    rows = int(math.ceil(radius / (spacing * math.sqrt(3.0) / 2.0)))
    cols = int(math.ceil(radius / spacing)) + 1
    j, i = np.meshgrid(np.arange(-rows, rows + 1), np.arange(-cols, cols + 1), indexing="ij")
    x = spacing * (i + 0.5 * (j % 2))
    y = spacing * (math.sqrt(3.0) / 2.0) * j
    points = np.stack([x.ravel(), y.ravel()], axis=-1)
    return points[np.hypot(points[:, 0], points[:, 1]) <= radius * (1.0 + 1e-12)]


def uniform_ball_lattice(model: ManifoldModel, center, radius: float, spacing: float,
                         frame: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> ParticleMeasure:
    """
    Uniform measure on (a polygonal approximation of) the geodesic ball B_radius(center).

    A triangular lattice in g-orthonormal tangent coordinates at the center is
    mapped by exp; the Delaunay triangulation of the tangent lattice carries
    the mass, each triangle weighted by its Riemannian area. Vertex weights are
    equal, so optimal plans between two such lattices are permutations.
    """
    center = check_in_chart(model, center)
    if frame is None:
        frame = orthonormal_frame(model, center, np.array([1.0, 0.0]))
    e1, e2 = frame
    tangent = hex_lattice(radius, spacing)
    triangles = Delaunay(tangent).simplices
    # orient counter-clockwise in tangent coordinates
    a, b, c = tangent[triangles[:, 0]], tangent[triangles[:, 1]], tangent[triangles[:, 2]]
    signed = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    triangles[signed < 0.0] = triangles[signed < 0.0][:, [0, 2, 1]]
    # collinear boundary points can leave slivers
    triangles = triangles[np.abs(signed) > 1e-9 * spacing * spacing]
    vectors = tangent[:, :1] * e1 + tangent[:, 1:] * e2
    points = exp_maps(model, np.broadcast_to(center, vectors.shape), vectors)
    areas = triangle_areas(model, points, triangles)
    weights = np.full(points.shape[0], 1.0 / points.shape[0])
    logger.debug(f"Lattice on ball r={radius} with {points.shape[0]} points, {triangles.shape[0]} triangles")
    return ParticleMeasure(points=points, weights=weights, triangles=triangles, triangle_weights=areas / areas.sum())
