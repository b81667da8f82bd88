"""
Comparison scalars for a Ricci lower bound k in dimension n.

S(r; k) = sin(r sqrt(k/(n-1))) / (r sqrt(k/(n-1)))    k > 0
        = 1                                          k = 0
        = sinh(r sqrt(-k/(n-1))) / (r sqrt(-k/(n-1))) k < 0

k is a Ricci lower bound, so the constant-curvature-kappa model in dimension
2 is S(.; kappa, 2).
"""

import math
from dataclasses import dataclass
from typing import Iterable, List, Tuple, Union

import numpy as np

from app.lab.errors import DomainError, LabInputError

ArrayLike = Union[float, np.ndarray]

SERIES_SWITCH = 1e-4


def _check_dimension(n: int) -> None:
    if int(n) != n or n < 2:
        raise LabInputError(f"Dimension n must be an integer >= 2, got {n}")


def k_guard(r: float, n: int) -> float:
    """Supremum of admissible k at radius r: r sqrt(k/(n-1)) must stay below pi."""
    _check_dimension(n)
    if r <= 0.0:
        return math.inf
    return (n - 1) * (math.pi / r) ** 2


@dataclass(frozen=True)
class ComparisonParams:
    r: float
    t: float
    k: float
    n: int = 2

    def __post_init__(self):
        _check_dimension(self.n)
        if self.r < 0.0:
            raise DomainError(f"r must be nonnegative, got {self.r}")
        if not 0.0 <= self.t <= 1.0:
            raise DomainError(f"t must lie in [0, 1], got {self.t}")
        if self.k > 0.0 and self.r * math.sqrt(self.k / (self.n - 1)) >= math.pi:
            raise DomainError(f"r sqrt(k/(n-1)) must be < pi for k > 0 (r={self.r}, k={self.k}, n={self.n})")


def comparison_S(r: ArrayLike, k: ArrayLike, n: int) -> ArrayLike:
    """
    Evaluate S(r; k) elementwise.

    Args:
        r: nonnegative radius (scalar or array)
        k: Ricci lower bound (scalar or array, any sign)
        n: dimension, n >= 2

    Returns:
        S(r; k), a float for scalar input

    Raises:
        DomainError: if r < 0, or k > 0 and r sqrt(k/(n-1)) >= pi
    """
    _check_dimension(n)
    scalar = np.ndim(r) == 0 and np.ndim(k) == 0
    r, k = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(k, dtype=float))
    if np.any(r < 0.0):
        raise DomainError(f"r must be nonnegative, got {float(np.min(r))}")
    x = r * np.sqrt(np.abs(k) / (n - 1))
    positive = k > 0.0
    if np.any(positive & (x >= math.pi)):
        bad = float(np.max(np.where(positive, x, 0.0)))
        raise DomainError(f"Positive-curvature guard violated: r sqrt(k/(n-1)) = {bad:.6g} >= pi")

    small = x < SERIES_SWITCH
    safe = np.where(small, 1.0, x)
    x2 = x * x
    sign = np.sign(k)
    series = 1.0 - sign * x2 / 6.0 + x2 * x2 / 120.0
    exact = np.where(positive, np.sin(safe) / safe, np.sinh(safe) / safe)
    value = np.where(small, series, exact)
    return float(value) if scalar else value


def rs_gap(t: ArrayLike, r: ArrayLike, k: ArrayLike, n: int) -> ArrayLike:
    """
    (1-t) log S((1-t)r; k) + t log S(tr; k) - log S(r; k) - t(1-t)/2 * k/(n-1) * r^2.

    The scalar inequality behind entropy convexity claims this is >= 0.
    """
    t = np.asarray(t, dtype=float)
    if np.any((t < 0.0) | (t > 1.0)):
        raise DomainError(f"t must lie in [0, 1], got {t}")
    r = np.asarray(r, dtype=float)
    k = np.asarray(k, dtype=float)
    gap = ((1.0 - t) * np.log(comparison_S((1.0 - t) * r, k, n))
           + t * np.log(comparison_S(t * r, k, n))
           - np.log(comparison_S(r, k, n))
           - 0.5 * t * (1.0 - t) * k / (n - 1) * r * r)
    return float(gap) if np.ndim(gap) == 0 else gap


def distortion_lower_bound(t: ArrayLike, L: ArrayLike, k: ArrayLike, n: int) -> ArrayLike:
    """(S(tL; k) / S(L; k))^(n-1), the lower bound on v_t(x, y) for rho(x, y) = L."""
    t = np.asarray(t, dtype=float)
    if np.any((t <= 0.0) | (t > 1.0)):
        raise DomainError(f"t must lie in (0, 1], got {t}")
    if np.any(np.asarray(L) < 0.0):
        raise DomainError(f"L must be nonnegative, got {L}")
    bound = (comparison_S(t * np.asarray(L, dtype=float), k, n) / comparison_S(L, k, n)) ** (n - 1)
    return float(bound) if np.ndim(bound) == 0 else bound


def rs_gap_grid(t_grid: Iterable[float], r_grid: Iterable[float], n_values: Iterable[int],
                k_min: float = -10.0, k_points: int = 41,
                guard_fraction: float = 0.99) -> List[Tuple[float, float, float, int, float]]:
    """
    Rows (t, r, k, n, rs_gap) over a product grid.

    For each (r, n) the k axis runs from k_min up to guard_fraction of the
    positive-curvature guard (capped at 10 for small r), always including k = 0.
    """
    rows = []
    for n in n_values:
        for r in r_grid:
            k_max = min(10.0, guard_fraction * k_guard(r, n))
            ks = np.unique(np.concatenate([np.linspace(k_min, k_max, k_points), [0.0]]))
            for k in ks:
                for t in t_grid:
                    rows.append((float(t), float(r), float(k), int(n), rs_gap(t, r, k, n)))
    return rows
