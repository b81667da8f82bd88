"""
Warp functions f(r) for metrics dr^2 + f(r)^2 dtheta^2.

Two sources are supported:
1. Expressions from a small grammar (numbers, r, + - * / ** ^, parentheses and
   the functions sin, sinh, cos, cosh, exp) differentiated exactly with sympy.
2. Two-column tables (r, f(r)) interpolated by a cubic spline clamped to
   f'(0) = 1; derivatives come from the spline.

Curvature needs f'', and the pole limit of -f''/f needs f'''(0), so every warp
exposes f, f', f'' as vectorised callables plus the scalar f'''(0).
"""

import re
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Callable, Dict, Union

import numpy as np
import sympy as sp
from scipy.interpolate import CubicSpline

from app.lab.errors import DomainError, LabInputError, WarpExpressionError

logger = logging.getLogger(__name__)

R_SYMBOL = sp.Symbol("r", real=True, nonnegative=True)

ALLOWED_FUNCTIONS = {
    "sin": sp.sin,
    "sinh": sp.sinh,
    "cos": sp.cos,
    "cosh": sp.cosh,
    "exp": sp.exp,
}
ALLOWED_CONSTANTS = {"pi": sp.pi, "E": sp.E}

_TOKEN_PATTERN = re.compile(
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<operator>\*\*|[-+*/^()])"
    r"|(?P<space>\s+)"
)

ArrayLike = Union[float, np.ndarray]


def parse_expression(expression: str, symbols: Dict[str, sp.Symbol]) -> sp.Expr:
    """
    Parse an expression of the built-in grammar over the given variables.

    Raises:
        WarpExpressionError: on characters, names or syntax outside the grammar
    """
    if not expression or not expression.strip():
        raise WarpExpressionError("Expression is empty", expression or "")

    position = 0
    depth = 0
    while position < len(expression):
        match = _TOKEN_PATTERN.match(expression, position)
        if match is None:
            raise WarpExpressionError("Unexpected character", expression, position)
        name = match.group("name")
        if name is not None and name not in symbols and name not in ALLOWED_FUNCTIONS and name not in ALLOWED_CONSTANTS:
            raise WarpExpressionError(f"Unknown name '{name}'", expression, position)
        operator = match.group("operator")
        if operator == "(":
            depth += 1
        elif operator == ")":
            depth -= 1
            if depth < 0:
                raise WarpExpressionError("Unbalanced ')'", expression, position)
        position = match.end()
    if depth != 0:
        raise WarpExpressionError("Unbalanced '('", expression, len(expression))

    local_names = {**symbols, **ALLOWED_FUNCTIONS, **ALLOWED_CONSTANTS}
    try:
        expr = sp.sympify(expression.replace("^", "**"), locals=local_names)
    except (sp.SympifyError, SyntaxError, TypeError) as e:
        raise WarpExpressionError(f"Malformed expression ({e.__class__.__name__})", expression) from e

    variables = ", ".join(sorted(symbols))
    if not isinstance(expr, sp.Expr):
        raise WarpExpressionError(f"Expression does not define a function of {variables}", expression)
    if expr.free_symbols - set(symbols.values()):
        raise WarpExpressionError(f"Expression uses symbols other than {variables}", expression)
    return expr


def parse_warp_expression(expression: str) -> sp.Expr:
    """Parse a warp expression in the variable r."""
    return parse_expression(expression, {"r": R_SYMBOL})


def _as_array_function(expr: sp.Expr) -> Callable[[ArrayLike], np.ndarray]:
    fn = sp.lambdify(R_SYMBOL, expr, "numpy")

    def evaluate(r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        # constant derivatives come back as python scalars
        return np.asarray(fn(r), dtype=float) + np.zeros_like(r)

    return evaluate


class Warp(ABC):
    """A warp function with f(0) = 0 and f'(0) = 1."""

    label: str

    @abstractmethod
    def f(self, r: ArrayLike) -> np.ndarray:
        ...

    @abstractmethod
    def df(self, r: ArrayLike) -> np.ndarray:
        ...

    @abstractmethod
    def d2f(self, r: ArrayLike) -> np.ndarray:
        ...

    @property
    @abstractmethod
    def d3f0(self) -> float:
        """f'''(0), the pole limit of f''(r)/r."""

    def gauss_curvature(self, r: ArrayLike, pole_threshold: float = 1e-3) -> np.ndarray:
        """-f''(r)/f(r), switching to the series limit -f'''(0) near the pole."""
        r = np.asarray(r, dtype=float)
        near_pole = r < pole_threshold
        safe_r = np.where(near_pole, pole_threshold, r)
        curvature = -self.d2f(safe_r) / self.f(safe_r)
        return np.where(near_pole, -self.d3f0, curvature)

    def validate(self, r_max: float) -> None:
        """
        Check f(0) = 0, f'(0) = 1 and f > 0 on (0, r_max].

        Raises:
            LabInputError: if any of the conditions fails
        """
        f0 = float(self.f(0.0))
        df0 = float(self.df(0.0))
        if abs(f0) > 1e-9:
            raise LabInputError(f"Warp {self.label} must vanish at r=0, got f(0)={f0}")
        if abs(df0 - 1.0) > 1e-9:
            raise LabInputError(f"Warp {self.label} must have f'(0)=1, got f'(0)={df0}")
        samples = np.linspace(r_max / 2000.0, r_max, 2000)
        values = self.f(samples)
        if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
            bad = samples[~(np.isfinite(values) & (values > 0.0))][0]
            raise LabInputError(f"Warp {self.label} must be positive on (0, {r_max}], fails at r={bad:.6g}")


class ExpressionWarp(Warp):
    """Warp given by a symbolic expression; derivatives are exact."""

    def __init__(self, expression: str):
        self.expression = expression
        self.label = expression
        self._expr = parse_warp_expression(expression)
        first = sp.diff(self._expr, R_SYMBOL)
        second = sp.diff(first, R_SYMBOL)
        third = sp.diff(second, R_SYMBOL)
        self._f = _as_array_function(self._expr)
        self._df = _as_array_function(first)
        self._d2f = _as_array_function(second)
        self._d3f0 = float(third.subs(R_SYMBOL, 0))

    def f(self, r: ArrayLike) -> np.ndarray:
        return self._f(r)

    def df(self, r: ArrayLike) -> np.ndarray:
        return self._df(r)

    def d2f(self, r: ArrayLike) -> np.ndarray:
        return self._d2f(r)

    @property
    def d3f0(self) -> float:
        return self._d3f0

    def __repr__(self):
        return f"<ExpressionWarp(f(r)={self.expression})>"


class SplineWarp(Warp):
    """Warp interpolated from an (r, f) table by a cubic spline clamped to f'(0)=1."""

    def __init__(self, r: np.ndarray, values: np.ndarray, label: str = "table"):
        r = np.asarray(r, dtype=float)
        values = np.asarray(values, dtype=float)
        if r.ndim != 1 or r.shape != values.shape or r.size < 4:
            raise LabInputError("Warp table needs at least 4 rows of (r, f(r))")
        if r[0] != 0.0:
            raise LabInputError(f"Warp table must start at r=0, starts at r={r[0]}")
        if np.any(np.diff(r) <= 0.0):
            raise LabInputError("Warp table radii must be strictly increasing")
        self.label = label
        self.r_limit = float(r[-1])
        self._spline = CubicSpline(r, values, bc_type=((1, 1.0), "not-a-knot"))
        self._first = self._spline.derivative(1)
        self._second = self._spline.derivative(2)
        self._d3f0 = float(self._spline.derivative(3)(0.0))

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SplineWarp":
        path = Path(path)
        if not path.exists():
            raise LabInputError(f"Warp table file not found: {path}")
        try:
            table = np.loadtxt(path, ndmin=2)
        except ValueError as e:
            raise LabInputError(f"Warp table {path} does not parse as two numeric columns: {e}") from e
        if table.shape[1] != 2:
            raise LabInputError(f"Warp table {path} must have exactly two columns, found {table.shape[1]}")
        return cls(table[:, 0], table[:, 1], label=path.name)

    def _check_range(self, r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(r > self.r_limit * (1.0 + 1e-12)):
            raise DomainError(f"Radius {float(np.max(r)):.6g} beyond the warp table (r <= {self.r_limit})")
        return r

    def f(self, r: ArrayLike) -> np.ndarray:
        return self._spline(self._check_range(r))

    def df(self, r: ArrayLike) -> np.ndarray:
        return self._first(self._check_range(r))

    def d2f(self, r: ArrayLike) -> np.ndarray:
        return self._second(self._check_range(r))

    @property
    def d3f0(self) -> float:
        return self._d3f0

    def __repr__(self):
        return f"<SplineWarp(label={self.label}, r_limit={self.r_limit})>"
