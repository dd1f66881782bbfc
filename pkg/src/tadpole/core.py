"""Graph geometry, sampled functions, inner products and vertex-condition residuals.

The tadpole graph consists of the half-line ``R1 = [0, +inf)`` (truncated at ``x_max``) and
the loop ``R2 = [0, L]`` whose both ends are glued to the origin of ``R1``.

>>> params = GraphParams.from_resolution(2.0, 0.0, n2=4, x_factor=4.0)
>>> params.n1, params.n2
(16, 4)
"""

import csv
import functools
import math
import typing as t
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import newton_cotes

from tadpole.errors import ParameterError, ShapeError

__all__ = [
    "Edge",
    "GraphParams",
    "GraphFunction",
    "VertexResidual",
    "simpson_weights",
    "inner_product",
    "norm",
    "vertex_residuals",
]

Edge = t.Literal["r1", "r2"]

_GRID_TOL = 1e-9


@dataclass(frozen=True)
class GraphParams:
    """Problem instance: loop length, damping and sampling grids.

    :param L: circumference of the loop ``R2``
    :param alpha: damping constant at the vertex
    :param x_max: truncation length of ``R1`` used for sampling and quadrature
    :param h1: grid step on ``R1``
    :param h2: grid step on ``R2``
    """

    L: float
    alpha: float
    x_max: float
    h1: float
    h2: float
    n1: int = field(init=False, repr=False)
    n2: int = field(init=False, repr=False)

    def __post_init__(self):
        if not self.L > 0:
            raise ParameterError(f"Loop length must be positive, got L={self.L}")
        if not self.alpha >= 0:
            raise ParameterError(f"Damping must be nonnegative, got alpha={self.alpha}")
        if not (self.h1 > 0 and self.h2 > 0):
            raise ParameterError(f"Grid steps must be positive, got h1={self.h1}, h2={self.h2}")
        if self.x_max < 4 * self.L * (1 - _GRID_TOL):
            raise ParameterError(f"x_max={self.x_max} is shorter than 4L={4 * self.L}")
        object.__setattr__(self, "n1", _intervals(self.x_max, self.h1, "x_max", "h1"))
        object.__setattr__(self, "n2", _intervals(self.L, self.h2, "L", "h2"))

    @classmethod
    def from_resolution(
        cls, L: float, alpha: float, /, n2: int = 400, x_factor: float = 16.0, h1: t.Optional[float] = None
    ) -> "GraphParams":
        """Build parameters with ``h2 = L / n2`` and ``x_max = x_factor * L``.

        ``h1`` defaults to ``h2``; ``x_max`` is rounded up to an even number of ``h1`` steps.
        """
        h2 = L / n2
        h1 = h2 if h1 is None else h1
        steps = math.ceil(x_factor * L / h1 - _GRID_TOL)
        steps += steps % 2
        return cls(L=L, alpha=alpha, x_max=steps * h1, h1=h1, h2=h2)

    def replace(self, **changes) -> "GraphParams":
        values = {"L": self.L, "alpha": self.alpha, "x_max": self.x_max, "h1": self.h1, "h2": self.h2}
        values.update(changes)
        return GraphParams(**values)

    def refined(self, factor: int = 2) -> "GraphParams":
        """Same instance with both grid steps divided by ``factor``."""
        return self.replace(h1=self.h1 / factor, h2=self.h2 / factor)

    @property
    def r1_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.n1 * self.h1, self.n1 + 1)

    @property
    def r2_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.n2 + 1)

    def as_dict(self) -> t.Dict[str, float]:
        return {"L": self.L, "alpha": self.alpha, "x_max": self.x_max, "h1": self.h1, "h2": self.h2}


def _intervals(length: float, step: float, length_name: str, step_name: str) -> int:
    n = int(round(length / step))
    if n < 2 or abs(n * step - length) > _GRID_TOL * length:
        raise ParameterError(f"{step_name}={step} does not divide {length_name}={length}")
    if n % 2:
        raise ParameterError(f"{length_name}/{step_name} = {n} must be even (odd sample count required)")
    return n


@dataclass(frozen=True)
class VertexResidual:
    """Residuals of the continuity and Kirchhoff conditions at the vertex."""

    continuity_01: complex
    continuity_0L: complex
    kirchhoff: complex

    def max_abs(self) -> float:
        return max(abs(self.continuity_01), abs(self.continuity_0L), abs(self.kirchhoff))


@dataclass(frozen=True, eq=False)
class GraphFunction:
    """Complex samples of a function on both edges.

    >>> f = GraphFunction([1, 2, 3], [4, 5, 6])
    >>> (2 * f).r2_values.tolist()
    [(8+0j), (10+0j), (12+0j)]
    """

    r1_values: np.ndarray
    r2_values: np.ndarray

    # numpy scalars defer to __rmul__
    __array_ufunc__ = None

    def __post_init__(self):
        for name in ("r1_values", "r2_values"):
            values = np.array(getattr(self, name), dtype=complex)
            if values.ndim != 1:
                raise ShapeError(f"{name} must be one-dimensional, got shape {values.shape}")
            values.setflags(write=False)
            object.__setattr__(self, name, values)

    @classmethod
    def zeros(cls, params: GraphParams, /) -> "GraphFunction":
        return cls(np.zeros(params.n1 + 1), np.zeros(params.n2 + 1))

    @classmethod
    def sample(
        cls,
        params: GraphParams,
        /,
        r1: t.Optional[t.Callable[[np.ndarray], np.ndarray]] = None,
        r2: t.Optional[t.Callable[[np.ndarray], np.ndarray]] = None,
    ) -> "GraphFunction":
        """Sample callables on the grids; a missing edge is filled with zeros."""
        x1, x2 = params.r1_grid, params.r2_grid
        v1 = np.zeros_like(x1, dtype=complex) if r1 is None else np.broadcast_to(r1(x1), x1.shape)
        v2 = np.zeros_like(x2, dtype=complex) if r2 is None else np.broadcast_to(r2(x2), x2.shape)
        return cls(v1, v2)

    def check(self, params: GraphParams, /) -> "GraphFunction":
        if self.r1_values.size != params.n1 + 1 or self.r2_values.size != params.n2 + 1:
            raise ShapeError(
                f"Samples ({self.r1_values.size}, {self.r2_values.size}) do not match grids "
                f"({params.n1 + 1}, {params.n2 + 1})"
            )
        return self

    def _same_shape(self, other: "GraphFunction") -> None:
        if self.r1_values.shape != other.r1_values.shape or self.r2_values.shape != other.r2_values.shape:
            raise ShapeError("Graph functions are sampled on different grids")

    def __add__(self, other: "GraphFunction") -> "GraphFunction":
        self._same_shape(other)
        return GraphFunction(self.r1_values + other.r1_values, self.r2_values + other.r2_values)

    def __sub__(self, other: "GraphFunction") -> "GraphFunction":
        self._same_shape(other)
        return GraphFunction(self.r1_values - other.r1_values, self.r2_values - other.r2_values)

    def __mul__(self, scalar: complex) -> "GraphFunction":
        return GraphFunction(scalar * self.r1_values, scalar * self.r2_values)

    __rmul__ = __mul__

    def __neg__(self) -> "GraphFunction":
        return -1 * self

    def to_csv(self, path: t.Union[str, Path], params: GraphParams, /, header: t.Optional[str] = None) -> None:
        """Write ``edge,x,re,im`` rows with 17 significant digits."""
        self.check(params)
        with open(path, "w", newline="") as f:
            if header:
                f.write(f"# {header}\n")
            writer = csv.writer(f)
            writer.writerow(["edge", "x", "re", "im"])
            for edge, grid, values in (("r1", params.r1_grid, self.r1_values), ("r2", params.r2_grid, self.r2_values)):
                for x, v in zip(grid, values):
                    writer.writerow([edge, f"{x:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])

    @classmethod
    def from_csv(cls, path: t.Union[str, Path], /) -> "GraphFunction":
        values: t.Dict[str, t.List[complex]] = {"r1": [], "r2": []}
        with open(path, newline="") as f:
            rows = csv.DictReader(line for line in f if not line.startswith("#"))
            for row in rows:
                if row["edge"] not in values:
                    raise ShapeError(f"Unknown edge tag {row['edge']!r}")
                values[row["edge"]].append(complex(float(row["re"]), float(row["im"])))
        return cls(np.array(values["r1"]), np.array(values["r2"]))


@functools.lru_cache(maxsize=32)
def simpson_weights(intervals: int, step: float, /) -> np.ndarray:
    """Composite Simpson weights on ``intervals + 1`` equispaced nodes.

    >>> simpson_weights(2, 1.0).tolist()
    [0.3333333333333333, 1.3333333333333333, 0.3333333333333333]
    """
    if intervals < 2 or intervals % 2:
        raise ShapeError(f"Simpson rule needs an even number of intervals, got {intervals}")
    panel, _ = newton_cotes(2, 1)
    weights = np.zeros(intervals + 1)
    weights[:-2:2] += panel[0] * step
    weights[1::2] += panel[1] * step
    weights[2::2] += panel[2] * step
    weights.setflags(write=False)
    return weights


def inner_product(f: GraphFunction, g: GraphFunction, params: GraphParams, /) -> complex:
    """``(f, g)_H``, conjugate-linear in the second argument."""
    f.check(params)
    g.check(params)
    w1 = simpson_weights(params.n1, params.h1)
    w2 = simpson_weights(params.n2, params.h2)
    return complex(
        np.sum(w1 * f.r1_values * np.conj(g.r1_values)) + np.sum(w2 * f.r2_values * np.conj(g.r2_values))
    )


def norm(f: GraphFunction, params: GraphParams, /) -> float:
    return math.sqrt(max(inner_product(f, f, params).real, 0.0))


def _forward_derivative(values: np.ndarray, step: float) -> complex:
    return (-3 * values[0] + 4 * values[1] - values[2]) / (2 * step)


def _backward_derivative(values: np.ndarray, step: float) -> complex:
    return (3 * values[-1] - 4 * values[-2] + values[-3]) / (2 * step)


def vertex_residuals(u: GraphFunction, params: GraphParams, /) -> VertexResidual:
    """Continuity and Kirchhoff residuals with second-order one-sided derivatives.

    >>> params = GraphParams.from_resolution(2.0, 1.0, n2=4, x_factor=4.0)
    >>> one = GraphFunction.sample(params, lambda x: 1 + 0 * x, lambda x: 1 + 0 * x)
    >>> vertex_residuals(one, params).kirchhoff
    -1j
    """
    u.check(params)
    u1, u2 = u.r1_values, u.r2_values
    if u1.size < 3 or u2.size < 3:
        raise ShapeError("Vertex residuals need at least 3 samples per edge")
    flux = (
        _forward_derivative(u1, params.h1) + _forward_derivative(u2, params.h2) - _backward_derivative(u2, params.h2)
    )
    return VertexResidual(
        continuity_01=complex(u1[0] - u2[0]),
        continuity_0L=complex(u2[0] - u2[-1]),
        kirchhoff=complex(flux - 1j * params.alpha * u1[0]),
    )
