"""Resolvent kernel of ``H - z^2``, its spectral decomposition and its action on sampled data.

With ``omega = -i z`` (``Re omega > 0`` for ``Im z > 0``) and ``E = exp(-omega L)`` the kernel on the loop is
written with decaying exponentials only::

    K = e^{-omega |x-y|} / (2 omega) + K_d + K_s
    K_d = (e^{-omega(L-y)} - e^{-omega y})(e^{-omega x} - e^{-omega(L-x)}) / (4 omega (1 - E))
    K_s = -(e^{-omega y} + e^{-omega(L-y)})(e^{-omega x} + e^{-omega(L-x)}) / (4 omega (E - omega_c))

``K_d`` carries the poles ``E = 1`` (embedded eigenvalues) and ``K_s`` the poles ``E = omega_c`` (branch roots).
"""

import cmath
import logging
import math
import typing as t
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import simpson

from tadpole.core import Edge, GraphFunction, GraphParams
from tadpole.errors import ParameterError, PoleProximityError, SingularityError, TailTooLargeError
from tadpole.secular import eval_coefficients
from tadpole.utils import Header, halton, write_csv

__all__ = [
    "GraphPoint",
    "KernelParts",
    "DecompositionReport",
    "KERNEL_COLUMNS",
    "DECOMPOSITION_POLE_TOL",
    "kernel_direct",
    "kernel_printed_split",
    "kernel_derived_split",
    "kernel_decomposed",
    "check_printed_split",
    "apply_resolvent",
    "kernel_slice",
    "write_kernel_csv",
]

DECOMPOSITION_POLE_TOL = 1e-8
TAIL_TOL = 1e-10
KERNEL_COLUMNS = [
    "edge_x",
    "x",
    "edge_y",
    "y",
    "re_z",
    "im_z",
    "re_K",
    "im_K",
    "re_Kc",
    "im_Kc",
    "re_Kpp_plus",
    "im_Kpp_plus",
    "re_Kpp_minus",
    "im_Kpp_minus",
]

logger = logging.getLogger(__name__)


class GraphPoint(t.NamedTuple):
    """A position ``x`` on edge ``edge``."""

    edge: Edge
    x: float


@dataclass(frozen=True)
class KernelParts:
    x: GraphPoint
    y: GraphPoint
    z: complex
    total: complex
    k_c: complex
    k_pp_plus: complex
    k_pp_minus: complex
    split: t.Literal["printed", "derived", "off_loop"] = "derived"

    def sum_defect(self) -> float:
        return abs(self.total - (self.k_c + self.k_pp_plus + self.k_pp_minus))

    def defect_scale(self) -> float:
        """``1 + |K| + |K_c| + |K_pp_plus| + |K_pp_minus|``.

        ``K_pp_plus`` grows like ``e^{Im z (x + y)}`` on the loop and ``K_c`` cancels it, so rounding in
        the sum is proportional to the largest part rather than to ``|K|``.
        """
        return 1 + abs(self.total) + abs(self.k_c) + abs(self.k_pp_plus) + abs(self.k_pp_minus)

    def relative_defect(self) -> float:
        return self.sum_defect() / self.defect_scale()

    def growth(self) -> float:
        """``e^{Im z (x + y)}``, the size of the cancelling parts relative to ``|K|``."""
        return math.exp(self.z.imag * (self.x.x + self.y.x))

    def csv_row(self) -> t.List[t.Any]:
        row: t.List[t.Any] = [self.x.edge, float(self.x.x), self.y.edge, float(self.y.x), self.z.real, self.z.imag]
        for value in (self.total, self.k_c, self.k_pp_plus, self.k_pp_minus):
            row += [value.real, value.imag]
        return row


@dataclass(frozen=True)
class DecompositionReport:
    """Outcome of testing the typeset split against the direct kernel."""

    path: t.Literal["printed", "derived"]
    probes: int
    failures: int
    max_defect: float
    worst_probe: t.Optional[t.Tuple[float, float, complex]] = None
    notes: t.List[str] = field(default_factory=list)


def _omega(z: complex) -> complex:
    z = complex(z)
    if z == 0:
        raise SingularityError("The resolvent kernel is singular at z = 0")
    return -1j * z


def _check_upper(z: complex) -> None:
    if not complex(z).imag > 0:
        raise ParameterError(f"The resolvent kernel needs Im z > 0, got z = {z}")


def _check_point(p: GraphPoint, params: GraphParams) -> None:
    if p.edge == "r1":
        if p.x < 0:
            raise ParameterError(f"Negative coordinate {p.x} on R1")
    elif p.edge == "r2":
        if not 0 <= p.x <= params.L:
            raise ParameterError(f"Coordinate {p.x} is outside the loop [0, {params.L}]")
    else:
        raise ParameterError(f"Unknown edge {p.edge!r}")


def _loop_pair(s: complex, omega: complex, L: float) -> t.Tuple[complex, complex]:
    """``(e^{-omega s} + e^{-omega(L-s)}, e^{-omega s} - e^{-omega(L-s)})``."""
    a, b = cmath.exp(-omega * s), cmath.exp(-omega * (L - s))
    return a + b, a - b


def _pole_factors_branch(omega: complex, params: GraphParams, tol: float) -> t.Tuple[complex, complex, complex]:
    """Like :func:`_pole_factors` but only the branch pole ``E = omega_c`` is checked."""
    alpha = params.alpha
    E = cmath.exp(-omega * params.L)
    omega_c = (3 * omega + 1j * alpha) / (omega - 1j * alpha)
    if abs(E - omega_c) < tol:
        raise PoleProximityError("exp(-omega L) - omega_c", abs(E - omega_c))
    return E, 1 - E, E - omega_c


def _pole_factors(omega: complex, params: GraphParams, tol: float) -> t.Tuple[complex, complex, complex]:
    E, one_minus_e, e_minus_c = _pole_factors_branch(omega, params, tol)
    if abs(one_minus_e) < tol:
        raise PoleProximityError("1 - exp(-omega L)", abs(one_minus_e))
    return E, one_minus_e, e_minus_c


def _loop_kernel(x: float, y: float, omega: complex, params: GraphParams, tol: float) -> t.Tuple[complex, complex, complex]:
    """``(K0, K_d, K_s)`` on the loop."""
    _, one_minus_e, e_minus_c = _pole_factors(omega, params, tol)
    sx, dx = _loop_pair(x, omega, params.L)
    sy, dy = _loop_pair(y, omega, params.L)
    k0 = cmath.exp(-omega * abs(x - y)) / (2 * omega)
    k_d = -dy * dx / (4 * omega * one_minus_e)
    k_s = -sy * sx / (4 * omega * e_minus_c)
    return k0, k_d, k_s


def kernel_direct(x: GraphPoint, y: GraphPoint, z: complex, params: GraphParams, /) -> complex:
    """Resolvent kernel ``K(x, y, z^2)`` of ``(H - z^2)^{-1}`` for ``Im z > 0``.

    >>> import math
    >>> params = GraphParams.from_resolution(2 * math.pi, 1.0, n2=4, x_factor=4.0)
    >>> a = kernel_direct(GraphPoint("r1", 1.0), GraphPoint("r2", 2.0), -1 + 2j, params)
    >>> b = kernel_direct(GraphPoint("r2", 2.0), GraphPoint("r1", 1.0), -1 + 2j, params)
    >>> abs(a - b) < 1e-15
    True
    """
    _check_upper(z)
    omega = _omega(z)
    _check_point(x, params)
    _check_point(y, params)
    if x.edge == "r2" and y.edge == "r2":
        return complex(sum(_loop_kernel(x.x, y.x, omega, params, 1e-14)))
    c = eval_coefficients(z, params)
    if x.edge == "r1" and y.edge == "r1":
        return (cmath.exp(-omega * abs(x.x - y.x)) - c.F1 * cmath.exp(-omega * (x.x + y.x))) / (2 * omega)
    r1, r2 = (x, y) if x.edge == "r1" else (y, x)
    return cmath.exp(-omega * r1.x) * c.G1 * _loop_pair(r2.x, omega, params.L)[0] / (2 * omega)


def _k_pp_plus(x: float, y: float, z: complex, params: GraphParams) -> complex:
    half = z * params.L / 2
    s = cmath.sin(half)
    if abs(s) < DECOMPOSITION_POLE_TOL:
        raise PoleProximityError("sin(z L / 2)", abs(s))
    return -cmath.cos(half) / (2 * z * s) * cmath.sin(z * y) * cmath.sin(z * x)


def kernel_printed_split(x: float, y: float, z: complex, params: GraphParams, /) -> t.Tuple[complex, complex, complex]:
    """``(K_c, K_pp_plus, K_pp_minus)`` evaluated from the typeset closed forms, ``X = e^{i z L}``."""
    z = complex(z)
    omega, alpha = _omega(z), params.alpha
    ia = 1j * alpha
    X = cmath.exp(1j * z * params.L)
    omega_c = (3 * omega + ia) / (omega - ia)
    if abs(X - omega_c) < DECOMPOSITION_POLE_TOL:
        raise PoleProximityError("X - omega_c", abs(X - omega_c))
    A = (omega + ia) * (11 * omega**2 + alpha**2 + 6j * alpha * omega) / (2 * omega * (omega - ia) ** 2)
    ratio = (ia + omega) / (ia - omega)
    sy, sx = cmath.sin(z * y), cmath.sin(z * x)
    e_my, e_px, e_mx = cmath.exp(-1j * z * y), cmath.exp(1j * z * x), cmath.exp(-1j * z * x)
    k_c = -sy * sx / (2j * z) + (ratio * e_my * e_px + 2 * omega / (ia - omega) * (X - 2 * ratio) * e_my * e_mx) / (
        2j * z
    )
    numerator = (
        1j * X * sy * e_mx
        - sy * sx
        - 2 * (ia + omega) / (ia - omega) ** 2 * e_my * e_px
        - omega * A / (ia - omega) * e_my * e_mx
    )
    k_pp_minus = numerator / (1j * z * (X - omega_c))
    return k_c, _k_pp_plus(x, y, z, params), k_pp_minus


def _k_c_entire(x: float, y: float, z: complex, params: GraphParams) -> complex:
    """``K0 + K_d - K_pp_plus`` with the common factor ``sin(z L / 2)`` cancelled.

    With ``a = z L / 2``, ``c = cos a``, ``s = sin a``::

        K_c = K0 + (c e^{ia} sin z(x+y) - s c cos z(x+y) - i (c^2 sin zx sin zy + s^2 cos zx cos zy)) / (2 z)

    The terms grow like ``e^{Im z L}``, so the form is used only where ``|sin a| < 1``.
    """
    a = z * params.L / 2
    c, s = cmath.cos(a), cmath.sin(a)
    k0 = 1j * cmath.exp(1j * z * abs(x - y)) / (2 * z)
    numerator = (
        c * cmath.exp(1j * a) * cmath.sin(z * (x + y))
        - s * c * cmath.cos(z * (x + y))
        - 1j * (c * c * cmath.sin(z * x) * cmath.sin(z * y) + s * s * cmath.cos(z * x) * cmath.cos(z * y))
    )
    return k0 + numerator / (2 * z)


def kernel_derived_split(x: float, y: float, z: complex, params: GraphParams, /) -> t.Tuple[complex, complex, complex]:
    """``(K_c, K_pp_plus, K_pp_minus)`` with ``K_pp_minus = K_s`` and ``K_c = K0 + K_d - K_pp_plus``.

    ``K_pp_plus`` and ``K_d`` have equal residues at ``z = 2 k pi / L``, so ``K_c`` has no pole there.
    Near the real axis it is evaluated with the poles cancelled analytically; elsewhere the parts are
    subtracted, each being accurate to rounding relative to itself.
    """
    z = complex(z)
    omega = _omega(z)
    k_plus = _k_pp_plus(x, y, z, params)
    if abs(cmath.sin(z * params.L / 2)) < 1:
        _, _, e_minus_c = _pole_factors_branch(omega, params, DECOMPOSITION_POLE_TOL)
        sy, _ = _loop_pair(y, omega, params.L)
        sx, _ = _loop_pair(x, omega, params.L)
        return _k_c_entire(x, y, z, params), k_plus, -sy * sx / (4 * omega * e_minus_c)
    k0, k_d, k_s = _loop_kernel(x, y, omega, params, DECOMPOSITION_POLE_TOL)
    return k0 + k_d - k_plus, k_plus, k_s


def _loop_total(x: float, y: float, z: complex, params: GraphParams) -> complex:
    return complex(sum(_loop_kernel(x, y, _omega(z), params, DECOMPOSITION_POLE_TOL)))


def check_printed_split(params: GraphParams, /, probes: int = 20, tol: float = 1e-10) -> DecompositionReport:
    """Test ``K = K_c + K_pp_plus + K_pp_minus`` for the typeset parts at low-discrepancy probes.

    Probes: ``x, y`` on the loop, ``Re z in [-5, 0]``, ``Im z in [0.1, 5]``.
    """
    points = halton(probes, 4)
    failures, worst, worst_probe = 0, 0.0, None
    for u in points:
        x, y = u[0] * params.L, u[1] * params.L
        z = complex(-5 + 5 * u[2], 0.1 + 4.9 * u[3])
        try:
            total = _loop_total(x, y, z, params)
            k_c, k_plus, k_minus = kernel_printed_split(x, y, z, params)
            parts = KernelParts(GraphPoint("r2", x), GraphPoint("r2", y), z, total, k_c, k_plus, k_minus, "printed")
            defect = parts.relative_defect()
        except PoleProximityError:
            continue
        if defect >= tol:
            failures += 1
        if defect > worst:
            worst, worst_probe = defect, (x, y, z)
    path = "printed" if failures == 0 else "derived"
    notes = []
    if path == "derived":
        notes.append(
            f"Typeset K_c/K_pp_minus fail the sum identity at {failures}/{probes} probes "
            f"(max relative defect {worst:.3e}); using the split K_pp_minus = K_s, K_c = K0 + K_d - K_pp_plus"
        )
        logger.warning(notes[-1])
    return DecompositionReport(path, probes, failures, worst, worst_probe, notes)


_SPLIT_CACHE: t.Dict[t.Tuple[float, float], DecompositionReport] = {}


def _split_path(params: GraphParams) -> DecompositionReport:
    key = (params.L, params.alpha)
    if key not in _SPLIT_CACHE:
        _SPLIT_CACHE[key] = check_printed_split(params)
    return _SPLIT_CACHE[key]


def kernel_decomposed(x: GraphPoint, y: GraphPoint, z: complex, params: GraphParams, /) -> KernelParts:
    """Continuous and point-spectrum parts of the kernel.

    On the loop the typeset split is used when it passes :func:`check_printed_split`, the derived split
    otherwise. Off the loop the whole kernel is continuous.
    """
    z = complex(z)
    _check_point(x, params)
    _check_point(y, params)
    if x.edge != "r2" or y.edge != "r2":
        total = kernel_direct(x, y, z, params)
        return KernelParts(x, y, z, total, total, 0j, 0j, "off_loop")
    total = _loop_total(x.x, y.x, z, params)
    report = _split_path(params)
    if report.path == "printed":
        k_c, k_plus, k_minus = kernel_printed_split(x.x, y.x, z, params)
    else:
        k_c, k_plus, k_minus = kernel_derived_split(x.x, y.x, z, params)
    return KernelParts(x, y, z, total, k_c, k_plus, k_minus, report.path)


# integral over the first interval of the quadratic through three equispaced nodes, in units of the step
_EDGE_PANEL = np.array([5.0, 8.0, -1.0]) / 12


def _kinked_convolution(grid: np.ndarray, values: np.ndarray, omega: complex, step: float) -> np.ndarray:
    """``int e^{-omega |x_i - y|} g(y) dy`` for every node, with the integral split at ``y = x_i``.

    A side holding a single interval is integrated with the quadratic through the next node, the smooth
    branch ``e^{-omega (x_i - y)}`` (or ``e^{-omega (y - x_i)}``) being extended past the kink.
    """
    last = grid.size - 1
    out = np.zeros(grid.size, dtype=complex)
    for i, x in enumerate(grid):
        if i == 1:
            left = np.exp(-omega * (x - grid[:3])) * values[:3]
            out[i] += step * (_EDGE_PANEL @ left)
        elif i > 1:
            out[i] += simpson(np.exp(-omega * (x - grid[: i + 1])) * values[: i + 1], dx=step)
        if i == last - 1:
            right = np.exp(-omega * (grid[i - 1 :] - x)) * values[i - 1 :]
            out[i] += step * (_EDGE_PANEL @ right[::-1])
        elif i < last - 1:
            out[i] += simpson(np.exp(-omega * (grid[i:] - x)) * values[i:], dx=step)
    return out


def apply_resolvent(g: GraphFunction, z: complex, params: GraphParams, /) -> GraphFunction:
    """``u = (H - z^2)^{-1} g`` by Simpson quadrature of the kernel.

    The free part ``e^{-omega |x - y|}`` is integrated row by row with the kink at ``y = x`` as a panel
    boundary; every other part of the kernel is separable and reduces to weighted sums.

    :raises TailTooLargeError: ``g`` is not negligible beyond ``x_max - 2L`` on R1
    """
    _check_upper(z)
    g.check(params)
    omega = _omega(z)
    L = params.L
    x1, x2 = params.r1_grid, params.r2_grid
    g1, g2 = np.asarray(g.r1_values), np.asarray(g.r2_values)
    scale = max(float(np.max(np.abs(g1), initial=0)), float(np.max(np.abs(g2), initial=0)))
    tail = x1 > params.x_max - 2 * L
    if scale and np.max(np.abs(g1[tail]), initial=0) > TAIL_TOL * scale:
        raise TailTooLargeError(f"Data exceeds {TAIL_TOL:g} relative beyond x = {params.x_max - 2 * L:g} on R1")

    c = eval_coefficients(z, params)
    E, one_minus_e, e_minus_c = _pole_factors(omega, params, 1e-14)

    decay1 = np.exp(-omega * x1)
    sum2 = np.exp(-omega * x2) + np.exp(-omega * (L - x2))
    diff2 = np.exp(-omega * x2) - np.exp(-omega * (L - x2))

    m1 = simpson(decay1 * g1, dx=params.h1)
    s2 = simpson(sum2 * g2, dx=params.h2)
    d2 = simpson(-diff2 * g2, dx=params.h2)

    u1 = (
        _kinked_convolution(x1, g1, omega, params.h1) / (2 * omega)
        - c.F1 * decay1 * m1 / (2 * omega)
        + c.G1 * decay1 * s2 / (2 * omega)
    )
    u2 = (
        _kinked_convolution(x2, g2, omega, params.h2) / (2 * omega)
        + diff2 * d2 / (4 * omega * one_minus_e)
        - sum2 * s2 / (4 * omega * e_minus_c)
        + c.G1 * sum2 * m1 / (2 * omega)
    )
    logger.debug("Applied resolvent at z=%s (|E| = %.3e)", z, abs(E))
    return GraphFunction(u1, u2)


def kernel_slice(
    y: GraphPoint, z: complex, params: GraphParams, /, samples: int = 41, r1_extent: t.Optional[float] = None
) -> t.List[KernelParts]:
    """Kernel parts for ``x`` on an equispaced set of the loop and of ``[0, r1_extent]`` on R1."""
    r1_extent = 2 * params.L if r1_extent is None else r1_extent
    parts = []
    for edge, extent in (("r2", params.L), ("r1", r1_extent)):
        for x in np.linspace(0.0, extent, samples):
            parts.append(kernel_decomposed(GraphPoint(edge, float(x)), y, z, params))
    return parts


def write_kernel_csv(parts: t.Iterable[KernelParts], path: t.Union[str, Path], /, header: Header = None) -> Path:
    return write_csv(path, KERNEL_COLUMNS, (p.csv_row() for p in parts), header=header)
