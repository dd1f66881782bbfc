"""Closed-form scalar functions: resolvent coefficients, determinants and characteristic functions.

Notation: ``omega = -i z``, ``E = exp(-omega L) = exp(i z L)``, ``beta = i alpha / omega`` and
``omega_c = (3 omega + i alpha) / (omega - i alpha)``. Only ``E`` (never ``exp(+omega L)``) enters the
coefficients, so they stay finite for large ``|omega| L``.

The R1 row of the ansatz for a source on R2 is taken with a ``+`` sign, so that ``F2 = G1`` and the
kernel is symmetric across the two edges.
"""

import cmath
import logging
import math
import typing as t
from dataclasses import dataclass, fields

import numpy as np

from tadpole.core import GraphParams
from tadpole.errors import PoleProximityError, SingularityError

__all__ = [
    "POLE_TOL",
    "CoefficientSet",
    "eval_coefficients",
    "coefficient_system_residuals",
    "printed_coefficients",
    "coefficient_discrepancies",
    "eval_d",
    "eval_d_prime",
    "eval_d_array",
    "eval_h",
    "eval_h_prime",
    "mode_ratio",
]

POLE_TOL = 1e-14  #: denominators below this carry no significant digits

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoefficientSet:
    """Resolvent coefficients at one frequency."""

    omega: complex
    E: complex  #: exp(-omega L)
    F1: complex
    F2: complex
    F3: complex
    G1: complex
    G2: complex
    G3: complex
    H1: complex
    H2: complex
    H3: complex
    D_alpha: complex
    omega_c: complex
    A_alpha: complex

    def as_dict(self) -> t.Dict[str, complex]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _guard(value: complex, factor: str, tol: float = POLE_TOL) -> complex:
    if abs(value) < tol:
        raise PoleProximityError(factor, abs(value))
    return value


def _omega_c(omega: complex, alpha: float) -> complex:
    return (3 * omega + 1j * alpha) / _guard(omega - 1j * alpha, "omega - i alpha")


def eval_coefficients(z: complex, params: GraphParams, /) -> CoefficientSet:
    """Evaluate the nine coefficients, the determinant, ``omega_c`` and ``A(alpha)`` at ``z``.

    >>> params = GraphParams.from_resolution(1.0, 0.0, n2=4, x_factor=4.0)
    >>> c = eval_coefficients(1j, params)
    >>> c.F2 == c.G1, abs(c.H1 - c.E * c.G1) < 1e-15
    (True, True)
    """
    if z == 0:
        raise SingularityError("Resolvent coefficients are singular at z = 0")
    alpha, L = params.alpha, params.L
    omega = -1j * complex(z)
    E = cmath.exp(-omega * L)
    omega_c = _omega_c(omega, alpha)
    one_minus_e = _guard(1 - E, "1 - exp(-omega L)")
    e_minus_c = _guard(E - omega_c, "exp(-omega L) - omega_c")
    beta = 1j * alpha / omega

    G1 = 2 * omega / ((1j * alpha - omega) * e_minus_c)
    H1 = E * G1
    F1 = 1 - (1 + E) * G1
    G2 = (omega + 1j * alpha) / ((omega - 1j * alpha) * one_minus_e * e_minus_c)
    G3 = 0.5 * E * (1 / one_minus_e - 1 / e_minus_c)
    H2 = G3
    H3 = E * E * G2
    F2 = G1
    F3 = E * G1
    try:
        D_alpha = (1 - beta) * one_minus_e * e_minus_c * cmath.exp(omega * L)
    except OverflowError:
        D_alpha = complex(math.inf, math.inf)
    A_alpha = (omega + 1j * alpha) * (11 * omega**2 + alpha**2 + 6j * alpha * omega) / (
        2 * omega * (omega - 1j * alpha) ** 2
    )
    return CoefficientSet(
        omega=omega,
        E=E,
        F1=F1,
        F2=F2,
        F3=F3,
        G1=G1,
        G2=G2,
        G3=G3,
        H1=H1,
        H2=H2,
        H3=H3,
        D_alpha=D_alpha,
        omega_c=omega_c,
        A_alpha=A_alpha,
    )


def _relative(*terms: complex) -> float:
    scale = sum(abs(term) for term in terms)
    return abs(sum(terms)) / scale if scale else 0.0


def coefficient_system_residuals(c: CoefficientSet, params: GraphParams, /) -> np.ndarray:
    """Relative residuals of the six continuity and three Kirchhoff equations.

    Each equation is multiplied through by ``E`` where it would otherwise contain ``exp(+omega L)``.
    Order: (continuity 0, continuity L, Kirchhoff) for a source on R1, on R2 (``exp(-omega y)`` part)
    and on R2 (``exp(+omega y)`` part).
    """
    E = c.E
    beta = 1j * params.alpha / c.omega
    return np.array(
        [
            _relative(c.G1, c.H1, -1, c.F1),
            _relative(E * E * c.G1, c.H1, -E, E * c.F1),
            _relative(E * (1 + beta) * c.F1, c.G1 * E * (E - 1), c.H1 * (E - 1), -E * (beta - 1)),
            _relative(c.F2, -1, -c.G2, -c.H2),
            _relative(E * c.F2, -E * E * c.G2, -c.H2),
            _relative(-E * (1 + beta) * c.F2, E * (E - 1) * c.G2, E, (E - 1) * c.H2),
            _relative(c.F3, -c.G3, -c.H3),
            _relative(E * c.F3, -E * E, -E * E * c.G3, -c.H3),
            _relative(-E * (1 + beta) * c.F3, E * (E - 1) * c.G3, E * E, (E - 1) * c.H3),
        ]
    )


def printed_coefficients(z: complex, params: GraphParams, /) -> t.Dict[str, complex]:
    """Coefficients exactly as typeset in the closed-form table, for the discrepancy report."""
    c = eval_coefficients(z, params)
    omega, E, omega_c, alpha = c.omega, c.E, c.omega_c, params.alpha
    ia = 1j * alpha
    D = c.D_alpha
    return {
        "F1": 1 + 2 * omega / (ia - omega) * (E + 1) / (E - omega_c),
        "G1": 2 * omega / ((ia - omega) * (E - omega_c)),
        "H1": 2 * omega * E / ((ia - omega) * (E - omega_c)),
        "F2": 2 * omega / ((ia - omega) * (E - omega_c)),
        "G2": (omega + ia) / (omega - ia) / ((E - 1) * (E - omega_c)),
        "H2": (2 * omega + (ia - omega) * E) / (omega * D),
        "F3": -2 * E * (E - 1) / D,
        "G3": (omega + ia) * E / (omega * D),
        "H3": E / D * (2 * E - (3 * omega + ia) / omega),
    }


def coefficient_discrepancies(z: complex, params: GraphParams, /) -> t.Dict[str, float]:
    """Relative difference between the typeset and the derived coefficients."""
    derived = eval_coefficients(z, params).as_dict()
    report = {}
    for name, value in printed_coefficients(z, params).items():
        reference = derived[name]
        report[name] = abs(value - reference) / max(abs(reference), POLE_TOL)
    return report


def _check_lambda(lam: complex) -> None:
    if lam == 0:
        raise SingularityError("d(lambda) is evaluated through alpha/lambda and is singular at lambda = 0")


def eval_d_array(lam: np.ndarray, params: GraphParams, /) -> t.Tuple[np.ndarray, np.ndarray]:
    """Vectorized ``d(lambda)`` and ``d'(lambda)``."""
    lam = np.asarray(lam, dtype=complex)
    alpha, L = params.alpha, params.L
    T = np.exp(1j * lam * L)
    r = alpha / lam
    dr = -alpha / lam**2
    d = (r + 1) * T - 4 + (3 - r) / T
    d_prime = dr * T + (r + 1) * 1j * L * T - dr / T - (3 - r) * 1j * L / T
    return d, d_prime


def eval_d(lam: complex, params: GraphParams, /) -> complex:
    """Secular determinant ``d(lambda) = exp(-i lambda L)((alpha/lambda + 1) T^2 - 4T + 3 - alpha/lambda)``.

    Vanishes on ``exp(i lambda L) = 1`` and on ``exp(i lambda L) = (3 lambda - alpha)/(lambda + alpha)``.

    >>> params = GraphParams.from_resolution(2 * math.pi, 1.0, n2=4, x_factor=4.0)
    >>> abs(eval_d(1.0, params)) < 1e-12
    True
    """
    _check_lambda(lam)
    d, _ = eval_d_array(np.array([lam]), params)
    return complex(d[0])


def eval_d_prime(lam: complex, params: GraphParams, /) -> complex:
    _check_lambda(lam)
    _, d_prime = eval_d_array(np.array([lam]), params)
    return complex(d_prime[0])


def mode_ratio(lam: complex, params: GraphParams, /) -> complex:
    """``T2 = (3 lambda - alpha)/(lambda + alpha)``, the ratio ``B2/A2`` of a damped-family mode."""
    denominator = _guard(lam + params.alpha, "lambda + alpha")
    return (3 * lam - params.alpha) / denominator


def eval_h(lam: complex, params: GraphParams, /) -> complex:
    """``h(lambda) = exp(i lambda L) + 4 alpha/(lambda + alpha) - 3``; zero iff ``exp(i lambda L) = T2``."""
    denominator = _guard(lam + params.alpha, "lambda + alpha")
    return cmath.exp(1j * lam * params.L) + 4 * params.alpha / denominator - 3


def eval_h_prime(lam: complex, params: GraphParams, /) -> complex:
    denominator = _guard(lam + params.alpha, "lambda + alpha")
    return 1j * params.L * cmath.exp(1j * lam * params.L) - 4 * params.alpha / denominator**2
