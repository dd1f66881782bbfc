"""Modal time evolution of ``u' = i H u`` and the energy split between the two point-spectrum families.

A mode of ``H`` with eigenvalue ``lambda^2`` evolves as ``exp(i lambda^2 t)``: confined modes (real
``lambda^2``) keep their energy, damped modes lose it at the rate ``2 Im lambda^2``.
"""

import logging
import math
import typing as t
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tadpole.core import GraphFunction, GraphParams, norm
from tadpole.errors import OutOfSpanError, ParameterError, ResonanceModeError
from tadpole.modes import (
    ModeFunction,
    build_confined_mode,
    build_damped_mode,
    expand_damped,
    gram_matrix,
    project_pp_plus,
)
from tadpole.spectrum import SpectralPoint
from tadpole.utils import Header, write_csv

__all__ = [
    "ModalExpansion",
    "EnergyTrace",
    "DecayRateReport",
    "ENERGY_COLUMNS",
    "SPAN_TOL",
    "modal_expansion",
    "evolve_modal",
    "energy_trace",
    "decay_rate_report",
    "write_energy_csv",
]

SPAN_TOL = 1e-4
ENERGY_COLUMNS = ["t", "E", "E_plus", "E_minus", "flux_integral", "bound_E_plus0_plus_exp"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ModalExpansion:
    """``u0 = sum c_k phi_k + sum c_n psi_n`` over confined modes and genuine damped modes."""

    params: GraphParams
    confined: t.List[ModeFunction]
    damped: t.List[ModeFunction]
    confined_coeffs: np.ndarray
    damped_coeffs: np.ndarray
    residual: float

    @property
    def modes(self) -> t.List[ModeFunction]:
        return self.confined + self.damped

    @property
    def coeffs(self) -> np.ndarray:
        return np.concatenate([self.confined_coeffs, self.damped_coeffs])

    @property
    def lam_sq(self) -> np.ndarray:
        return np.array([m.lam**2 for m in self.modes], dtype=complex)

    def coefficients_at(self, time: float) -> np.ndarray:
        return self.coeffs * np.exp(1j * self.lam_sq * time)

    def at(self, time: float) -> GraphFunction:
        u = GraphFunction.zeros(self.params)
        for c, mode in zip(self.coefficients_at(time), self.modes):
            u = u + c * mode.sample(self.params)
        return u


def _split_spectrum(points: t.Sequence[SpectralPoint]) -> t.Tuple[t.List[int], t.List[SpectralPoint]]:
    embedded, damped = [], []
    for point in points:
        if point.family == "embedded":
            embedded.append(point.index)
        elif point.family == "damped":
            if not (point.lam_sq.imag > 0):
                raise ResonanceModeError(f"Damped mode lambda = {point.lam} has Im lambda^2 <= 0")
            damped.append(point)
        else:
            raise ResonanceModeError(f"lambda = {point.lam} is a resonance candidate, not an L2 eigenvalue")
    return sorted(set(embedded)), damped


def modal_expansion(u0: GraphFunction, points: t.Sequence[SpectralPoint], params: GraphParams, /) -> ModalExpansion:
    """Confined coefficients by orthogonal projection, damped ones by a Gram solve on the remainder.

    :raises ResonanceModeError: a resonance candidate is among the supplied points
    :raises OutOfSpanError: reconstruction residual above ``1e-4``
    """
    u0.check(params)
    if not points:
        raise ParameterError("Modal expansion needs at least one spectral point")
    indices, damped_points = _split_spectrum(points)
    remainder = u0
    confined: t.List[ModeFunction] = []
    confined_coeffs = np.zeros(0, dtype=complex)
    if indices:
        projection = project_pp_plus(u0, max(indices), params)
        confined = [build_confined_mode(k, params) for k in indices]
        confined_coeffs = np.array([projection.coeffs[k - 1] for k in indices])
        remainder = u0
        for c, mode in zip(confined_coeffs, confined):
            remainder = remainder - c * mode.sample(params)
    damped = [build_damped_mode(p, params) for p in damped_points]
    damped_coeffs = np.zeros(0, dtype=complex)
    if damped:
        damped_coeffs = expand_damped(remainder, damped, params).coeffs
    expansion = ModalExpansion(params, confined, damped, confined_coeffs, damped_coeffs, 0.0)
    size = norm(u0, params)
    residual = norm(u0 - expansion.at(0.0), params) / size if size else 0.0
    if residual > SPAN_TOL:
        raise OutOfSpanError(residual)
    logger.debug("Modal expansion on %d confined + %d damped modes, residual %.2e", len(confined), len(damped), residual)
    return ModalExpansion(params, confined, damped, confined_coeffs, damped_coeffs, residual)


def evolve_modal(u0: GraphFunction, points: t.Sequence[SpectralPoint], time: float, params: GraphParams, /) -> GraphFunction:
    """``u(t) = sum c e^{i lambda^2 t} psi`` for ``u0`` in the span of the supplied modes."""
    return modal_expansion(u0, points, params).at(time)


@dataclass(frozen=True, eq=False)
class EnergyTrace:
    """Energies ``E = ||u||^2 / 2`` along ``times`` and the vertex dissipation ``2 alpha int |u(vertex)|^2``."""

    times: np.ndarray
    E: np.ndarray
    E_plus: np.ndarray
    E_minus: np.ndarray
    E_minus_diagonal: np.ndarray
    flux_integral: np.ndarray
    omega_hat: float
    bound: np.ndarray
    expansion_residual: float

    @property
    def decay_bound_holds(self) -> bool:
        """``E_minus(t) <= exp(-2 omega_hat t) E_minus(0)`` up to ``1e-8`` relative."""
        if not math.isfinite(self.omega_hat):
            return bool(np.all(self.E_minus <= 1e-15))
        limit = np.exp(-2 * self.omega_hat * self.times) * self.E_minus[0] * (1 + 1e-8)
        return bool(np.all(self.E_minus <= limit + 1e-15))

    @property
    def energy_balance_defect(self) -> float:
        """``max |E(t) - E(0) + flux(t)/2| / E(0)``, the modal form of the dissipation law."""
        if not self.E[0]:
            return 0.0
        return float(np.max(np.abs(self.E - self.E[0] + 0.5 * self.flux_integral)) / self.E[0])

    def csv_rows(self) -> t.Iterator[t.List[float]]:
        for row in zip(self.times, self.E, self.E_plus, self.E_minus, self.flux_integral, self.bound):
            yield [float(v) for v in row]


def _quadratic(c: np.ndarray, G: np.ndarray) -> float:
    """``||sum c_n psi_n||^2`` for ``G[n, m] = <psi_n, psi_m>``."""
    return float(np.real(c @ G @ c.conj()))


def _vertex_flux(expansion: ModalExpansion, times: np.ndarray) -> np.ndarray:
    """``2 alpha int_0^t |u(vertex, s)|^2 ds`` in closed form."""
    alpha = expansion.params.alpha
    a = expansion.coeffs * np.array([m.vertex_value for m in expansion.modes])
    if not alpha or not np.any(a):
        return np.zeros_like(times, dtype=float)
    kappa = expansion.lam_sq[:, None] - expansion.lam_sq.conj()[None, :]
    weights = np.outer(a, a.conj())
    out = np.empty(times.size)
    for i, time in enumerate(times):
        small = np.abs(kappa * time) < 1e-12
        safe = np.where(small, 1.0, kappa)
        integral = np.where(small, time, (np.exp(1j * kappa * time) - 1) / (1j * safe))
        out[i] = 2 * alpha * float(np.real(np.sum(weights * integral)))
    return out


def energy_trace(
    u0: GraphFunction, points: t.Sequence[SpectralPoint], times: t.Sequence[float], params: GraphParams, /
) -> EnergyTrace:
    """Energy split ``E = E_plus + E_minus`` along ``times``.

    ``E_minus`` is the energy of the damped part computed through its Gram matrix; the pure-diagonal
    variant ``sum |c_n(t)|^2 ||psi_n||^2 / 2`` is kept alongside. ``omega_hat = min Im lambda^2`` over the
    damped modes used (infinite when there are none).
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0):
        raise ParameterError("times must be a nonempty increasing sequence")
    expansion = modal_expansion(u0, points, params)
    modes = expansion.modes
    G = gram_matrix(modes, params).entries
    nc = len(expansion.confined)
    G_minus = G[nc:, nc:]
    E, E_plus, E_minus, E_diag = (np.empty(times.size) for _ in range(4))
    for i, time in enumerate(times):
        c = expansion.coefficients_at(time)
        E[i] = 0.5 * _quadratic(c, G)
        E_plus[i] = 0.5 * _quadratic(c[:nc], G[:nc, :nc])
        E_minus[i] = 0.5 * _quadratic(c[nc:], G_minus)
        E_diag[i] = 0.5 * float(np.sum(np.abs(c[nc:]) ** 2 * np.real(np.diag(G_minus))))
    rates = [(m.lam**2).imag for m in expansion.damped]
    omega_hat = min(rates) if rates else math.inf
    bound = E_plus[0] + np.exp(-2 * omega_hat * times) * E_minus[0] if rates else np.full(times.size, E_plus[0])
    trace = EnergyTrace(
        times, E, E_plus, E_minus, E_diag, _vertex_flux(expansion, times), omega_hat, bound, expansion.residual
    )
    if not trace.decay_bound_holds:
        logger.warning("E_minus exceeds exp(-2 omega_hat t) E_minus(0) for omega_hat = %.6g", omega_hat)
    return trace


@dataclass(frozen=True)
class DecayRateReport:
    sup_re_i_lambda_sq: float
    reference_rate: float
    per_mode: np.ndarray
    indices: t.List[int]
    agrees: bool

    def as_json(self) -> t.Dict[str, t.Any]:
        return {
            "sup_re_i_lambda_sq": self.sup_re_i_lambda_sq,
            "reference_rate_8alpha_over_3L": self.reference_rate,
            "per_mode": [float(v) for v in self.per_mode],
            "indices": self.indices,
            "agrees": self.agrees,
        }


def decay_rate_report(points: t.Sequence[SpectralPoint], params: GraphParams, /, rtol: float = 1e-2) -> DecayRateReport:
    """``Re(i lambda^2) = -Im lambda^2`` per mode and its supremum over the non-embedded points.

    The supremum is compared with ``-8 alpha / (3L)``; the comparison is reported, not enforced.
    """
    if not points:
        raise ParameterError("Decay-rate report of an empty spectrum")
    per_mode = np.array([-p.lam_sq.imag for p in points])
    branch = [-p.lam_sq.imag for p in points if p.family != "embedded"]
    sup = max(branch) if branch else float(np.max(per_mode))
    reference = 8 * params.alpha / (3 * params.L)
    agrees = math.isclose(sup, -reference, rel_tol=rtol, abs_tol=1e-12)
    logger.info("sup Re(i lambda^2) = %.6g, reference -8 alpha / 3L = %.6g (%s)", sup, -reference, "agree" if agrees else "differ")
    return DecayRateReport(sup, reference, per_mode, [p.index for p in points], agrees)


def write_energy_csv(trace: EnergyTrace, path: t.Union[str, Path], /, header: Header = None) -> Path:
    return write_csv(path, ENERGY_COLUMNS, trace.csv_rows(), header=header)
