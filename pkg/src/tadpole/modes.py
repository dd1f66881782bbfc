"""Eigenfunctions, Gram matrices and the spectral projections onto the two point-spectrum families.

A branch mode at a root ``lambda`` reads ``C (e^{i lambda x} + T2 e^{-i lambda x})`` on the loop and
``C 4 lambda / (lambda + alpha) e^{i lambda x}`` on the half-line, with ``T2 = (3 lambda - alpha)/(lambda + alpha)``.
Confined modes ``sqrt(2/L) sin(2 k pi x / L)`` vanish on the half-line.
"""

import cmath
import logging
import math
import typing as t
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import lsqr

from tadpole.core import GraphFunction, GraphParams, inner_product, norm, simpson_weights
from tadpole.errors import IllConditionedBasisError, ParameterError, ResonanceModeError, ShapeError
from tadpole.oracle import build_discrete_operator, oracle_eigenpairs, r2_mass_fraction, to_graph_function, to_vector
from tadpole.secular import mode_ratio
from tadpole.spectrum import Family, SpectralPoint
from tadpole.utils import Header, complex_pair, provenance_line, write_json

__all__ = [
    "Segment",
    "ModeFunction",
    "GramMatrix",
    "RieszDiagnostics",
    "Projection",
    "Expansion",
    "GeneralizedMode",
    "build_confined_mode",
    "build_damped_mode",
    "dissipation_balance",
    "gram_matrix",
    "exponential_packet_gram",
    "riesz_diagnostics",
    "cross_family_overlap",
    "project_pp_plus",
    "expand_damped",
    "build_generalized_mode",
    "write_mode",
]

Segment = t.Literal["r2_only", "full_graph"]
GRAM_CONDITION_LIMIT = 1e12
ORTHOGONALITY_TOL = 1e-6

logger = logging.getLogger(__name__)


def _integral_exp(c: complex, length: float) -> complex:
    """``int_0^length exp(c x) dx``."""
    if abs(c * length) < 1e-8:
        return length * (1 + c * length / 2)
    return (cmath.exp(c * length) - 1) / c


@dataclass(frozen=True)
class ModeFunction:
    """Closed-form eigenfunction ``(A1 e^{i lam x}; A2 e^{i lam x} + B2 e^{-i lam x})``.

    The coefficients already include ``norm_const``.
    """

    lam: complex
    A1: complex
    A2: complex
    B2: complex
    norm_const: complex
    family: Family
    normalized_over: t.Literal["full_halfline", "truncated"]
    index: int = 0

    def r1(self, x: np.ndarray) -> np.ndarray:
        return self.A1 * np.exp(1j * self.lam * np.asarray(x))

    def r2(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        return self.A2 * np.exp(1j * self.lam * x) + self.B2 * np.exp(-1j * self.lam * x)

    def sample(self, params: GraphParams, /) -> GraphFunction:
        return GraphFunction.sample(params, self.r1, self.r2)

    @property
    def vertex_value(self) -> complex:
        return self.A1

    @property
    def square_integrable(self) -> bool:
        return self.family != "resonance_candidate"

    def _terms(self) -> t.List[t.Tuple[complex, complex]]:
        return [(self.A2, self.lam), (self.B2, -self.lam)]

    def as_json(self) -> t.Dict[str, t.Any]:
        return {
            "lambda_re": self.lam.real,
            "lambda_im": self.lam.imag,
            "A1": complex_pair(self.A1),
            "A2": complex_pair(self.A2),
            "B2": complex_pair(self.B2),
            "norm_const": complex_pair(self.norm_const),
            "family": self.family,
            "normalized_over": self.normalized_over,
            "index": self.index,
        }


def build_confined_mode(k: int, params: GraphParams, /) -> ModeFunction:
    """``sqrt(2/L) sin(2 k pi x / L)`` on the loop, zero on the half-line.

    >>> params = GraphParams.from_resolution(2 * math.pi, 1.0, n2=8, x_factor=4.0)
    >>> round(build_confined_mode(1, params).r2(math.pi / 2).real, 4)
    0.5642
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    lam = 2 * k * math.pi / params.L
    amplitude = math.sqrt(2 / params.L)
    A2 = amplitude / 2j
    return ModeFunction(complex(lam), 0j, A2, -A2, amplitude, "embedded", "full_halfline", k)


def _branch_norm_sq(lam: complex, A1: complex, B2: complex, params: GraphParams, full: bool) -> float:
    L = params.L
    loop = (
        _integral_exp(-2 * lam.imag, L)
        + abs(B2) ** 2 * _integral_exp(2 * lam.imag, L)
        + 2 * (B2.conjugate() * _integral_exp(2j * lam.real, L)).real
    )
    if full:
        tail = abs(A1) ** 2 / (2 * lam.imag)
    else:
        tail = abs(A1) ** 2 * _integral_exp(-2 * lam.imag, params.n1 * params.h1).real
    return float(loop.real + tail)


def build_damped_mode(point: SpectralPoint, params: GraphParams, /) -> ModeFunction:
    """Branch mode at ``point.lam`` with unit norm.

    Genuine eigenfunctions (``Im lambda > 0``) are normalized over the whole half-line in closed form;
    resonance candidates over ``[0, x_max]`` and flagged ``truncated``.
    """
    if point.family == "embedded":
        raise ParameterError("Embedded roots carry confined modes, use build_confined_mode")
    lam = point.lam
    if lam == 0:
        raise ParameterError("lambda = 0 carries no branch mode")
    ratio = mode_ratio(lam, params)
    A1 = 1 + ratio
    full = lam.imag > 0
    C = 1 / math.sqrt(_branch_norm_sq(lam, A1, ratio, params, full))
    return ModeFunction(
        lam, C * A1, complex(C), C * ratio, complex(C), point.family, "full_halfline" if full else "truncated", point.index
    )


def dissipation_balance(mode: ModeFunction, params: GraphParams, /) -> t.Tuple[float, float]:
    """``(Im lambda^2, alpha |psi(vertex)|^2)``; equal for a normalized square-integrable mode."""
    if not mode.square_integrable:
        raise ResonanceModeError(f"lambda = {mode.lam} is not an L2 eigenvalue")
    return (mode.lam**2).imag, params.alpha * abs(mode.vertex_value) ** 2


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """``entries[n, m] = <psi_n, psi_m>`` over the given segment."""

    entries: np.ndarray
    segment: Segment
    indices: t.List[int]

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def truncated(self, size: int) -> "GramMatrix":
        return GramMatrix(self.entries[:size, :size], self.segment, self.indices[:size])


def _check_segment(segment: str) -> None:
    if segment not in ("r2_only", "full_graph"):
        raise ParameterError(f"Unknown segment {segment!r}")


def _exact_entry(a: ModeFunction, b: ModeFunction, segment: Segment, params: GraphParams) -> complex:
    value = 0j
    for ca, pa in a._terms():
        for cb, pb in b._terms():
            value += ca * cb.conjugate() * _integral_exp(1j * (pa - pb.conjugate()), params.L)
    if segment == "full_graph" and (a.A1 or b.A1):
        c = 1j * (a.lam - b.lam.conjugate())
        if a.normalized_over == "full_halfline" and b.normalized_over == "full_halfline":
            value += a.A1 * b.A1.conjugate() * (-1 / c)
        else:
            value += a.A1 * b.A1.conjugate() * _integral_exp(c, params.n1 * params.h1)
    return value


def gram_matrix(
    modes: t.Sequence[ModeFunction],
    params: GraphParams,
    /,
    segment: Segment = "full_graph",
    method: t.Literal["quadrature", "exact"] = "quadrature",
    normalize: bool = False,
) -> GramMatrix:
    """Gram matrix of closed-form modes.

    ``quadrature`` samples the modes and uses the Simpson inner product; ``exact`` integrates the
    exponentials in closed form (needed once the grid no longer resolves high indices). ``normalize``
    rescales to unit diagonal. Resonance candidates are only admitted on ``r2_only``.
    """
    _check_segment(segment)
    if not modes:
        raise ShapeError("Gram matrix of an empty family")
    if segment == "full_graph" and any(not m.square_integrable for m in modes):
        raise ResonanceModeError("Resonance candidates are not square-integrable on the half-line")
    size = len(modes)
    G = np.empty((size, size), dtype=complex)
    if method == "quadrature":
        samples = [m.sample(params) for m in modes]
        w2 = simpson_weights(params.n2, params.h2)
        R2 = np.array([s.r2_values for s in samples])
        G = (R2 * w2) @ R2.conj().T
        if segment == "full_graph":
            w1 = simpson_weights(params.n1, params.h1)
            R1 = np.array([s.r1_values for s in samples])
            G = G + (R1 * w1) @ R1.conj().T
    elif method == "exact":
        for i, a in enumerate(modes):
            for j in range(i, size):
                G[i, j] = _exact_entry(a, modes[j], segment, params)
                G[j, i] = G[i, j].conjugate()
    else:
        raise ParameterError(f"Unknown Gram method {method!r}")
    if normalize:
        scale = 1 / np.sqrt(np.real(np.diag(G)))
        G = G * np.outer(scale, scale)
    return GramMatrix(G, segment, [m.index for m in modes])


def exponential_packet_gram(lams: t.Sequence[complex], L: float, /) -> np.ndarray:
    """Closed-form ``<e^{i lam_n x}, e^{i lam_m x}>`` on ``[0, L]``: ``(e^{i(lam_n - conj lam_m)L} - 1) / (i (lam_n - conj lam_m))``.

    >>> L = 2 * math.pi
    >>> round(exponential_packet_gram([complex(1, math.log(3) / L)], L)[0, 0].real / L, 6)
    0.404551
    """
    lams = [complex(v) for v in lams]
    return np.array([[_integral_exp(1j * (p - q.conjugate()), L) for q in lams] for p in lams])


@dataclass(frozen=True)
class RieszDiagnostics:
    fitted_C: float
    min_eig: float
    max_eig: float


def riesz_diagnostics(G: GramMatrix, /) -> RieszDiagnostics:
    """Off-diagonal decay constant ``max |G_nm| <min(n, m)> |m - n|`` and the extreme eigenvalues.

    >>> riesz_diagnostics(GramMatrix(np.eye(3), "full_graph", [1, 2, 3]))
    RieszDiagnostics(fitted_C=0.0, min_eig=1.0, max_eig=1.0)
    """
    entries = G.entries
    if G.hermitian_defect() > 1e-10 * max(1.0, float(np.max(np.abs(entries)))):
        raise ShapeError("Riesz diagnostics need a Hermitian Gram matrix")
    indices = np.asarray(G.indices, dtype=float)
    n, m = np.meshgrid(indices, indices, indexing="ij")
    weight = np.sqrt(1 + np.minimum(n, m) ** 2) * np.abs(m - n)
    off = ~np.eye(len(indices), dtype=bool)
    fitted = float(np.max(np.abs(entries[off]) * weight[off])) if off.any() else 0.0
    eigenvalues = np.linalg.eigvalsh(0.5 * (entries + entries.conj().T))
    return RieszDiagnostics(fitted, float(eigenvalues[0]), float(eigenvalues[-1]))


def cross_family_overlap(
    damped: t.Sequence[ModeFunction], confined: t.Sequence[ModeFunction], params: GraphParams, /
) -> float:
    """Largest ``|<psi, phi>|`` between branch and confined modes, computed on the loop."""
    worst = 0.0
    for psi in damped:
        for phi in confined:
            overlap = abs(_exact_entry(psi, phi, "r2_only", params))
            if overlap > ORTHOGONALITY_TOL:
                logger.warning("Branch mode %s overlaps confined mode k=%d by %.2e", psi.lam, phi.index, overlap)
            worst = max(worst, overlap)
    return worst


@dataclass(frozen=True)
class Projection:
    coeffs: np.ndarray
    remainder: GraphFunction


def project_pp_plus(f: GraphFunction, kmax: int, params: GraphParams, /) -> Projection:
    """Project onto the confined modes ``k = 1..kmax``.

    The coefficients solve the (near-identity) discrete Gram system so that the remainder is orthogonal
    to every ``phi_k`` in the quadrature inner product.
    """
    if kmax < 1:
        raise ParameterError(f"kmax must be >= 1, got {kmax}")
    f.check(params)
    phis = [build_confined_mode(k, params).sample(params) for k in range(1, kmax + 1)]
    b = np.array([inner_product(f, phi, params) for phi in phis])
    G = np.array([[inner_product(p, q, params) for q in phis] for p in phis])
    coeffs = np.linalg.solve(G.T, b)
    remainder = f
    for c, phi in zip(coeffs, phis):
        remainder = remainder - c * phi
    return Projection(coeffs, remainder)


@dataclass(frozen=True)
class Expansion:
    coeffs: np.ndarray
    residual: float
    gram: GramMatrix


def expand_damped(
    f: GraphFunction,
    modes: t.Sequence[ModeFunction],
    params: GraphParams,
    /,
    segment: Segment = "full_graph",
) -> Expansion:
    """Coefficients ``c`` of the best approximation ``sum c_n psi_n`` of ``f``.

    Solves ``G^T c = b`` with ``b_n = <f, psi_n>``; ``residual`` is ``||f - sum c_n psi_n|| / ||f||``
    over ``segment``.

    :raises IllConditionedBasisError: Gram condition number above ``1e12`` or smallest eigenvalue below ``1e-8``
    """
    f.check(params)
    gram = gram_matrix(modes, params, segment=segment)
    eigenvalues = np.linalg.eigvalsh(0.5 * (gram.entries + gram.entries.conj().T))
    condition = np.linalg.cond(gram.entries)
    if condition > GRAM_CONDITION_LIMIT or eigenvalues[0] < 1e-8:
        raise IllConditionedBasisError(
            f"Gram matrix condition number {condition:.2e}, smallest eigenvalue {eigenvalues[0]:.2e}"
        )
    samples = [m.sample(params) for m in modes]
    if segment == "r2_only":
        f = GraphFunction(np.zeros_like(f.r1_values), f.r2_values)
        samples = [GraphFunction(np.zeros_like(s.r1_values), s.r2_values) for s in samples]
    b = np.array([inner_product(f, s, params) for s in samples])
    coeffs = np.linalg.solve(gram.entries.T, b)
    approximation = GraphFunction.zeros(params)
    for c, s in zip(coeffs, samples):
        approximation = approximation + c * s
    size = norm(f, params)
    residual = norm(f - approximation, params) / size if size else 0.0
    logger.debug("Expanded on %d modes, relative residual %.2e", len(modes), residual)
    return Expansion(coeffs, residual, gram)


@dataclass(frozen=True)
class GeneralizedMode:
    """Eigenvector and first Jordan-chain candidate of the discretized operator at a double root."""

    mu: complex
    eigenvector: GraphFunction
    chain: GraphFunction
    solvability_residual: float


def build_generalized_mode(
    point: SpectralPoint, params: GraphParams, /, count: int = 6, tol: float = 1e-8
) -> GeneralizedMode:
    """Least-squares solve of ``(A - mu) psi_2 = psi`` at a double root ``lambda = alpha``, ``e^{i alpha L} = 1``.

    ``psi`` is the discrete eigenvector nearest ``lambda^2`` with the most mass on the loop. A small
    ``solvability_residual`` indicates a genuine chain of length two.
    """
    lam = point.lam
    if abs(lam - params.alpha) > tol * (1 + abs(lam)) or abs(cmath.exp(1j * lam * params.L) - 1) > tol:
        raise ParameterError(f"lambda = {lam} is not the double root alpha with exp(i alpha L) = 1")
    op = build_discrete_operator(params)
    pairs = oracle_eigenpairs(op, lam**2, count=min(count, op.dimension - 2))
    mu, eigenvector = max(pairs, key=lambda pair: r2_mass_fraction(op, to_vector(op, pair[1])))
    psi = to_vector(op, eigenvector)
    shifted = (op.matrix - mu * sp.identity(op.dimension, dtype=complex, format="csr")).tocsr()
    solution = lsqr(shifted, psi, atol=1e-12, btol=1e-12)[0]
    residual = float(np.linalg.norm(shifted @ solution - psi) / np.linalg.norm(psi))
    logger.info("Jordan chain at mu = %s: solvability residual %.3e", mu, residual)
    return GeneralizedMode(mu, eigenvector, to_graph_function(op, solution), residual)


def write_mode(
    mode: ModeFunction, params: GraphParams, directory: t.Union[str, Path], stem: str, /, header: Header = None
) -> t.Tuple[Path, Path]:
    """Write ``<stem>.csv`` (sampled mode) and the ``<stem>.json`` coefficient sidecar."""
    directory = Path(directory)
    csv_path = directory / f"{stem}.csv"
    json_path = directory / f"{stem}.json"
    mode.sample(params).to_csv(csv_path, params, header=_header_text(header))
    write_json(json_path, mode.as_json())
    return csv_path, json_path


def _header_text(header: Header) -> t.Optional[str]:
    if header is None:
        return None
    return provenance_line(header)[2:].rstrip("\n")
