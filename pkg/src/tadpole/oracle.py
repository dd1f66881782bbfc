"""Finite-difference discretization of the damped operator on the truncated tadpole graph.

Unknowns are ordered ``[vertex, R2 interior nodes, R1 interior nodes]``; the three endpoint samples
``u1(0) = u2(0) = u2(L)`` share the vertex unknown and ``u1(x_max) = 0`` (Dirichlet end). Interior rows are
the ``(-1, 2, -1) / h^2`` stencil. The vertex row is a finite-volume balance over the half cells meeting at
the vertex, of total length ``m = (h1 + 2 h2) / 2``::

    (A u)_v = (i alpha v + sum_e (v - u_e1) / h_e) / m

so that with the weights ``W = diag(m, h2, ..., h1, ...)`` the matrix ``W A`` is real symmetric plus the
single entry ``i alpha`` on the vertex diagonal. Consequently ``Im (W A u, u) = alpha |v|^2`` and the
Crank-Nicolson scheme reproduces the dissipation law exactly with midpoint vertex values.

This module depends on :mod:`tadpole.core` only and is the independent check of the closed forms.
"""

import logging
import math
import typing as t
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigs, splu, spsolve

from tadpole.core import Edge, GraphFunction, GraphParams
from tadpole.errors import PacketTruncationError, ParameterError, SolverError
from tadpole.utils import complex_pair, loglog_slope

__all__ = [
    "Closure",
    "DiscreteOperator",
    "OracleRun",
    "WeylPacket",
    "WeylStudy",
    "Adjudication",
    "build_discrete_operator",
    "to_vector",
    "to_graph_function",
    "weighted_norm",
    "r2_mass_fraction",
    "oracle_eigenpairs",
    "dense_eigenvalues",
    "oracle_evolve",
    "energy_identity_check",
    "green_column",
    "weyl_residual",
    "weyl_study",
    "adjudicate",
]

Closure = t.Literal["dirichlet", "absorbing_layer"]

POINTS_PER_WAVELENGTH = 8
LAYER_FRACTION = 0.25

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Sparse matrix ``A`` approximating ``H`` together with its quadrature weights."""

    params: GraphParams
    matrix: sp.csc_matrix
    weights: np.ndarray
    closure: Closure
    layer_strength: float = 0.0
    vertex_index: int = 0

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def h1(self) -> float:
        return self.params.h1

    @property
    def h2(self) -> float:
        return self.params.h2

    @property
    def r2_slice(self) -> slice:
        return slice(1, self.params.n2)

    @property
    def r1_slice(self) -> slice:
        return slice(self.params.n2, self.dimension)


def _check_resolution(params: GraphParams, wavenumber: float) -> None:
    step = max(params.h1, params.h2)
    points = 2 * math.pi / (wavenumber * step)
    if points < POINTS_PER_WAVELENGTH:
        logger.warning(
            "Grid resolves wavenumber %.4g with %.1f points per wavelength (< %d)",
            wavenumber,
            points,
            POINTS_PER_WAVELENGTH,
        )


def build_discrete_operator(
    params: GraphParams,
    /,
    closure: Closure = "dirichlet",
    layer_strength: t.Optional[float] = None,
    wavenumber: t.Optional[float] = None,
) -> DiscreteOperator:
    """Assemble the sparse operator.

    :param closure: ``dirichlet`` sets ``u(x_max) = 0``; ``absorbing_layer`` additionally subtracts
        ``i W(x)`` with a quartic ramp ``W`` on the last quarter of R1, which moves the discrete spectrum
        towards the lower-half-plane branch (``Im lambda^2 < 0``)
    :param layer_strength: ramp height, defaults to ``4 (2 pi / L)^2``
    :param wavenumber: largest wavenumber of interest for the resolution warning, defaults to ``2 pi / L``
    """
    if closure not in ("dirichlet", "absorbing_layer"):
        raise ParameterError(f"Unknown closure {closure!r}")
    _check_resolution(params, wavenumber or 2 * math.pi / params.L)
    n1, n2, h1, h2 = params.n1, params.n2, params.h1, params.h2
    size = 1 + (n2 - 1) + (n1 - 1)
    m = (h1 + 2 * h2) / 2
    r2 = np.arange(1, n2)
    r1 = np.arange(n2, size)

    rows: t.List[np.ndarray] = []
    cols: t.List[np.ndarray] = []
    vals: t.List[np.ndarray] = []

    def add(i, j, v):
        rows.append(np.atleast_1d(i))
        cols.append(np.atleast_1d(j))
        vals.append(np.broadcast_to(np.asarray(v, dtype=complex), np.atleast_1d(i).shape))

    # loop interior, neighbours of the end nodes are the vertex
    add(r2, r2, 2 / h2**2)
    add(r2[1:], r2[:-1], -1 / h2**2)
    add(r2[:-1], r2[1:], -1 / h2**2)
    add(r2[[0, -1]], [0, 0], -1 / h2**2)
    # half-line interior, last node sees the Dirichlet end
    add(r1, r1, 2 / h1**2)
    add(r1[1:], r1[:-1], -1 / h1**2)
    add(r1[:-1], r1[1:], -1 / h1**2)
    add(r1[0], 0, -1 / h1**2)
    # vertex balance
    add(0, 0, (1j * params.alpha + 1 / h1 + 2 / h2) / m)
    add([0, 0, 0], [r2[0], r2[-1], r1[0]], [-1 / (h2 * m), -1 / (h2 * m), -1 / (h1 * m)])

    strength = 0.0
    if closure == "absorbing_layer":
        strength = 4 * (2 * math.pi / params.L) ** 2 if layer_strength is None else float(layer_strength)
        x = params.r1_grid[1:-1]
        start = (1 - LAYER_FRACTION) * params.x_max
        ramp = np.clip((x - start) / (params.x_max - start), 0.0, None) ** 4
        add(r1, r1, -1j * strength * ramp)

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    ).tocsc()
    weights = np.concatenate([[m], np.full(n2 - 1, h2), np.full(n1 - 1, h1)])
    weights.setflags(write=False)
    logger.debug("Assembled %s operator of dimension %d (alpha=%g)", closure, size, params.alpha)
    return DiscreteOperator(params, matrix, weights, closure, strength)


def to_vector(op: DiscreteOperator, f: GraphFunction, /) -> np.ndarray:
    """Restrict samples to the unknowns; the vertex unknown is the mean of the three endpoint samples."""
    f.check(op.params)
    vertex = (f.r1_values[0] + f.r2_values[0] + f.r2_values[-1]) / 3
    return np.concatenate([[vertex], f.r2_values[1:-1], f.r1_values[1:-1]])


def to_graph_function(op: DiscreteOperator, vec: np.ndarray, /) -> GraphFunction:
    vec = np.asarray(vec, dtype=complex)
    if vec.shape != (op.dimension,):
        raise ParameterError(f"Vector of shape {vec.shape} does not match dimension {op.dimension}")
    v = vec[0]
    return GraphFunction(
        np.concatenate([[v], vec[op.r1_slice], [0.0]]),
        np.concatenate([[v], vec[op.r2_slice], [v]]),
    )


def weighted_norm(op: DiscreteOperator, vec: np.ndarray, /) -> float:
    return float(np.sqrt(np.sum(op.weights * np.abs(vec) ** 2)))


def r2_mass_fraction(op: DiscreteOperator, vec: np.ndarray, /) -> float:
    mass = op.weights * np.abs(vec) ** 2
    total = float(np.sum(mass))
    return float(np.sum(mass[op.r2_slice]) + mass[0]) / total if total else 0.0


def oracle_eigenpairs(
    op: DiscreteOperator, shift: complex, /, count: int = 1
) -> t.List[t.Tuple[complex, GraphFunction]]:
    """Eigenpairs nearest ``shift`` by shift-invert Arnoldi, sorted by distance to the shift.

    Eigenvectors are scaled to unit weighted norm. A residual ``||(A - mu) v|| / ||v||`` above
    ``1e-8 (1 + |mu|)`` is logged.

    :raises SolverError: Arnoldi breakdown or a singular shift
    """
    if not 1 <= count < op.dimension - 1:
        raise ParameterError(f"count must be in [1, {op.dimension - 2}], got {count}")
    try:
        mu, vectors = eigs(op.matrix, k=count, sigma=complex(shift), which="LM")
    except (ArpackError, ArpackNoConvergence, RuntimeError) as exc:
        raise SolverError(f"Shift-invert iteration around {shift} failed: {exc}") from exc
    pairs = []
    for i in np.argsort(np.abs(mu - shift)):
        v = vectors[:, i]
        residual = np.linalg.norm(op.matrix @ v - mu[i] * v) / np.linalg.norm(v)
        if residual > 1e-8 * (1 + abs(mu[i])):
            logger.warning("Eigenpair %s has residual %.2e", mu[i], residual)
        v = v / weighted_norm(op, v)
        pairs.append((complex(mu[i]), to_graph_function(op, v)))
    return pairs


def dense_eigenvalues(op: DiscreteOperator, /) -> np.ndarray:
    """All eigenvalues by a dense solve, for small operators."""
    if op.dimension > 5000:
        raise ParameterError(f"Dense eigenvalues requested for dimension {op.dimension}")
    return np.sort_complex(scipy.linalg.eigvals(op.matrix.toarray()))


@dataclass(frozen=True)
class OracleRun:
    """Crank-Nicolson trajectory: vertex values and weighted norms at every step, states every ``stride``."""

    dt: float
    alpha: float
    vertex: np.ndarray
    norms_sq: np.ndarray
    states: t.List[GraphFunction]
    state_times: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.vertex.size)


def oracle_evolve(
    op: DiscreteOperator, u0: GraphFunction, dt: float, steps: int, /, stride: int = 1
) -> OracleRun:
    """March ``u' = i A u`` with ``(I - i dt/2 A) u_next = (I + i dt/2 A) u``."""
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if steps < 0 or stride < 1:
        raise ParameterError(f"Invalid steps={steps} or stride={stride}")
    identity = sp.identity(op.dimension, dtype=complex, format="csc")
    lhs = (identity - 0.5j * dt * op.matrix).tocsc()
    rhs = (identity + 0.5j * dt * op.matrix).tocsr()
    try:
        lu = splu(lhs)
    except RuntimeError as exc:
        raise SolverError(f"Crank-Nicolson factorization failed: {exc}") from exc

    u = to_vector(op, u0)
    vertex = np.empty(steps + 1, dtype=complex)
    norms_sq = np.empty(steps + 1)
    states, state_times = [], []
    for n in range(steps + 1):
        if n:
            u = lu.solve(rhs @ u)
        vertex[n] = u[0]
        norms_sq[n] = np.sum(op.weights * np.abs(u) ** 2)
        if n % stride == 0:
            states.append(to_graph_function(op, u))
            state_times.append(n * dt)
    if not np.all(np.isfinite(norms_sq)):
        raise SolverError("Crank-Nicolson trajectory is not finite")
    logger.debug("Evolved %d steps of dt=%g, final norm^2 %.6g", steps, dt, norms_sq[-1])
    return OracleRun(dt, op.params.alpha, vertex, norms_sq, states, np.array(state_times))


def energy_identity_check(run: OracleRun, /, alpha: t.Optional[float] = None, rule: str = "trapezoid") -> float:
    """``max_n | ||u_n||^2 - ||u_0||^2 + 2 alpha int_0^t |u(vertex)|^2 | / ||u_0||^2``.

    ``rule="midpoint"`` integrates with the half-step averages the scheme dissipates exactly.
    """
    alpha = run.alpha if alpha is None else alpha
    v = run.vertex
    if rule == "trapezoid":
        increments = 0.5 * run.dt * (np.abs(v[1:]) ** 2 + np.abs(v[:-1]) ** 2)
    elif rule == "midpoint":
        increments = run.dt * np.abs(0.5 * (v[1:] + v[:-1])) ** 2
    else:
        raise ParameterError(f"Unknown quadrature rule {rule!r}")
    flux = np.concatenate([[0.0], np.cumsum(increments)])
    return float(np.max(np.abs(run.norms_sq - run.norms_sq[0] + 2 * alpha * flux)) / run.norms_sq[0])


def green_column(op: DiscreteOperator, edge: Edge, y: float, z: complex, /) -> GraphFunction:
    """Solve ``(A - z^2) u = delta_y`` with the discrete delta ``1 / w_j`` at the node nearest ``y``."""
    params = op.params
    if edge == "r2":
        j = int(round(y / params.h2))
        if not 0 < j < params.n2:
            raise ParameterError(f"Source y={y} is not an interior node of R2")
        index = j
    elif edge == "r1":
        j = int(round(y / params.h1))
        if not 0 < j < params.n1:
            raise ParameterError(f"Source y={y} is not an interior node of R1")
        index = params.n2 - 1 + j
    else:
        raise ParameterError(f"Unknown edge {edge!r}")
    rhs = np.zeros(op.dimension, dtype=complex)
    rhs[index] = 1 / op.weights[index]
    system = (op.matrix - complex(z) ** 2 * sp.identity(op.dimension, format="csc")).tocsc()
    try:
        u = spsolve(system, rhs)
    except RuntimeError as exc:
        raise SolverError(f"Green column solve failed: {exc}") from exc
    return to_graph_function(op, u)


def _smooth_step(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    f = np.where(s > 0, np.exp(-1 / np.where(s > 0, s, 1)), 0.0)
    g = np.where(s < 1, np.exp(-1 / np.where(s < 1, 1 - s, 1)), 0.0)
    return f / (f + g)


@dataclass(frozen=True)
class WeylPacket:
    """``theta(x) = exp(i |lambda| x) chi(x / n - 1) / sqrt(n)`` on R1, supported in ``[0, 2n]``."""

    lambda_abs: float
    n: int

    @staticmethod
    def cutoff(s: np.ndarray) -> np.ndarray:
        """Smooth bump equal to 1 on ``|s| <= 1/2`` and to 0 on ``|s| >= 1``.

        >>> WeylPacket.cutoff(np.array([0.0, 0.5, 1.0])).tolist()
        [1.0, 1.0, 0.0]
        """
        return _smooth_step(2 * (1 - np.abs(s)))

    def sample(self, params: GraphParams, /) -> GraphFunction:
        if 2 * self.n >= params.x_max:
            raise PacketTruncationError(f"Packet support [0, {2 * self.n}] exceeds x_max={params.x_max}")
        return GraphFunction.sample(
            params,
            r1=lambda x: np.exp(1j * self.lambda_abs * x) * self.cutoff(x / self.n - 1) / math.sqrt(self.n),
        )


def weyl_residual(op: DiscreteOperator, lambda_abs: float, n: int, /) -> float:
    """``||(A - lambda^2) theta|| / ||theta||`` in the weighted norm."""
    vec = to_vector(op, WeylPacket(lambda_abs, n).sample(op.params))
    residual = op.matrix @ vec - lambda_abs**2 * vec
    return weighted_norm(op, residual) / weighted_norm(op, vec)


@dataclass(frozen=True)
class WeylStudy:
    lambda_abs: float
    ns: t.List[int]
    residuals: t.List[float]
    packet_norms: t.List[float]
    fitted_C: float
    slope: float


def weyl_study(op: DiscreteOperator, lambda_abs: float, /, ns: t.Sequence[int] = (8, 16, 32, 64)) -> WeylStudy:
    """Residuals over dilations ``n``, the constant ``C = max n * residual`` and the log-log slope."""
    residuals, norms = [], []
    for n in ns:
        residuals.append(weyl_residual(op, lambda_abs, n))
        norms.append(weighted_norm(op, to_vector(op, WeylPacket(lambda_abs, n).sample(op.params))))
    fitted = max(n * r for n, r in zip(ns, residuals))
    return WeylStudy(lambda_abs, list(ns), residuals, norms, fitted, loglog_slope(ns, residuals))


@dataclass(frozen=True)
class Adjudication:
    root: complex
    oracle_mu: complex
    distance: float
    closure: Closure
    h1: float
    h2: float
    verdict: t.Literal["confirmed", "refuted", "layer-dependent"]
    tolerance: float
    layer_strength: float = 0.0

    def as_json(self) -> t.Dict[str, t.Any]:
        data = {
            "root": complex_pair(self.root),
            "oracle_mu": complex_pair(self.oracle_mu),
            "distance": self.distance,
            "closure": self.closure,
            "h1": self.h1,
            "h2": self.h2,
            "verdict": self.verdict,
            "tolerance": self.tolerance,
        }
        if self.closure == "absorbing_layer":
            data["layer_strength"] = self.layer_strength
            data["layer_fraction"] = LAYER_FRACTION
        return data


def adjudicate(
    root: complex, params: GraphParams, /, closure: t.Optional[Closure] = None, count: int = 6
) -> Adjudication:
    """Decide whether ``root ** 2`` is an eigenvalue of the discretized operator.

    A root is confirmed when a discrete eigenvalue lies within the discretization tolerance of
    ``root ** 2`` and (with the Dirichlet end) the eigenvector carries negligible mass on the far half of
    R1. Lower-half-plane roots default to the absorbing layer; a match there is only ``layer-dependent``.
    """
    root = complex(root)
    closure = closure or ("dirichlet" if root.imag >= 0 else "absorbing_layer")
    op = build_discrete_operator(params, closure, wavenumber=max(abs(root), 2 * math.pi / params.L))
    pairs = oracle_eigenpairs(op, root**2, count=min(count, op.dimension - 2))
    mu, mode = pairs[0]
    distance = abs(mu - root**2)
    step = max(params.h1, params.h2)
    tolerance = 50 * step**2 * (1 + abs(root) ** 4) + 1e-8 * (1 + abs(root) ** 2)
    matched = distance < tolerance
    if closure == "dirichlet":
        far = mode.r1_values[params.n1 // 2 :]
        decays = bool(np.sum(np.abs(far) ** 2) * params.h1 < 1e-6)
        verdict = "confirmed" if matched and decays else "refuted"
    else:
        verdict = "layer-dependent" if matched else "refuted"
    logger.info("Root %s: nearest discrete mu %s at distance %.2e -> %s", root, mu, distance, verdict)
    return Adjudication(root, mu, distance, closure, params.h1, params.h2, verdict, tolerance, op.layer_strength)
