"""Acceptance suite: one pass/fail/measured record per criterion, written to ``verify.json``.

Hard criteria decide the exit status; soft ones are measured and reported. Oracle-based thresholds
are stated for ``h2 = L/400`` and relaxed by ``(400 h2 / L)^2`` on coarser grids, while the convergence
criteria compare refinements and hold at any resolution.
"""

import logging
import math
import time
import typing as t
from dataclasses import dataclass, field

import numpy as np

from tadpole.config import RunConfig
from tadpole.core import GraphFunction, GraphParams, norm, vertex_residuals
from tadpole.errors import TadpoleError
from tadpole.evolution import decay_rate_report, energy_trace, modal_expansion
from tadpole.modes import build_confined_mode, build_damped_mode, gram_matrix, riesz_diagnostics
from tadpole.oracle import (
    build_discrete_operator,
    energy_identity_check,
    oracle_eigenpairs,
    oracle_evolve,
    r2_mass_fraction,
    to_vector,
    weyl_study,
)
from tadpole.resolvent import GraphPoint, apply_resolvent, check_printed_split, kernel_decomposed
from tadpole.secular import coefficient_discrepancies, coefficient_system_residuals, eval_coefficients, eval_d
from tadpole.spectrum import (
    alpha_sweep,
    certify,
    continue_root,
    embedded_eigenvalues,
    expansion_deviation,
    lambda_alpha_derivative,
    point_spectrum,
    refine_branch_root,
    search_disk,
)
from tadpole.utils import complex_pair, halton, loglog_slope, quarter_plane_probes

__all__ = ["Status", "CriterionResult", "CRITERIA", "run_verify", "exit_status"]

Status = t.Literal["pass", "fail", "measured", "error"]

REFERENCE_N2 = 400
# probes whose cancelling parts exceed |K| by more than this are held to the scaled bound only
STRICT_GROWTH = 1e5
MODAL_HORIZON = 0.5
TWO_PI = 2 * math.pi

logger = logging.getLogger(__name__)


@dataclass
class CriterionResult:
    number: int
    title: str
    hard: bool
    status: Status = "measured"
    measured: t.Dict[str, t.Any] = field(default_factory=dict)
    seconds: float = 0.0

    def as_json(self) -> t.Dict[str, t.Any]:
        return {
            "criterion": self.number,
            "title": self.title,
            "kind": "hard" if self.hard else "soft",
            "status": self.status,
            "measured": self.measured,
            "seconds": round(self.seconds, 3),
        }


class _Context(t.NamedTuple):
    n2: int
    relax: float
    dt: float
    tmax: float


def _context(config: RunConfig) -> _Context:
    n2 = max(8, int(round(config.L / config.h2)))
    n2 += n2 % 2
    return _Context(n2, max(1.0, (REFERENCE_N2 / n2) ** 2), config.dt, config.tmax)


def _gaussian_on_loop(params: GraphParams, width: float) -> GraphFunction:
    centre = params.L / 2
    return GraphFunction.sample(params, r2=lambda x: np.exp(-0.5 * ((x - centre) / width) ** 2))


def _normalized(f: GraphFunction, params: GraphParams) -> GraphFunction:
    return f * (1 / norm(f, params))


def _confined_eigenvalue(params: GraphParams, k: int, target: complex) -> complex:
    op = build_discrete_operator(params, wavenumber=TWO_PI * k / params.L)
    pairs = oracle_eigenpairs(op, target, count=6)
    mu, _ = max(pairs, key=lambda pair: r2_mass_fraction(op, to_vector(op, pair[1])))
    return mu


def embedded_spectrum(ctx: _Context, /) -> t.Tuple[bool, t.Dict[str, t.Any]]:
    """Secular determinant vanishes on ``2 k pi / L``; the oracle recovers ``k^2`` at second order."""
    d_max = 0.0
    for alpha in (0.5, 1.0):
        params = GraphParams.from_resolution(TWO_PI, alpha, n2=16, x_factor=4.0)
        for point in embedded_eigenvalues(5, params):
            d_max = max(d_max, abs(eval_d(point.lam, params)))
    steps, errors = [], {k: [] for k in range(1, 6)}
    for level in range(3):
        params = GraphParams.from_resolution(TWO_PI, 1.0, n2=ctx.n2 * 2**level, x_factor=4.0)
        steps.append(params.h2)
        for k in errors:
            mu = _confined_eigenvalue(params, k, complex(k * k))
            errors[k].append(abs(mu - k * k) / (k * k))
    slopes = {k: loglog_slope(steps, errs) for k, errs in errors.items()}
    base = max(errs[0] for errs in errors.values())
    passed = d_max < 1e-12 and base < 1e-3 * ctx.relax and all(abs(s - 2) <= 0.2 for s in slopes.values())
    return passed, {"max_abs_d": d_max, "max_relative_error": base, "richardson_slopes": slopes}


def coefficient_master_check(ctx: _Context, /) -> t.Tuple[bool, t.Dict[str, t.Any]]:
    """The nine coefficients solve every continuity/Kirchhoff system at 100 quarter-plane probes."""
    params = GraphParams.from_resolution(TWO_PI, 1.0, n2=16, x_factor=4.0)
    worst, identities, printed = 0.0, True, 0.0
    for z in quarter_plane_probes(100):
        c = eval_coefficients(z, params)
        worst = max(worst, float(np.max(coefficient_system_residuals(c, params))))
        identities = identities and c.F2 == c.G1 and c.H1 == c.E * c.G1
        printed = max(printed, max(coefficient_discrepancies(z, params).values()))
    passed = worst < 1e-10 and identities
    return passed, {"max_relative_residual": worst, "exact_identities": identities, "printed_max_discrepancy": printed}


def _ode_residual(u: GraphFunction, g: GraphFunction, z: complex, params: GraphParams) -> float:
    worst = 0.0
    for values, source, h in ((u.r2_values, g.r2_values, params.h2), (u.r1_values, g.r1_values, params.h1)):
        second = (values[2:] - 2 * values[1:-1] + values[:-2]) / h**2
        worst = max(worst, float(np.max(np.abs(-second - z * z * values[1:-1] - source[1:-1]))))
    return worst / float(np.max(np.abs(g.r2_values)))


def resolvent_correctness(ctx: _Context, /) -> t.Tuple[bool, t.Dict[str, t.Any]]:
    """ODE residual, vertex conditions and the first resolvent identity for a Gaussian source."""
    z, w = complex(-1, 2), complex(-1, 3)
    residuals, vertex = [], []
    for level in range(2):
        params = GraphParams.from_resolution(TWO_PI, 1.0, n2=ctx.n2 * 2**level, x_factor=8.0)
        g = _gaussian_on_loop(params, 1.0)
        u = apply_resolvent(g, z, params)
        residuals.append(_ode_residual(u, g, z, params))
        vertex.append(vertex_residuals(u, params).max_abs() / float(np.max(np.abs(u.r2_values))))
    params = GraphParams.from_resolution(TWO_PI, 1.0, n2=ctx.n2, x_factor=8.0)
    g = _gaussian_on_loop(params, 1.0)
    rz, rw = apply_resolvent(g, z, params), apply_resolvent(g, w, params)
    lhs = rz - rw
    rhs = (z * z - w * w) * apply_resolvent(rw, z, params)
    identity = norm(lhs - rhs, params) / norm(lhs, params)
    ode_ratio = residuals[0] / residuals[1]
    vertex_ratio = vertex[0] / vertex[1] if vertex[1] else math.inf
    passed = (
        residuals[0] < 1e-4 * ctx.relax
        and ode_ratio >= 3
        and (vertex[0] < 1e-6 or vertex_ratio >= 3)
        and identity < 1e-4 * ctx.relax
    )
    return passed, {
        "ode_residual": residuals,
        "ode_order": math.log2(ode_ratio),
        "vertex_residual": vertex,
        "vertex_ratio": vertex_ratio,
        "resolvent_identity": identity,
    }


def kernel_decomposition(ctx: _Context, /) -> t.Tuple[bool, t.Dict[str, t.Any]]:
    """Sum identity of the three kernel parts and the pole behaviour of the point-spectrum parts."""
    params = GraphParams.from_resolution(TWO_PI, 1.0, n2=16, x_factor=4.0)
    report = check_printed_split(params, probes=20)
    L = params.L
    worst, strict, strict_probes = 0.0, 0.0, 0
    for u in halton(20, 4):
        x, y = GraphPoint("r2", u[0] * L), GraphPoint("r2", u[1] * L)
        z = complex(-5 + 5 * u[2], 0.1 + 4.9 * u[3])
        parts = kernel_decomposed(x, y, z, params)
        worst = max(worst, parts.relative_defect())
        if parts.growth() <= STRICT_GROWTH:
            strict_probes += 1
            strict = max(strict, parts.sum_defect() / (1 + abs(parts.total)))

    x, y = GraphPoint("r2", 0.3 * L), GraphPoint("r2", 0.2 * L)
    embedded = TWO_PI / L
    residues = [1j * eps * kernel_decomposed(x, y, embedded + 1j * eps, params).k_pp_plus for eps in (1e-3, 1e-4, 1e-5)]
    plus_limit = abs(residues[-1] - residues[-2]) < 1e-3 * abs(residues[-1]) and abs(residues[-1]) > 1e-8

    measured: t.Dict[str, t.Any] = {
        "path": report.path,
        "printed_failures": report.failures,
        "max_relative_defect": worst,
        "defect_scale": "1 + |K| + |K_c| + |K_pp_plus| + |K_pp_minus|",
        "max_defect_relative_to_kernel": strict,
        "probes_relative_to_kernel": strict_probes,
        "growth_limit": STRICT_GROWTH,
        "k_pp_plus_residues": [complex_pair(r) for r in residues],
        "notes": report.notes,
    }
    minus_pole = False
    genuine = GraphParams.from_resolution(1.0, 11.5, n2=16, x_factor=4.0)
    roots = search_disk(genuine).roots
    if roots:
        lam = roots[0].lam
        gx, gy = GraphPoint("r2", 0.3), GraphPoint("r2", 0.2)
        growth = [
            delta * abs(kernel_decomposed(gx, gy, lam + delta * complex(1, 1) / math.sqrt(2), genuine).k_pp_minus)
            for delta in (1e-2, 1e-3, 1e-4)
        ]
        measured["k_pp_minus_root"] = complex_pair(lam)
        measured["k_pp_minus_times_distance"] = growth
        minus_pole = bool(abs(growth[-1] - growth[-2]) < 0.1 * growth[-1])
        measured["k_pp_minus_simple_pole"] = minus_pole
    return worst < 1e-10 and strict < 1e-10 and plus_limit and minus_pole, measured


def spectrum_certification(ctx: _Context, /) -> t.Tuple[bool, t.Dict[str, t.Any]]:
    """Winding count equals the refined roots; asymptotic deviation decays; alpha-derivative formula holds."""
    nmax = 30
    params = GraphParams.from_resolution(TWO_PI, 1.0, n2=16, x_factor=4.0)
    points = point_spectrum(nmax, params, kmax=nmax)
    certificate = certify(points, nmax, params)
    residual = max(p.residual for p in points)
    branch = {}
    for p in points:
        if p.family != "embedded" and p.index >= 1:
            branch.setdefault(p.index, p)
    tail = [n for n in sorted(branch) if n >= 8]
    minus = [expansion_deviation(branch[n], params, "minus") for n in tail]
    plus = [expansion_deviation(branch[n], params, "plus") for n in tail]
    slope = loglog_slope(tail, minus)
    delta, derivative_error = 1e-5, 0.0
    for n in (1, 10, 30):
        lam = branch[n].lam
        up = refine_branch_root(lam, params.replace(alpha=1.0 + delta))
        down = refine_branch_root(lam, params.replace(alpha=1.0 - delta))
        fd = (up - down) / (2 * delta)
        derivative_error = max(derivative_error, abs(fd - lambda_alpha_derivative(lam, params)))
    passed = certificate.certified and residual < 1e-10 and slope <= -0.8 and derivative_error < 1e-4
    return passed, {
        "winding_count": certificate.winding_count,
        "roots_found": certificate.roots_found,
        "max_residual": residual,
        "deviation_slope": slope,
        "plus_sign_deviation_last": plus[-1] if plus else None,
        "derivative_error": derivative_error,
    }


def riesz_proxy(ctx: _Context, /) -> t.Tuple[bool, t.Dict[str, t.Any]]:
    """Normalized loop Gram matrix of the branch family ``n <= 100`` against ``n <= 50``."""
    params = GraphParams.from_resolution(TWO_PI, 1.0, n2=16, x_factor=4.0)
    modes = [build_damped_mode(continue_root(n, params), params) for n in range(1, 101)]
    G = gram_matrix(modes, params, segment="r2_only", method="exact", normalize=True)
    half, full = riesz_diagnostics(G.truncated(50)), riesz_diagnostics(G)
    min_change = abs(full.min_eig - half.min_eig) / half.min_eig
    c_change = abs(full.fitted_C - half.fitted_C) / half.fitted_C if half.fitted_C else 0.0
    passed = half.min_eig > 0 and full.min_eig > 0 and min_change < 0.1
    return passed, {
        "min_eig": [half.min_eig, full.min_eig],
        "max_eig": [half.max_eig, full.max_eig],
        "min_eig_change": min_change,
        "fitted_C": [half.fitted_C, full.fitted_C],
        "fitted_C_change": c_change,
        "fitted_C_stable": c_change < 0.1,
    }


def energy_identity(ctx: _Context, /) -> t.Tuple[bool, t.Dict[str, t.Any]]:
    """Crank-Nicolson energy identity for a Gaussian on the loop; a confined mode keeps its norm."""
    residuals = []
    for level in range(2):
        params = GraphParams.from_resolution(TWO_PI, 1.0, n2=ctx.n2 * 2**level, x_factor=4.0)
        dt = ctx.dt / 2**level
        op = build_discrete_operator(params)
        u0 = _gaussian_on_loop(params, 0.5)
        run = oracle_evolve(op, u0, dt, int(round(ctx.tmax / dt)), stride=10**9)
        residuals.append(energy_identity_check(run))
    params = GraphParams.from_resolution(TWO_PI, 1.0, n2=ctx.n2, x_factor=4.0)
    op = build_discrete_operator(params)
    run = oracle_evolve(op, build_confined_mode(1, params).sample(params), ctx.dt, int(round(ctx.tmax / ctx.dt)), stride=10**9)
    drift = float(np.max(np.abs(run.norms_sq / run.norms_sq[0] - 1)))
    ratio = residuals[0] / residuals[1]
    passed = residuals[0] < 1e-3 * ctx.relax and ratio >= 3 and drift < 10 * params.h2**2
    return passed, {"identity_residual": residuals, "refinement_ratio": ratio, "confined_norm_drift": drift}


def _modal_vs_oracle(params: GraphParams, chosen, dt: float, horizon: float) -> float:
    phi = build_confined_mode(1, params).sample(params)
    psi = build_damped_mode(chosen[-1], params).sample(params)
    u0 = _normalized(phi + psi, params)
    expansion = modal_expansion(u0, chosen, params)
    steps = int(round(horizon / dt))
    run = oracle_evolve(build_discrete_operator(params), u0, dt, steps, stride=max(1, steps // 10))
    return max(norm(state - expansion.at(s), params) for state, s in zip(run.states, run.state_times))


def modal_decay(ctx: _Context, /) -> t.Tuple[bool, t.Dict[str, t.Any]]:
    """Energy split of ``psi + phi`` with a genuine damped mode, checked against the oracle."""
    # the genuine mode decays like e^{-x} on R1, so x_max = 16 leaves a tail far below the grid error
    params = GraphParams.from_resolution(1.0, 11.5, n2=ctx.n2, x_factor=16.0)
    roots = search_disk(params).roots
    if not roots:
        return False, {"reason": "no genuine damped eigenvalue for alpha = 11.5, L = 1"}
    chosen = embedded_eigenvalues(1, params) + [roots[0]]
    phi = build_confined_mode(1, params).sample(params)
    psi = build_damped_mode(roots[0], params).sample(params)
    u0 = _normalized(phi + psi, params)
    trace = energy_trace(u0, chosen, np.linspace(0.0, 1.0, 11), params)
    plus_drift = float(np.max(np.abs(trace.E_plus - trace.E_plus[0])))
    diffs = [
        _modal_vs_oracle(params, chosen, ctx.dt, MODAL_HORIZON),
        _modal_vs_oracle(params.refined(2), chosen, ctx.dt / 2, MODAL_HORIZON),
    ]
    ratio = diffs[0] / diffs[1] if diffs[1] else math.inf
    report = decay_rate_report(chosen, params)
    reference = decay_rate_report(
        point_spectrum(10, GraphParams.from_resolution(TWO_PI, 1.0, n2=16, x_factor=4.0), disk=False),
        GraphParams.from_resolution(TWO_PI, 1.0, n2=16, x_factor=4.0),
    )
    passed = plus_drift < 1e-10 and trace.decay_bound_holds and (ratio >= 3 or diffs[0] < 1e-8)
    return passed, {
        "root": complex_pair(roots[0].lam),
        "omega_hat": trace.omega_hat,
        "E_plus_drift": plus_drift,
        "decay_bound_holds": trace.decay_bound_holds,
        "energy_balance_defect": trace.energy_balance_defect,
        "modal_vs_oracle": diffs,
        "modal_vs_oracle_ratio": ratio,
        "oracle_horizon": MODAL_HORIZON,
        "x_max": params.x_max,
        "decay_rates": report.as_json(),
        "decay_rates_alpha1_L2pi": reference.as_json(),
    }


def weyl_sequence(ctx: _Context, /) -> t.Tuple[bool, t.Dict[str, t.Any]]:
    """Residual of the dilated packets at ``|lambda| = 1`` decays like ``1/n``."""
    params = GraphParams.from_resolution(TWO_PI, 1.0, n2=ctx.n2, x_factor=24.0)
    op = build_discrete_operator(params)
    study = weyl_study(op, 1.0)
    return abs(study.slope + 1) <= 0.25, {
        "ns": study.ns,
        "residuals": study.residuals,
        "packet_norms": study.packet_norms,
        "fitted_C": study.fitted_C,
        "slope": study.slope,
    }


def figure_dataset(ctx: _Context, /) -> t.Tuple[bool, t.Dict[str, t.Any]]:
    """Two sweeps over ``alpha`` produce identical rows."""
    first, second = alpha_sweep(), alpha_sweep()
    rate_gap = max(abs(row[4] - row[5]) for row in first)
    return first == second and len(first) == 120, {"rows": len(first), "max_gap_to_reference": rate_gap}


CRITERIA: t.List[t.Tuple[int, str, bool, t.Callable[[_Context], t.Tuple[bool, t.Dict[str, t.Any]]]]] = [
    (1, "embedded spectrum", True, embedded_spectrum),
    (2, "coefficient master check", True, coefficient_master_check),
    (3, "resolvent correctness", True, resolvent_correctness),
    (4, "kernel decomposition", True, kernel_decomposition),
    (5, "spectrum certification", True, spectrum_certification),
    (6, "riesz diagnostics", True, riesz_proxy),
    (7, "energy identity", True, energy_identity),
    (8, "modal decay", True, modal_decay),
    (9, "weyl residual", True, weyl_sequence),
    (10, "figure dataset", True, figure_dataset),
]


def run_verify(config: RunConfig, /, only: t.Optional[t.Collection[int]] = None) -> t.List[CriterionResult]:
    """Run the criteria (all, or the numbers in ``only``); module errors are recorded, not raised."""
    ctx = _context(config)
    results = []
    for number, title, hard, check in CRITERIA:
        if only is not None and number not in only:
            continue
        result = CriterionResult(number, title, hard)
        start = time.perf_counter()
        try:
            passed, result.measured = check(ctx)
            result.status = "pass" if passed else "fail"
        except (TadpoleError, ArithmeticError, np.linalg.LinAlgError) as exc:
            logger.error("Criterion %d (%s) raised %s: %s", number, title, type(exc).__name__, exc)
            result.status = "error"
            result.measured = {"error": type(exc).__name__, "message": str(exc)}
        result.seconds = time.perf_counter() - start
        logger.info("Criterion %d (%s): %s in %.1f s", number, title, result.status, result.seconds)
        results.append(result)
    return results


def exit_status(results: t.Sequence[CriterionResult], /) -> int:
    """0 when every hard criterion passes, 2 otherwise."""
    return 0 if all(r.status == "pass" for r in results if r.hard) else 2
