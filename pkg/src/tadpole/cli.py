"""Command-line entry point: ``tadpole spectrum|modes|kernel|evolve|figure2|verify``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
"""

import argparse
import cmath
import logging
import math
import sys
import typing as t

import numpy as np

from tadpole import __version__
from tadpole.config import RunConfig, load_config
from tadpole.core import norm
from tadpole.errors import ConfigError, TadpoleError
from tadpole.evolution import decay_rate_report, energy_trace, write_energy_csv
from tadpole.modes import (
    build_confined_mode,
    build_damped_mode,
    build_generalized_mode,
    cross_family_overlap,
    dissipation_balance,
    gram_matrix,
    riesz_diagnostics,
    write_mode,
)
from tadpole.oracle import build_discrete_operator, energy_identity_check, oracle_evolve
from tadpole.resolvent import GraphPoint, kernel_slice, write_kernel_csv
from tadpole.spectrum import (
    SWEEP_ALPHAS,
    SWEEP_COLUMNS,
    SpectralPoint,
    alpha_sweep,
    certify,
    embedded_eigenvalues,
    expansion_deviation,
    point_spectrum,
    write_spectrum_csv,
)
from tadpole.utils import complex_pair, write_csv, write_json
from tadpole.verify import exit_status, run_verify

__all__ = ["build_arg_parser", "main", "COMMANDS"]

DEVIATION_COLUMNS = ["n", "family", "re_lambda", "im_lambda", "deviation_minus", "deviation_plus"]
ORACLE_ENERGY_COLUMNS = ["t", "E", "flux_integral", "identity_residual"]
KERNEL_Z = complex(-1, 2)
ENERGY_SAMPLES = 500

logger = logging.getLogger("tadpole")


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> t.NoReturn:
        raise ConfigError(message)


def build_arg_parser() -> argparse.ArgumentParser:
    p = _ArgumentParser(prog="tadpole", description="Spectral numerics for the damped Schrodinger operator on the tadpole graph.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS), help="Run product to compute.")
    p.add_argument("--config", default=None, help="JSON file with RunConfig fields.")
    p.add_argument("--L", type=float, default=None, help="Loop length.")
    p.add_argument("--alpha", type=float, default=None, help="Vertex damping.")
    p.add_argument("--nmax", type=int, default=None, help="Largest branch index.")
    p.add_argument("--kmax", type=int, default=None, help="Largest confined index.")
    p.add_argument("--xmax", type=float, default=None, dest="x_max", help="Half-line truncation.")
    p.add_argument("--h1", type=float, default=None, help="Half-line grid step.")
    p.add_argument("--h2", type=float, default=None, help="Loop grid step.")
    p.add_argument("--tmax", type=float, default=None, help="Evolution horizon.")
    p.add_argument("--dt", type=float, default=None, help="Time step.")
    p.add_argument("--out", default=None, dest="out_dir", help="Existing output directory.")
    p.add_argument("--seed-branch", choices=["plus", "minus", "both"], default=None, dest="seed_branch")
    p.add_argument("--verbose", "-v", action="store_true", help="Log at DEBUG level.")
    return p


def _overrides(args: argparse.Namespace) -> t.Dict[str, t.Any]:
    keys = ("L", "alpha", "nmax", "kmax", "x_max", "h1", "h2", "tmax", "dt", "out_dir", "seed_branch")
    return {key: getattr(args, key) for key in keys}


def _header(config: RunConfig, command: str, **extra) -> t.Dict[str, t.Any]:
    return {"command": command, "version": __version__, "config": config.as_dict(), **extra}


def _spectrum(config: RunConfig) -> t.List[SpectralPoint]:
    return point_spectrum(
        config.nmax, config.graph_params(), kmax=config.effective_kmax, seed_branch=config.seed_branch
    )


def cmd_spectrum(config: RunConfig, /) -> int:
    """``spectrum.csv`` and ``asymptotic_deviation.csv``; exit 2 when the covering count disagrees."""
    params = config.graph_params()
    points = _spectrum(config)
    out = config.output_path
    write_spectrum_csv(points, out / "spectrum.csv", header=_header(config, "spectrum"))
    rows = [
        [p.index, p.family, p.lam.real, p.lam.imag, expansion_deviation(p, params, "minus"), expansion_deviation(p, params, "plus")]
        for p in points
        if p.family != "embedded" and p.index >= 1
    ]
    write_csv(out / "asymptotic_deviation.csv", DEVIATION_COLUMNS, rows, header=_header(config, "spectrum"))
    lattice = [p for p in embedded_eigenvalues(config.nmax, params) if p.index > config.effective_kmax]
    certificate = certify(points + lattice, config.nmax, params)
    if not certificate.certified:
        logger.error(
            "Covering rectangle %s: winding count %d, roots found %d",
            certificate.rectangle,
            certificate.winding_count,
            certificate.roots_found,
        )
        return 2
    logger.info("Certified %d roots in %s", certificate.winding_count, certificate.rectangle)
    return 0


def cmd_modes(config: RunConfig, /) -> int:
    """``modes/<family>_<index>.csv`` with JSON sidecars and ``modes/gram.json``."""
    params = config.graph_params()
    points = _spectrum(config)
    directory = config.output_path / "modes"
    directory.mkdir(exist_ok=True)
    header = _header(config, "modes")
    confined, branch, balance, chains = [], [], [], []
    disk = 0
    for p in points:
        if p.family == "embedded":
            mode = build_confined_mode(p.index, params)
            confined.append(mode)
        else:
            mode = build_damped_mode(p, params)
            branch.append(mode)
            if mode.square_integrable:
                rate, flux = dissipation_balance(mode, params)
                balance.append({"lambda": complex_pair(p.lam), "im_lambda_sq": rate, "vertex_dissipation": flux})
        if p.index:
            stem = f"{p.family}_{p.index:03d}"
        else:
            disk += 1
            stem = f"{p.family}_disk_{disk:02d}"
        write_mode(mode, params, directory, stem, header=header)
        if abs(p.lam - params.alpha) < 1e-8 * (1 + abs(p.lam)) and abs(cmath.exp(1j * p.lam * params.L) - 1) < 1e-8:
            chain = build_generalized_mode(p, params)
            chains.append({"lambda": complex_pair(p.lam), "mu": complex_pair(chain.mu), "solvability_residual": chain.solvability_residual})
    summary: t.Dict[str, t.Any] = {"provenance": header, "dissipation_balance": balance, "jordan_chains": chains}
    if branch:
        G = gram_matrix(branch, params, segment="r2_only", method="exact", normalize=True)
        diagnostics = riesz_diagnostics(G)
        summary["riesz"] = {
            "indices": G.indices,
            "fitted_C": diagnostics.fitted_C,
            "min_eig": diagnostics.min_eig,
            "max_eig": diagnostics.max_eig,
        }
    if branch and confined:
        summary["max_cross_family_overlap"] = cross_family_overlap(branch, confined, params)
    write_json(directory / "gram.json", summary)
    logger.info("Wrote %d confined and %d branch modes to %s", len(confined), len(branch), directory)
    return 0


def cmd_kernel(config: RunConfig, /) -> int:
    """``kernel.csv``: the kernel parts for a source at ``L/3`` on the loop and ``z = -1 + 2i``."""
    params = config.graph_params()
    y = GraphPoint("r2", params.L / 3)
    parts = kernel_slice(y, KERNEL_Z, params)
    header = _header(config, "kernel", z=complex_pair(KERNEL_Z), source=list(y), split=parts[0].split)
    write_kernel_csv(parts, config.output_path / "kernel.csv", header=header)
    return 0


def cmd_evolve(config: RunConfig, /) -> int:
    """``energy.csv`` (modal), ``oracle_energy.csv`` (Crank-Nicolson) and ``decay_rates.json``.

    The initial datum is the first confined mode plus the first genuine damped mode when one exists.
    """
    params = config.graph_params()
    points = _spectrum(config)
    chosen = [p for p in points if p.family == "embedded" and p.index == 1]
    genuine = [p for p in points if p.family == "damped"]
    u0 = build_confined_mode(1, params).sample(params)
    if genuine:
        chosen.append(genuine[0])
        u0 = u0 + build_damped_mode(genuine[0], params).sample(params)
    else:
        logger.warning("No genuine damped eigenvalue for alpha=%g, L=%g; evolving the confined mode only", params.alpha, params.L)
    u0 = u0 * (1 / norm(u0, params))
    steps = int(round(config.tmax / config.dt))
    stride = max(1, steps // ENERGY_SAMPLES)
    times = config.dt * np.arange(0, steps + 1, stride)
    trace = energy_trace(u0, chosen, times, params)
    out = config.output_path
    header = _header(
        config,
        "evolve",
        modes=[complex_pair(p.lam) for p in chosen],
        omega_hat=trace.omega_hat,
        decay_bound_holds=trace.decay_bound_holds,
        energy_balance_defect=trace.energy_balance_defect,
    )
    write_energy_csv(trace, out / "energy.csv", header=header)

    run = oracle_evolve(build_discrete_operator(params), u0, config.dt, steps, stride=steps + 1)
    v = np.abs(run.vertex) ** 2
    flux = 2 * params.alpha * np.concatenate([[0.0], np.cumsum(0.5 * config.dt * (v[1:] + v[:-1]))])
    residual = np.abs(run.norms_sq - run.norms_sq[0] + flux) / run.norms_sq[0]
    rows = ([run.times[i], 0.5 * run.norms_sq[i], flux[i], residual[i]] for i in range(0, steps + 1, stride))
    oracle_header = _header(config, "evolve", identity_residual=energy_identity_check(run))
    write_csv(out / "oracle_energy.csv", ORACLE_ENERGY_COLUMNS, rows, header=oracle_header)
    write_json(out / "decay_rates.json", {"provenance": header, **decay_rate_report(points, params).as_json()})
    return 0


def cmd_figure2(config: RunConfig, /) -> int:
    """``figure2.csv``: branch roots ``n = 1..nmax`` for ``L = 2 pi`` over the documented alpha sweep."""
    L = 2 * math.pi
    rows = alpha_sweep(SWEEP_ALPHAS, config.nmax, L)
    header = _header(config, "figure2", alphas=list(SWEEP_ALPHAS), L=L)
    write_csv(config.output_path / "figure2.csv", SWEEP_COLUMNS, rows, header=header)
    return 0


def cmd_verify(config: RunConfig, /) -> int:
    """``verify.json`` with one record per acceptance criterion; exit 0 iff every hard criterion passes."""
    results = run_verify(config)
    status = exit_status(results)
    write_json(
        config.output_path / "verify.json",
        {"provenance": _header(config, "verify"), "exit_status": status, "criteria": [r.as_json() for r in results]},
    )
    return status


COMMANDS: t.Dict[str, t.Callable[[RunConfig], int]] = {
    "spectrum": cmd_spectrum,
    "modes": cmd_modes,
    "kernel": cmd_kernel,
    "evolve": cmd_evolve,
    "figure2": cmd_figure2,
    "verify": cmd_verify,
}


def main(argv: t.Optional[t.List[str]] = None) -> int:
    try:
        args = build_arg_parser().parse_args(argv)
    except ConfigError as exc:
        logging.basicConfig(level=logging.INFO)
        logger.error("%s", exc)
        return 1
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config, overrides=_overrides(args))
        config.graph_params()
        if not config.output_path.is_dir():
            raise ConfigError(f"Output directory {config.output_path} does not exist")
    except ConfigError as exc:
        logger.error("Invalid configuration: %s", exc)
        return 1
    try:
        return COMMANDS[args.command](config)
    except TadpoleError as exc:
        logger.error("%s failed: %s: %s", args.command, type(exc).__name__, exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
