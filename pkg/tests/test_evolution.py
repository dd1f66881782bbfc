import math

import numpy as np
import pytest

from tadpole.core import GraphFunction, GraphParams, norm
from tadpole.errors import OutOfSpanError, ParameterError, ResonanceModeError
from tadpole.evolution import *
from tadpole.modes import build_confined_mode, build_damped_mode
from tadpole.spectrum import continue_root, embedded_eigenvalues, search_disk
from tadpole.utils import read_csv


@pytest.fixture(scope="module")
def loop_params():
    return GraphParams.from_resolution(2 * math.pi, 1.0, n2=64, x_factor=4.0)


@pytest.fixture(scope="module")
def disk_params():
    return GraphParams.from_resolution(1.0, 11.5, n2=400, x_factor=32.0)


@pytest.fixture(scope="module")
def mixed(disk_params):
    """First confined mode plus the first genuine damped mode, normalized."""
    points = embedded_eigenvalues(1, disk_params) + search_disk(disk_params).roots[:1]
    u0 = build_confined_mode(1, disk_params).sample(disk_params) + build_damped_mode(points[1], disk_params).sample(
        disk_params
    )
    return points, u0 * (1 / norm(u0, disk_params))


def test_confined_expansion_is_periodic(loop_params):
    points = embedded_eigenvalues(2, loop_params)
    phi = [build_confined_mode(k, loop_params).sample(loop_params) for k in (1, 2)]
    u0 = phi[0] + 2 * phi[1]
    expansion = modal_expansion(u0, points, loop_params)
    assert np.allclose(expansion.coeffs, [1, 2], atol=1e-12)
    assert expansion.residual < 1e-12
    u = evolve_modal(u0, points, 0.7, loop_params)
    assert norm(u, loop_params) == pytest.approx(norm(u0, loop_params), rel=1e-12)
    assert np.allclose(expansion.at(2 * math.pi).r2_values, u0.r2_values, atol=1e-10)


def test_resonance_candidates_are_rejected(loop_params):
    point = continue_root(3, loop_params)
    assert point.family == "resonance_candidate"
    u0 = build_confined_mode(1, loop_params).sample(loop_params)
    with pytest.raises(ResonanceModeError):
        modal_expansion(u0, [point], loop_params)


def test_out_of_span(loop_params):
    u0 = GraphFunction.sample(loop_params, r2=lambda x: np.exp(-((x - 2.0) ** 2)))
    with pytest.raises(OutOfSpanError) as info:
        modal_expansion(u0, embedded_eigenvalues(1, loop_params), loop_params)
    assert info.value.residual > SPAN_TOL


def test_expansion_needs_points(loop_params):
    with pytest.raises(ParameterError):
        modal_expansion(GraphFunction.zeros(loop_params), [], loop_params)


def test_energy_split(mixed, disk_params):
    points, u0 = mixed
    times = np.linspace(0.0, 1.0, 11)
    trace = energy_trace(u0, points, times, disk_params)
    assert trace.expansion_residual < 1e-8
    assert np.allclose(trace.E_plus, trace.E_plus[0], rtol=1e-10)
    assert np.allclose(trace.E, trace.E_plus + trace.E_minus, rtol=1e-8)
    assert trace.omega_hat == pytest.approx(points[1].lam_sq.imag)
    assert np.allclose(trace.E_minus, np.exp(-2 * trace.omega_hat * times) * trace.E_minus[0], rtol=1e-8)
    assert trace.decay_bound_holds
    assert trace.energy_balance_defect < 1e-6
    assert np.all(trace.E <= trace.bound * (1 + 1e-8))


def test_modal_evolution_is_linear(mixed, disk_params):
    points, u0 = mixed
    v0 = build_confined_mode(1, disk_params).sample(disk_params)
    a, b = 0.6 - 0.3j, 1.7j
    combined = evolve_modal(a * u0 + b * v0, points, 0.3, disk_params)
    separate = a * evolve_modal(u0, points, 0.3, disk_params) + b * evolve_modal(v0, points, 0.3, disk_params)
    assert norm(combined - separate, disk_params) < 1e-8


def test_modal_evolution_is_a_semigroup(mixed, disk_params):
    points, u0 = mixed
    stepped = evolve_modal(evolve_modal(u0, points, 0.2, disk_params), points, 0.15, disk_params)
    direct = evolve_modal(u0, points, 0.35, disk_params)
    assert norm(stepped - direct, disk_params) < 1e-8


def test_energy_without_damped_modes(loop_params):
    points = embedded_eigenvalues(1, loop_params)
    u0 = build_confined_mode(1, loop_params).sample(loop_params)
    trace = energy_trace(u0, points, [0.0, 1.0], loop_params)
    assert math.isinf(trace.omega_hat)
    assert trace.decay_bound_holds
    assert np.allclose(trace.flux_integral, 0)
    with pytest.raises(ParameterError):
        energy_trace(u0, points, [1.0, 0.0], loop_params)


def test_energy_csv(mixed, disk_params, tmp_path):
    points, u0 = mixed
    trace = energy_trace(u0, points, [0.0, 0.5], disk_params)
    path = write_energy_csv(trace, tmp_path / "energy.csv", header={"command": "evolve"})
    rows = read_csv(path)
    assert list(rows[0]) == ENERGY_COLUMNS
    assert float(rows[0]["t"]) == 0.0
    assert float(rows[1]["E_minus"]) < float(rows[0]["E_minus"])


def test_decay_rate_report():
    params = GraphParams.from_resolution(2 * math.pi, 0.5, n2=16, x_factor=4.0)
    points = embedded_eigenvalues(2, params) + [continue_root(n, params) for n in (1, 2, 3)]
    report = decay_rate_report(points, params)
    assert report.sup_re_i_lambda_sq == pytest.approx(max(-p.lam_sq.imag for p in points[2:]))
    assert report.reference_rate == pytest.approx(8 * 0.5 / (3 * 2 * math.pi))
    assert report.as_json()["indices"] == [1, 2, 1, 2, 3]
    with pytest.raises(ParameterError):
        decay_rate_report([], params)


def test_decay_rate_report_without_damping():
    params = GraphParams.from_resolution(2 * math.pi, 0.0, n2=16, x_factor=4.0)
    report = decay_rate_report(embedded_eigenvalues(2, params), params)
    assert report.sup_re_i_lambda_sq == 0
    assert report.agrees
