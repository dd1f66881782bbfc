import ast
import inspect
import math

import numpy as np
import pytest

import tadpole.oracle
from tadpole.core import GraphFunction, GraphParams
from tadpole.errors import PacketTruncationError, ParameterError
from tadpole.oracle import *
from tadpole.spectrum import search_disk


@pytest.fixture(scope="module")
def params():
    return GraphParams.from_resolution(2 * math.pi, 1.0, n2=40, x_factor=4.0)


@pytest.fixture(scope="module")
def op(params):
    return build_discrete_operator(params)


def _gaussian(params, width=0.5):
    return GraphFunction.sample(params, r2=lambda x: np.exp(-0.5 * ((x - params.L / 2) / width) ** 2))


def test_oracle_is_independent_of_closed_forms():
    tree = ast.parse(inspect.getsource(tadpole.oracle))
    imported = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.ImportFrom) and node.module:
            imported.add(node.module)
        elif isinstance(node, ast.Import):
            imported.update(alias.name for alias in node.names)
    closed_forms = {"tadpole.secular", "tadpole.spectrum", "tadpole.resolvent", "tadpole.modes", "tadpole.evolution"}
    assert not imported & closed_forms


def test_dimension_and_weights(op, params):
    assert op.dimension == params.n1 + params.n2 - 1
    assert op.weights[0] == pytest.approx((params.h1 + 2 * params.h2) / 2)
    assert np.sum(op.weights) == pytest.approx(params.L + params.x_max - params.h1 / 2)


def test_dissipation_is_at_the_vertex(op):
    rng = np.random.default_rng(7)
    u = rng.standard_normal(op.dimension) + 1j * rng.standard_normal(op.dimension)
    form = np.vdot(u, op.weights * (op.matrix @ u))
    assert form.imag == pytest.approx(op.params.alpha * abs(u[0]) ** 2, rel=1e-10)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_confined_mode_is_discrete_eigenvector(op, params, k):
    phi = GraphFunction.sample(params, r2=lambda x: np.sin(2 * k * math.pi * x / params.L))
    v = to_vector(op, phi)
    mu = 2 / params.h2**2 * (1 - math.cos(2 * k * math.pi * params.h2 / params.L))
    residual = op.matrix @ v - mu * v
    assert weighted_norm(op, residual) < 1e-9 * weighted_norm(op, v)
    assert mu == pytest.approx(k * k, rel=3e-2)


def test_eigenvalues_lie_in_closed_upper_half_plane():
    small = build_discrete_operator(GraphParams.from_resolution(2 * math.pi, 1.0, n2=8, x_factor=4.0))
    mu = dense_eigenvalues(small)
    assert mu.size == small.dimension
    assert np.all(mu.imag > -1e-10)


def test_eigenpairs_near_confined_eigenvalue(op):
    pairs = oracle_eigenpairs(op, 1.0, count=3)
    mu, mode = max(pairs, key=lambda pair: r2_mass_fraction(op, to_vector(op, pair[1])))
    assert abs(mu - 1) < 1e-2
    assert weighted_norm(op, to_vector(op, mode)) == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        oracle_eigenpairs(op, 1.0, count=0)


def test_crank_nicolson_dissipation(op, params):
    run = oracle_evolve(op, _gaussian(params), 1e-2, 50, stride=10)
    assert len(run.states) == 6
    assert run.state_times.tolist() == pytest.approx([0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    assert np.all(np.diff(run.norms_sq) <= 1e-14)
    assert energy_identity_check(run, rule="midpoint") < 1e-10
    assert energy_identity_check(run) < 1e-3
    with pytest.raises(ParameterError):
        energy_identity_check(run, rule="simpson")


def test_undamped_evolution_conserves_norm(params):
    op = build_discrete_operator(params.replace(alpha=0.0))
    run = oracle_evolve(op, _gaussian(params), 1e-2, 20)
    assert np.allclose(run.norms_sq, run.norms_sq[0], rtol=1e-12)


def test_evolve_arguments(op, params):
    with pytest.raises(ParameterError):
        oracle_evolve(op, _gaussian(params), 0.0, 10)
    with pytest.raises(ParameterError):
        oracle_evolve(op, _gaussian(params), 1e-2, 10, stride=0)


def test_absorbing_layer_is_dissipative(params):
    layer = build_discrete_operator(params, "absorbing_layer")
    assert layer.closure == "absorbing_layer"
    assert layer.layer_strength == pytest.approx(4.0)
    with pytest.raises(ParameterError):
        build_discrete_operator(params, "periodic")


def test_green_column_solves_shifted_system(op, params):
    z = -1 + 2j
    u = green_column(op, "r2", params.L / 4, z)
    v = to_vector(op, u)
    rhs = (op.matrix @ v - z**2 * v) * op.weights
    j = int(round(params.L / 4 / params.h2))
    expected = np.zeros(op.dimension)
    expected[j] = 1
    assert np.allclose(rhs, expected, atol=1e-10)
    with pytest.raises(ParameterError):
        green_column(op, "r2", 0.0, z)


def test_weyl_packet_truncation(params):
    with pytest.raises(PacketTruncationError):
        WeylPacket(2.0, int(params.x_max)).sample(params)


def test_weyl_residual_decays():
    params = GraphParams.from_resolution(1.0, 1.0, n2=40, x_factor=72.0)
    study = weyl_study(build_discrete_operator(params, wavenumber=2.0), 2.0, ns=(8, 16, 32))
    assert study.residuals[0] > study.residuals[1] > study.residuals[2]
    assert -1.4 < study.slope < -0.6
    assert study.fitted_C == pytest.approx(max(n * r for n, r in zip(study.ns, study.residuals)))


@pytest.mark.slow
def test_adjudicate_genuine_root():
    params = GraphParams.from_resolution(1.0, 11.5, n2=200, x_factor=16.0)
    root = search_disk(params).roots[0].lam
    verdict = adjudicate(root, params)
    assert verdict.closure == "dirichlet"
    assert verdict.verdict == "confirmed"
    assert verdict.as_json()["verdict"] == "confirmed"
