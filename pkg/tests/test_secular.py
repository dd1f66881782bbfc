import cmath
import math

import numpy as np
import pytest

from tadpole.core import GraphParams
from tadpole.errors import PoleProximityError, SingularityError
from tadpole.secular import *
from tadpole.utils import quarter_plane_probes

INSTANCES = [(2 * math.pi, 1.0), (2 * math.pi, 0.25), (1.0, 11.5), (3.0, 0.0)]

UPPER_POINTS = [1 + 1j, -2 + 0.5j, 0.3 + 3j, -0.7 + 0.2j]


def _params(L, alpha):
    return GraphParams.from_resolution(L, alpha, n2=8, x_factor=4.0)


@pytest.mark.parametrize(["L", "alpha"], INSTANCES)
def test_determinant_vanishes_on_embedded_lattice(L, alpha):
    params = _params(L, alpha)
    for k in range(1, 6):
        assert abs(eval_d(2 * k * math.pi / L, params)) < 1e-12


@pytest.mark.parametrize(["L", "alpha"], INSTANCES)
@pytest.mark.parametrize("lam", [0.7 - 0.2j, 3.1 + 0.05j, 12.0 - 0.1j])
def test_determinant_factorization(L, alpha, lam):
    params = _params(L, alpha)
    T = cmath.exp(1j * lam * L)
    expected = cmath.exp(-1j * lam * L) * (1 + alpha / lam) * (T - 1) * (T - mode_ratio(lam, params))
    assert eval_d(lam, params) == pytest.approx(expected, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("lam", [0.9 + 0.1j, 5.3 - 0.2j])
def test_determinant_derivative(lam):
    params = _params(2 * math.pi, 1.0)
    step = 1e-6
    numeric = (eval_d(lam + step, params) - eval_d(lam - step, params)) / (2 * step)
    assert eval_d_prime(lam, params) == pytest.approx(numeric, rel=1e-6)


def test_branch_factor_derivative():
    params = _params(1.0, 11.5)
    lam, step = 2.4 + 1.0j, 1e-6
    numeric = (eval_h(lam + step, params) - eval_h(lam - step, params)) / (2 * step)
    assert eval_h_prime(lam, params) == pytest.approx(numeric, rel=1e-6)


def test_vectorized_determinant_matches_scalar():
    params = _params(2 * math.pi, 0.5)
    lams = np.array([0.5 + 0.1j, 2.5 - 0.3j, 7.0 + 0j])
    d, _ = eval_d_array(lams, params)
    assert np.allclose(d, [eval_d(lam, params) for lam in lams], rtol=1e-14, atol=0)


@pytest.mark.parametrize(["L", "alpha"], INSTANCES)
@pytest.mark.parametrize("z", UPPER_POINTS)
def test_coefficients_solve_the_vertex_system(L, alpha, z):
    params = _params(L, alpha)
    c = eval_coefficients(z, params)
    assert np.max(coefficient_system_residuals(c, params)) < 1e-10
    assert c.F2 == c.G1
    assert c.H2 == c.G3
    assert abs(c.H1 - c.E * c.G1) < 1e-14 * (1 + abs(c.H1))


def test_coefficients_on_low_discrepancy_probes():
    params = _params(2 * math.pi, 1.0)
    for z in quarter_plane_probes(50):
        assert np.max(coefficient_system_residuals(eval_coefficients(z, params), params)) < 1e-10


def test_typeset_first_family_agrees():
    report = coefficient_discrepancies(1 + 1j, _params(2 * math.pi, 1.0))
    assert set(report) == {"F1", "F2", "F3", "G1", "G2", "G3", "H1", "H2", "H3"}
    for name in ("G1", "F2", "H1"):
        assert report[name] < 1e-12


def test_singular_points():
    params = _params(2 * math.pi, 1.0)
    with pytest.raises(SingularityError):
        eval_coefficients(0, params)
    with pytest.raises(SingularityError):
        eval_d(0, params)
    with pytest.raises(PoleProximityError) as info:
        mode_ratio(-1.0, params)
    assert info.value.factor == "lambda + alpha"


def test_coefficients_stay_finite_for_large_frequency():
    params = _params(2 * math.pi, 1.0)
    c = eval_coefficients(-40 + 30j, params)
    assert all(cmath.isfinite(value) for name, value in c.as_dict().items() if name != "D_alpha")
