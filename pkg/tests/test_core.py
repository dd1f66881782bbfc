import math

import numpy as np
import pytest

from tadpole.core import *
from tadpole.errors import ParameterError, ShapeError

INVALID_PARAMS = [
    ({"L": 0.0, "alpha": 1.0, "x_max": 8.0, "h1": 0.5, "h2": 0.5}, "Loop length"),
    ({"L": 2.0, "alpha": -1.0, "x_max": 8.0, "h1": 0.5, "h2": 0.5}, "Damping"),
    ({"L": 2.0, "alpha": 1.0, "x_max": 6.0, "h1": 0.5, "h2": 0.5}, "shorter than 4L"),
    ({"L": 2.0, "alpha": 1.0, "x_max": 8.0, "h1": 0.3, "h2": 0.5}, "does not divide"),
    ({"L": 2.0, "alpha": 1.0, "x_max": 8.0, "h1": 0.5, "h2": 2 / 3}, "must be even"),
    ({"L": 2.0, "alpha": 1.0, "x_max": 8.0, "h1": 0.0, "h2": 0.5}, "Grid steps"),
]


@pytest.fixture
def params():
    return GraphParams.from_resolution(2 * math.pi, 1.0, n2=64, x_factor=4.0)


@pytest.mark.parametrize(["values", "message"], INVALID_PARAMS)
def test_invalid_params(values, message):
    with pytest.raises(ParameterError, match=message):
        GraphParams(**values)


def test_from_resolution_rounds_to_even_steps():
    params = GraphParams.from_resolution(1.0, 0.5, n2=10, x_factor=4.05)
    assert params.n2 == 10
    assert params.n1 % 2 == 0
    assert params.x_max >= 4.05
    assert params.r1_grid[-1] == pytest.approx(params.x_max)


def test_refined_halves_steps(params):
    fine = params.refined(2)
    assert (fine.n1, fine.n2) == (2 * params.n1, 2 * params.n2)
    assert fine.alpha == params.alpha and fine.L == params.L


def test_confined_mode_is_normalized(params):
    k = 2
    f = GraphFunction.sample(params, r2=lambda x: math.sqrt(2 / params.L) * np.sin(2 * k * math.pi * x / params.L))
    assert norm(f, params) == pytest.approx(1.0, abs=1e-12)


def test_inner_product_is_sesquilinear(params):
    f = GraphFunction.sample(params, lambda x: np.exp(-x), lambda x: np.cos(x))
    g = GraphFunction.sample(params, lambda x: np.exp(-2 * x), lambda x: np.sin(x) + 1)
    assert inner_product(2j * f, g, params) == pytest.approx(2j * inner_product(f, g, params))
    assert inner_product(f, 2j * g, params) == pytest.approx(-2j * inner_product(f, g, params))
    assert inner_product(g, f, params) == pytest.approx(inner_product(f, g, params).conjugate())


def test_vertex_residuals_of_confined_mode(params):
    f = GraphFunction.sample(params, r2=lambda x: np.sin(2 * math.pi * x / params.L))
    residual = vertex_residuals(f, params)
    assert abs(residual.continuity_01) < 1e-12
    assert abs(residual.continuity_0L) < 1e-12
    assert abs(residual.kirchhoff) < 1e-3


def test_vertex_residuals_detect_discontinuity(params):
    f = GraphFunction.sample(params, lambda x: 1 + 0 * x, lambda x: 2 + 0 * x)
    assert vertex_residuals(f, params).continuity_01 == -1


def test_shape_mismatch(params):
    f = GraphFunction.zeros(params)
    g = GraphFunction.zeros(params.refined(2))
    with pytest.raises(ShapeError):
        f + g
    with pytest.raises(ShapeError):
        g.check(params)
    with pytest.raises(ShapeError):
        GraphFunction(np.zeros((2, 2)), np.zeros(3))


def test_samples_are_read_only(params):
    f = GraphFunction.zeros(params)
    with pytest.raises(ValueError):
        f.r1_values[0] = 1


@pytest.mark.parametrize("intervals", [0, 1, 3])
def test_simpson_needs_even_intervals(intervals):
    with pytest.raises(ShapeError):
        simpson_weights(intervals, 0.1)


def test_csv_keeps_provenance_comment(params, tmp_path):
    f = GraphFunction.sample(params, lambda x: np.exp(-x) * (1 + 1j), lambda x: np.sin(x))
    path = tmp_path / "f.csv"
    f.to_csv(path, params, header='{"command": "modes"}')
    assert path.read_text().startswith('# {"command": "modes"}\n')
    restored = GraphFunction.from_csv(path)
    assert np.array_equal(restored.r1_values, f.r1_values)
    assert np.array_equal(restored.r2_values, f.r2_values)


def test_loop_packet_norm():
    params = GraphParams.from_resolution(2 * math.pi, 1.0, n2=400, x_factor=4.0)
    lam = complex(1, math.log(3) / params.L)
    f = GraphFunction.sample(params, r2=lambda x: np.exp(1j * lam * x))
    expected = 4 * params.L / (9 * math.log(3))
    assert inner_product(f, f, params) == pytest.approx(expected, abs=2e-3)
    assert expected == pytest.approx(2.54, abs=1e-2)
