import cmath
import math

import numpy as np
import pytest
from scipy.integrate import simpson

from tadpole.core import GraphFunction, GraphParams, norm, vertex_residuals
from tadpole.errors import ParameterError, PoleProximityError, TailTooLargeError
from tadpole.resolvent import *
from tadpole.utils import halton, read_csv

Z = -1 + 2j


@pytest.fixture(scope="module")
def params():
    return GraphParams.from_resolution(2 * math.pi, 1.0, n2=40, x_factor=8.0)


def _loop_probes(params, count=12):
    return [(u[0] * params.L, u[1] * params.L) for u in halton(count, 2)]


def test_loop_kernel_is_symmetric(params):
    for x, y in _loop_probes(params):
        a = kernel_direct(GraphPoint("r2", x), GraphPoint("r2", y), Z, params)
        b = kernel_direct(GraphPoint("r2", y), GraphPoint("r2", x), Z, params)
        assert a == pytest.approx(b, rel=1e-13, abs=1e-15)


@pytest.mark.parametrize("source", [GraphPoint("r2", 2.0), GraphPoint("r1", 1.5)])
def test_kernel_is_continuous_at_vertex(params, source):
    values = [
        kernel_direct(GraphPoint(edge, x), source, Z, params)
        for edge, x in (("r1", 0.0), ("r2", 0.0), ("r2", params.L))
    ]
    assert values[1] == pytest.approx(values[0], rel=1e-12)
    assert values[2] == pytest.approx(values[0], rel=1e-12)


def test_decomposition_sums_to_kernel(params):
    for x, y in _loop_probes(params, 20):
        parts = kernel_decomposed(GraphPoint("r2", x), GraphPoint("r2", y), Z, params)
        assert parts.split in ("printed", "derived")
        assert parts.relative_defect() < 1e-10
        if parts.growth() <= 1e5:
            assert parts.sum_defect() < 1e-10 * (1 + abs(parts.total))


def test_decomposition_defect_scale():
    parts = KernelParts(GraphPoint("r2", 1.0), GraphPoint("r2", 2.0), 1j, 1 + 0j, 3e6 + 0j, -3e6 + 0j, 1 + 1e-9j)
    assert parts.sum_defect() == pytest.approx(1e-9)
    assert parts.defect_scale() == pytest.approx(1 + 1 + 3e6 + 3e6 + abs(1 + 1e-9j))
    assert parts.growth() == pytest.approx(math.exp(3.0))


@pytest.mark.parametrize("z", [2 + 0.05j, 1.1 + 0.1j, -2.9 + 0.2j])
def test_derived_split_near_real_axis(params, z):
    x, y = 1.3, 4.4
    assert abs(cmath.sin(z * params.L / 2)) < 1
    total = kernel_direct(GraphPoint("r2", x), GraphPoint("r2", y), z, params)
    parts = KernelParts(GraphPoint("r2", x), GraphPoint("r2", y), z, total, *kernel_derived_split(x, y, z, params))
    assert parts.relative_defect() < 1e-12


def test_derived_split_is_regular_at_embedded_pole(params):
    x, y = 1.3, 2.1
    z = 2 + 1e-7j
    k_c, k_plus, _ = kernel_derived_split(x, y, z, params)
    near_c, _, _ = kernel_derived_split(x, y, 2 + 1e-5j, params)
    assert abs(k_plus) > 1e4
    assert abs(k_c - near_c) < 1e-3


def test_off_loop_kernel_is_continuous(params):
    parts = kernel_decomposed(GraphPoint("r1", 1.0), GraphPoint("r2", 2.0), Z, params)
    assert parts.split == "off_loop"
    assert parts.k_pp_plus == 0 and parts.k_pp_minus == 0
    assert parts.k_c == parts.total


def test_printed_split_report(params):
    report = check_printed_split(params, probes=20)
    assert report.probes == 20
    assert report.path == ("printed" if report.failures == 0 else "derived")
    assert bool(report.notes) == (report.path == "derived")


@pytest.mark.parametrize(
    ["x", "y", "z"],
    [
        (GraphPoint("r2", 1.0), GraphPoint("r2", 2.0), 1.0 + 0j),
        (GraphPoint("r2", 1.0), GraphPoint("r2", 2.0), -1 - 1j),
        (GraphPoint("r2", 10.0), GraphPoint("r2", 2.0), Z),
        (GraphPoint("r1", -1.0), GraphPoint("r2", 2.0), Z),
    ],
)
def test_kernel_arguments(params, x, y, z):
    with pytest.raises(ParameterError):
        kernel_direct(x, y, z, params)


def test_pole_proximity_at_embedded_root(params):
    with pytest.raises(PoleProximityError):
        kernel_derived_split(1.0, 2.0, 2 + 1e-12j, params)


def test_apply_resolvent_is_continuous_at_vertex(params):
    g = GraphFunction.sample(params, r2=lambda x: np.exp(-2 * (x - params.L / 2) ** 2))
    u = apply_resolvent(g, Z, params)
    residual = vertex_residuals(u, params)
    scale = np.max(np.abs(u.r2_values))
    assert abs(residual.continuity_01) < 1e-10 * scale
    assert abs(residual.continuity_0L) < 1e-10 * scale


def test_apply_resolvent_matches_kernel(params):
    g = GraphFunction.sample(params, r2=lambda x: np.exp(-2 * (x - params.L / 2) ** 2))
    u = apply_resolvent(g, Z, params)
    x = params.r2_grid[10]
    ys = params.r2_grid
    kernel = np.array([kernel_direct(GraphPoint("r2", x), GraphPoint("r2", y), Z, params) for y in ys])
    reference = simpson(kernel * g.r2_values, dx=params.h2)
    assert u.r2_values[10] == pytest.approx(reference, rel=1e-4)


@pytest.mark.parametrize("y", [GraphPoint("r2", 2.0), GraphPoint("r1", 3.0)])
def test_kernel_derivative_jump(params, y):
    step = 1e-4

    def kernel(x):
        return kernel_direct(GraphPoint(y.edge, x), y, Z, params)

    right = (-3 * kernel(y.x) + 4 * kernel(y.x + step) - kernel(y.x + 2 * step)) / (2 * step)
    left = (3 * kernel(y.x) - 4 * kernel(y.x - step) + kernel(y.x - 2 * step)) / (2 * step)
    assert right - left == pytest.approx(-1, abs=1e-6)


def _gaussian(params):
    return GraphFunction.sample(params, r2=lambda x: np.exp(-0.5 * (x - params.L / 2) ** 2))


def _ode_residual(u, g, params):
    """Largest ``|-u'' - z^2 u - g|`` at interior nodes, relative to ``max |g|``."""
    worst = 0.0
    for values, source, h in ((u.r2_values, g.r2_values, params.h2), (u.r1_values, g.r1_values, params.h1)):
        second = (values[2:] - 2 * values[1:-1] + values[:-2]) / h**2
        worst = max(worst, np.max(np.abs(-second - Z * Z * values[1:-1] - source[1:-1])))
    return worst / np.max(np.abs(g.r2_values))


def test_apply_resolvent_converges_at_second_order():
    residuals = []
    for n2 in (100, 200):
        params = GraphParams.from_resolution(2 * math.pi, 1.0, n2=n2, x_factor=8.0)
        g = _gaussian(params)
        residuals.append(_ode_residual(apply_resolvent(g, Z, params), g, params))
    assert residuals[1] < 2e-3
    assert residuals[0] / residuals[1] >= 3


def test_first_resolvent_identity():
    params = GraphParams.from_resolution(2 * math.pi, 1.0, n2=200, x_factor=8.0)
    g = _gaussian(params)
    w = -1 + 3j
    rz, rw = apply_resolvent(g, Z, params), apply_resolvent(g, w, params)
    lhs = rz - rw
    rhs = (Z * Z - w * w) * apply_resolvent(rw, Z, params)
    assert norm(lhs - rhs, params) < 1e-3 * norm(lhs, params)


def test_apply_resolvent_rejects_heavy_tail(params):
    g = GraphFunction.sample(params, r1=lambda x: np.ones_like(x))
    with pytest.raises(TailTooLargeError):
        apply_resolvent(g, Z, params)


def test_kernel_slice_csv(params, tmp_path):
    parts = kernel_slice(GraphPoint("r2", params.L / 3), Z, params, samples=5)
    assert len(parts) == 10
    assert {p.x.edge for p in parts} == {"r1", "r2"}
    path = write_kernel_csv(parts, tmp_path / "kernel.csv", header={"command": "kernel"})
    rows = read_csv(path)
    assert list(rows[0]) == KERNEL_COLUMNS
    assert [row["edge_x"] for row in rows] == ["r2"] * 5 + ["r1"] * 5
