import cmath
import math

import pytest

from tadpole.core import GraphParams
from tadpole.errors import DivergenceError, ParameterError
from tadpole.secular import eval_d, eval_h
from tadpole.spectrum import *
from tadpole.utils import read_csv

LN3 = math.log(3)


def _params(L, alpha):
    return GraphParams.from_resolution(L, alpha, n2=16, x_factor=4.0)


@pytest.fixture
def params():
    return _params(2 * math.pi, 0.5)


def test_embedded_eigenvalues(params):
    points = embedded_eigenvalues(4, params)
    assert [p.index for p in points] == [1, 2, 3, 4]
    assert [p.lam for p in points] == pytest.approx([1, 2, 3, 4], rel=1e-15)
    assert all(p.family == "embedded" and p.residual < 1e-12 for p in points)
    assert points[2].lam_sq == pytest.approx(9)


@pytest.mark.parametrize(["args", "error"], [((0, 1.0, "plus"), ParameterError), ((1, 1.0, "up"), ParameterError)])
def test_asymptotic_coefficients_arguments(args, error):
    with pytest.raises(error):
        asymptotic_coefficients(*args)


@pytest.mark.parametrize("n", [1, 2, 7])
def test_undamped_branch_is_exact(n):
    point = continue_root(n, _params(2 * math.pi, 0.0))
    assert point.lam == pytest.approx(complex(n, -LN3 / (2 * math.pi)), abs=1e-12)
    assert point.family == "resonance_candidate"
    assert point.index == n


@pytest.mark.parametrize("n", [1, 3, 12])
def test_continued_branch_is_a_root(params, n):
    point = continue_root(n, params)
    assert point.residual < 1e-10
    assert abs(eval_h(point.lam, params)) < 1e-10
    assert (point.family == "damped") == (point.lam.imag > 0)
    assert point.seed == complex(2 * n * math.pi, -LN3) / params.L


def test_branch_derivative_in_alpha(params):
    step = 1e-4
    lam = continue_root(3, params).lam
    upper = continue_root(3, params.replace(alpha=params.alpha + step)).lam
    lower = continue_root(3, params.replace(alpha=params.alpha - step)).lam
    assert lambda_alpha_derivative(lam, params) == pytest.approx((upper - lower) / (2 * step), abs=1e-6)


@pytest.mark.parametrize("sign", ["plus", "minus"])
def test_asymptotic_seed_refines_to_a_root(params, sign):
    point = refine_root(asymptotic_seed(20, params, sign), params, index=20)
    assert point.index == 20
    assert point.residual < 1e-10 * (1 + abs(point.lam))


def test_refine_snaps_to_embedded_root(params):
    point = refine_root(2 + 1e-6, params)
    assert point.lam == 2


def test_refine_reports_divergence(params):
    with pytest.raises(DivergenceError) as info:
        refine_root(50 + 20j, params, max_iter=2)
    assert len(info.value.trace) >= 2


def test_expansion_deviation_shrinks(params):
    deviations = [expansion_deviation(continue_root(n, params), params, "minus") for n in (8, 16, 32)]
    assert deviations[0] > deviations[1] > deviations[2]


def test_count_roots_rejects_degenerate_rectangle(params):
    with pytest.raises(ParameterError):
        count_roots_rectangle((1.0, 1.0, -1.0, 1.0), params)


@pytest.mark.parametrize(
    ["L", "alpha", "rect", "count"],
    [
        (2 * math.pi, 0.0, (0.5, 3.5, -0.5, 0.1), 6),
        (2 * math.pi, 1.0, (0.9, 1.1, -0.05, 0.05), 2),
        (2 * math.pi, 0.5, (10.2, 10.8, 2.0, 3.0), 0),
    ],
)
def test_count_roots_rectangle(L, alpha, rect, count):
    certificate = count_roots_rectangle(rect, _params(L, alpha))
    assert certificate.winding_count == count


def test_point_spectrum_is_certified(params):
    points = point_spectrum(4, params, kmax=4)
    certificate = certify(points, 4, params)
    assert certificate.certified
    assert certificate.winding_count == 8
    assert [p.family for p in points[:4]] == ["embedded"] * 4
    assert sorted(p.index for p in points if p.family != "embedded" and p.index) == [1, 2, 3, 4]


def test_single_seed_branch(params):
    points = point_spectrum(3, params, kmax=1, seed_branch="minus", disk=False)
    assert len(points) == 4
    with pytest.raises(ParameterError):
        point_spectrum(0, params)


def test_genuine_damped_root_in_disk():
    params = _params(1.0, 11.5)
    search = search_disk(params)
    assert search.certificate.winding_count >= 1
    assert search.roots
    for point in search.roots:
        assert point.family == "damped"
        assert abs(point.lam - params.alpha / 2) < params.alpha / 2
        assert point.lam_sq.imag > 0
        assert abs(eval_d(point.lam, params)) < 1e-10
    assert any(abs(p.lam - complex(2.445, 1.0)) < 0.05 for p in search.roots)


def test_no_disk_without_damping():
    search = search_disk(_params(2 * math.pi, 0.0))
    assert search.roots == [] and search.certificate.winding_count == 0


def test_double_root_is_kept():
    params = _params(2 * math.pi, 1.0)
    points = point_spectrum(2, params, kmax=2)
    at_one = [p for p in points if p.lam == 1]
    assert len(at_one) == 2
    assert abs(cmath.exp(1j * params.L) - 1) < 1e-12
    assert certify(points, 2, params).certified


def test_branch_through_double_root_keeps_moving():
    params = _params(2 * math.pi, 1.0)
    step = 1e-5
    assert refine_root(1.0, params.replace(alpha=1 + step)).lam == 1
    upper = refine_branch_root(1, params.replace(alpha=1 + step))
    lower = refine_branch_root(1, params.replace(alpha=1 - step))
    assert abs(eval_h(upper, params.replace(alpha=1 + step))) < 1e-12
    assert (upper - lower) / (2 * step) == pytest.approx(lambda_alpha_derivative(1, params), abs=1e-6)


def test_branch_refinement_reports_divergence(params):
    with pytest.raises(DivergenceError):
        refine_branch_root(-params.alpha, params)


def test_spectrum_csv(params, tmp_path):
    points = embedded_eigenvalues(2, params)
    path = write_spectrum_csv(points, tmp_path / "spectrum.csv", header={"alpha": 0.5})
    assert path.read_text().splitlines()[0] == '# {"alpha": 0.5}'
    rows = read_csv(path)
    assert [row["family"] for row in rows] == ["embedded", "embedded"]
    assert list(rows[0]) == SPECTRUM_COLUMNS


def test_alpha_sweep_rows():
    rows = alpha_sweep([0.5, 2.0], 3)
    assert len(rows) == 6
    assert [row[1] for row in rows] == [1, 2, 3, 1, 2, 3]
    assert rows[3][-1] == pytest.approx(-8 * 2.0 / (3 * 2 * math.pi))
