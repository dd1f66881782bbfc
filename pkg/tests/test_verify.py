import pytest

from tadpole.config import RunConfig
from tadpole.verify import *

STATUSES = [
    ([("pass", True), ("pass", True)], 0),
    ([("pass", True), ("fail", False)], 0),
    ([("pass", True), ("measured", False)], 0),
    ([("pass", True), ("fail", True)], 2),
    ([("error", True)], 2),
    ([], 0),
]


@pytest.mark.parametrize(["records", "status"], STATUSES)
def test_exit_status(records, status):
    results = [CriterionResult(i, f"criterion {i}", hard, result) for i, (result, hard) in enumerate(records, 1)]
    assert exit_status(results) == status


def test_criteria_are_numbered():
    assert [number for number, *_ in CRITERIA] == list(range(1, 11))
    assert all(callable(check) for *_, check in CRITERIA)


def test_result_json():
    result = CriterionResult(3, "resolvent correctness", True, "pass", {"relative_error": 1e-9}, 1.23456)
    assert result.as_json() == {
        "criterion": 3,
        "title": "resolvent correctness",
        "kind": "hard",
        "status": "pass",
        "measured": {"relative_error": 1e-9},
        "seconds": 1.235,
    }


def test_coefficient_criterion():
    (result,) = run_verify(RunConfig(), only=[2])
    assert result.number == 2
    assert result.status == "pass"
    assert result.measured["exact_identities"]
    assert result.measured["max_relative_residual"] < 1e-10


def test_failures_are_recorded(monkeypatch):
    def broken(ctx):
        raise ArithmeticError("overflow in probe")

    monkeypatch.setattr("tadpole.verify.CRITERIA", [(1, "broken", True, broken)])
    (result,) = run_verify(RunConfig())
    assert result.status == "error"
    assert result.measured == {"error": "ArithmeticError", "message": "overflow in probe"}
    assert exit_status([result]) == 2


def test_kernel_decomposition_criterion():
    (result,) = run_verify(RunConfig(), only=[4])
    assert result.status == "pass"
    measured = result.measured
    assert measured["path"] in ("printed", "derived")
    assert measured["max_relative_defect"] < 1e-10
    assert measured["max_defect_relative_to_kernel"] < 1e-10
    assert measured["probes_relative_to_kernel"] > 0
    assert measured["k_pp_minus_simple_pole"] is True


@pytest.mark.slow
def test_spectrum_criterion():
    (result,) = run_verify(RunConfig(), only=[5])
    assert result.status == "pass"
    assert result.measured["winding_count"] == result.measured["roots_found"]
    assert result.measured["derivative_error"] < 1e-4


@pytest.mark.slow
def test_resolvent_criterion():
    (result,) = run_verify(RunConfig(), only=[3])
    assert result.status == "pass"
    assert result.measured["ode_order"] > 1.6
    assert result.measured["ode_residual"][0] < 1e-4


@pytest.mark.slow
def test_modal_decay_criterion():
    (result,) = run_verify(RunConfig(), only=[8])
    assert result.status == "pass"
    measured = result.measured
    assert measured["oracle_horizon"] == 0.5
    assert 16.0 <= measured["x_max"] < 16.5
    assert measured["E_plus_drift"] < 1e-10
    assert measured["decay_bound_holds"]
