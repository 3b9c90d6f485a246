"""
Tests for the oracle checks behind `validate`
"""
import numpy as np
import pytest

from src.harness import validation
from src.harness.validation import (
    CheckResult,
    check_maxmin,
    check_maxprod,
    check_mr_closed_form,
    check_thresholds,
    random_coefficients,
    run_validation,
)


def test_random_coefficients_are_valid(rng):
    for K in (1, 2, 10):
        coeffs = random_coefficients(rng, K)
        coeffs.check()
        assert np.all(coeffs.a <= np.diagonal(coeffs.G))


def test_threshold_check():
    assert "gamma_th = 0.0110" in check_thresholds(quick=True)


def test_quick_mr_closed_form():
    assert "20000 realizations" in check_mr_closed_form(quick=True)


def test_quick_allocation_certificates():
    check_maxmin(quick=True)
    check_maxprod(quick=True)


def test_failures_are_reported_not_raised(mocker):
    def failing(quick):
        raise validation.ValidationFailure("off by a mile")

    def crashing(quick):
        raise RuntimeError("segfault-ish")

    mocker.patch.object(validation, "CHECKS", [
        ("thresholds", validation.check_thresholds),
        ("failing", failing),
        ("crashing", crashing),
    ])
    results = run_validation(quick=True)
    assert [r.passed for r in results] == [True, False, False]
    assert results[1].detail == "off by a mile"
    assert "RuntimeError" in results[2].detail
    assert all(isinstance(r, CheckResult) for r in results)


@pytest.mark.slow
def test_full_validation_passes():
    results = run_validation(quick=False)
    assert all(r.passed for r in results), [r for r in results if not r.passed]
