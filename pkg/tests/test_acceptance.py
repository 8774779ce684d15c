"""Full verification battery, one test per criterion.

Each test prints the one-line verdict so a verbose run reads as a report.
Two criteria measure genuine steepness non-uniformities and are asserted to
FAIL with the expected diagnostics; the suite stays green while the battery
reports them honestly.
"""
from __future__ import annotations

import pytest

from chemoscale.acceptance import (
    CRITERION_IDS,
    CriterionResult,
    format_result,
    run_all,
    run_criterion,
)

EXPECTED_FAIL = {"poincare-suite", "pass-through"}


@pytest.fixture(scope="module")
def shared_cache():
    return {}


@pytest.mark.parametrize("cid", CRITERION_IDS)
def test_criterion(cid, shared_cache):
    res = run_criterion(cid, shared_cache)
    print(format_result(res))
    assert res.cid == cid
    assert res.seconds > 0.0
    assert res.measured
    if cid in EXPECTED_FAIL:
        assert res.passed is False, f"{cid} unexpectedly passed: {res.measured}"
    else:
        assert res.passed is True, f"{cid} failed: {res.measured}\n{res.detail}"


def test_poincare_failure_names_growing_families(shared_cache):
    res = run_criterion("poincare-suite", shared_cache)
    assert "far-block x" in res.measured
    assert "transition-block x" in res.measured
    # the summed forms stay uniform even though the raw blocks do not
    assert "summed-variance: spread x1." in res.detail
    assert "summed-truncated: spread x1." in res.detail


def test_pass_through_failure_reports_matched_horizon(shared_cache):
    res = run_criterion("pass-through", shared_cache)
    assert "window half-time only" in res.detail
    assert "spread x1.1" in res.detail  # matched horizons are steepness-stable
    assert "all positive: True" in res.measured


def test_unknown_id_rejected():
    with pytest.raises(ValueError, match="unknown criterion id"):
        run_criterion("no-such-check")
    with pytest.raises(ValueError, match="unknown criterion ids"):
        run_all(ids=["scheme-exactness", "bogus"])


def test_result_record_validates_id():
    with pytest.raises(ValueError, match="unknown criterion id"):
        CriterionResult(cid="wat", passed=True, measured="m", detail="", seconds=0.1)
