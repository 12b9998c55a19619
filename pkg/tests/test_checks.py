import os

import pytest

from bifcurrent import checks
from bifcurrent.parallel import pmap, resolve_threads


def test_resolve_threads(monkeypatch):
    assert resolve_threads(3) == 3
    monkeypatch.setenv("BIFCURRENT_THREADS", "2")
    assert resolve_threads(None) == 2
    monkeypatch.delenv("BIFCURRENT_THREADS")
    assert resolve_threads(None) == (os.cpu_count() or 1)
    with pytest.raises(ValueError):
        resolve_threads(-1)


@pytest.mark.parametrize("threads", [1, 4])
def test_pmap_preserves_order(threads):
    assert pmap(lambda x: x * x, range(20), threads) == [x * x for x in range(20)]


def test_small_checks_pass():
    assert checks.v_invariance(500).passed
    assert checks.composition(20).passed
    assert checks.jet_finite_differences(100).passed
    assert checks.tangency_counts(5).passed
    assert checks.root_oracle(6, 4).passed


def test_brolin_check_reports_each_parameter():
    r = checks.brolin_potential(count=2 ** 12, probes=10)
    assert set(r.metrics["mean_gap"]) == {"0j", "(-2+0j)", "1j"}
    assert r.metrics["unit_circle_err"] < 1e-12


def test_failed_check_is_reported_not_raised():
    r = checks.v_invariance(100, tol=-1.0)
    assert not r.passed and r.metrics["samples"] == 100


def test_suite_report_summary():
    results = [checks.CheckResult("a", True), checks.CheckResult("b", False)]
    rep = checks.suite_report(results, 42)
    assert rep.passed is False
    assert rep.tables["summary"] == "check,pass\na,pass\nb,FAIL\n"
