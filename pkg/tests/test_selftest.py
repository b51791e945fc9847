import csv
import io
import json

import numpy as np
import pytest

from steerfid.moment import AboveQuantumBound
from steerfid.selftest import (CSV_HEADER, CurvePoint, SelfTestReport, default_gap_tol, deviation_to_violation,
                               fidelity_lower_bound, find_crossing, sweep)
from steerfid.steering import assemblage_fidelity

from conftest import noisy_strategy, scenario


@pytest.fixture(scope="module")
def chsh_report():
    return sweep(scenario("chsh"), 9)


def test_chsh_at_maximum():
    pt = fidelity_lower_bound(scenario("chsh"), 2 * np.sqrt(2))
    assert pt.ok
    assert pt.fidelity_lower_bound == pytest.approx(1.0, abs=1e-4)
    assert pt.dual_bound <= pt.fidelity_lower_bound + 1e-7


def test_above_bound_rejected():
    with pytest.raises(AboveQuantumBound):
        fidelity_lower_bound(scenario("chsh"), 2.9)


def test_iteration_cap_is_reported_not_raised():
    pt = fidelity_lower_bound(scenario("chsh"), 2.5, max_iter=2)
    assert pt.status == "maxIterations" and not pt.ok


def test_chsh_soundness_on_noisy_strategies(rng):
    sc = scenario("chsh")
    for _ in range(8):
        _, _, _, asm, violation = noisy_strategy(sc, rng)
        if violation <= sc.local_bound:
            continue
        pt = fidelity_lower_bound(sc, violation, marginals=asm.marginals)
        assert pt.ok
        assert pt.fidelity_lower_bound <= assemblage_fidelity(sc.reference_assemblage, asm) + 1e-6


def test_sweep_endpoints_and_classical_line(chsh_report):
    rep = chsh_report
    assert len(rep.curve) == 9 and not rep.failed
    assert rep.curve[0].violation == pytest.approx(2.0)
    assert rep.curve[-1].fidelity_lower_bound == pytest.approx(1.0, abs=1e-4)
    assert rep.classical_fidelity == pytest.approx(0.853553, abs=1e-6)
    tol = default_gap_tol(scenario("chsh"))
    for p in rep.curve:
        assert -tol <= p.fidelity_lower_bound <= 1 + tol


def test_sweep_crossing_brackets_classical_value(chsh_report):
    rep = chsh_report
    sc = scenario("chsh")
    c = rep.crossing_violation
    assert sc.local_bound < c < sc.quantum_bound
    below = fidelity_lower_bound(sc, c - 2e-4).fidelity_lower_bound
    above = fidelity_lower_bound(sc, c + 2e-4).fidelity_lower_bound
    assert below <= rep.classical_fidelity <= above
    assert rep.crossing_deviation_pct == pytest.approx(100 * (sc.quantum_bound - c) / sc.quantum_bound)


def test_at_least_curve_is_monotone():
    sc = scenario("chsh")
    rep = sweep(sc, 9, mode="at-least", locate_crossing=False)
    f = [p.fidelity_lower_bound for p in rep.curve]
    tol = 2 * default_gap_tol(sc)
    assert all(b >= a - tol for a, b in zip(f, f[1:]))
    assert rep.crossing_violation is None


def test_at_least_never_exceeds_equality(chsh_report):
    sc = scenario("chsh")
    for p in chsh_report.curve[::3]:
        q = fidelity_lower_bound(sc, p.violation, mode="at-least")
        assert q.fidelity_lower_bound <= p.fidelity_lower_bound + 2 * default_gap_tol(sc)


def test_sweep_needs_two_points():
    with pytest.raises(ValueError):
        sweep(scenario("chsh"), 1)


def test_sweep_lower_start():
    rep = sweep(scenario("chsh"), 3, lower=2.6, locate_crossing=False)
    assert [p.violation for p in rep.curve] == pytest.approx([2.6, 1.3 + np.sqrt(2), 2 * np.sqrt(2)])


def test_parallel_sweep_matches_serial():
    sc = scenario("chsh")
    a = sweep(sc, 4, locate_crossing=False)
    b = sweep(sc, 4, jobs=2, locate_crossing=False)
    assert [p.violation for p in a.curve] == [p.violation for p in b.curve]
    assert [p.fidelity_lower_bound for p in a.curve] == [p.fidelity_lower_bound for p in b.curve]


def test_failed_point_stops_bisection():
    sc = scenario("chsh")
    lo = CurvePoint(2.5, 0.7, "optimal", 0.0, 0.0)
    hi = CurvePoint(2.7, 0.9, "optimal", 0.0, 0.0)
    c = find_crossing(sc, lo, hi, 0.85, max_iter=2)
    assert c == pytest.approx(2.6)


def test_csv_contract(chsh_report):
    rows = list(csv.reader(io.StringIO(chsh_report.to_csv())))
    assert tuple(rows[0]) == CSV_HEADER == ("violation", "fidelity_lower_bound", "status", "gap", "seconds")
    assert len(rows) == 10
    assert float(rows[-1][1]) == pytest.approx(1.0, abs=1e-4)


def test_json_report(chsh_report):
    d = json.loads(chsh_report.to_json())
    assert d["scenario"] == "chsh" and d["mode"] == "equality"
    assert d["classical_fidelity"] == pytest.approx(0.853553, abs=1e-6)
    assert len(d["curve"]) == 9
    assert d["crossing_deviation_pct"] == pytest.approx(chsh_report.crossing_deviation_pct)


def test_report_without_crossing():
    rep = SelfTestReport("chsh", [], 0.85, None, 2.0, 2.8)
    assert rep.crossing_deviation_pct is None and rep.failed == []


@pytest.mark.parametrize("name,tol", [("chsh", 1e-7), ("elegant", 1e-5), ("i3622", 1e-5)])
def test_default_gap_tolerances(name, tol):
    assert default_gap_tol(scenario(name)) == tol


def test_deviation_to_violation():
    sc = scenario("elegant")
    assert deviation_to_violation(sc, 0.0) == sc.quantum_bound
    assert deviation_to_violation(sc, 5.4) == pytest.approx(4 * np.sqrt(3) * 0.946)
