"""End-to-end acceptance checks, one test per numbered criterion.

Each test records a one-line verdict that is echoed in the terminal summary.
The large three-setting scenarios make criteria 4, 6 and 7 take minutes.
"""
import io
import time

import numpy as np
import pytest

from steerfid import certify
from steerfid.moment import assemble, realize
from steerfid.qmat import eig_hermitian
from steerfid.sdp import export_sdpa, solve
from steerfid.selftest import default_gap_tol, fidelity_lower_bound, sweep
from steerfid.steering import (assemblage_fidelity, classical_fidelity_eig, classical_fidelity_sdp,
                               verify_mixture_identities)

from conftest import (bound_at_max, max_eig_problem, noisy_strategy, random_hermitian, record_criterion,
                      scenario)


def check(number: int, failures: list, detail: str) -> None:
    ok = not failures
    record_criterion(number, ok, detail if ok else "; ".join(failures))
    assert ok, "; ".join(failures)


def test_criterion_01_chsh_maximal_violation():
    sc = scenario("chsh")
    t0 = time.perf_counter()
    pt = fidelity_lower_bound(sc, 2 * np.sqrt(2))
    dt = time.perf_counter() - t0
    fails = []
    if not pt.ok or abs(pt.fidelity_lower_bound - 1) > 1e-4:
        fails.append(f"bound {pt.fidelity_lower_bound:.8f} ({pt.status}), want 1 +- 1e-4")
    if dt >= 5:
        fails.append(f"took {dt:.2f}s, want < 5s")
    check(1, fails, f"CHSH bound {pt.fidelity_lower_bound:.8f} in {dt:.2f}s")


def test_criterion_02_chsh_classical_fidelity():
    ref = scenario("chsh").reference_assemblage
    t0 = time.perf_counter()
    fe, fs = classical_fidelity_eig(ref), classical_fidelity_sdp(ref)
    dt = time.perf_counter() - t0
    fails = [f"{k} {v:.9f}, want 0.853553 +- 1e-6" for k, v in (("eig", fe), ("sdp", fs))
             if abs(v - 0.853553) > 1e-6]
    if dt >= 1:
        fails.append(f"took {dt:.2f}s, want < 1s")
    check(2, fails, f"CHSH classical eig {fe:.9f} sdp {fs:.9f} in {dt:.3f}s")


def test_criterion_03_elegant_classical_fidelity():
    ref = scenario("elegant").reference_assemblage
    t0 = time.perf_counter()
    fe, fs = classical_fidelity_eig(ref), classical_fidelity_sdp(ref)
    dt = time.perf_counter() - t0
    fails = [f"{k} {v:.9f}, want 0.788675 +- 1e-6" for k, v in (("eig", fe), ("sdp", fs))
             if abs(v - 0.788675) > 1e-6]
    if dt >= 1:
        fails.append(f"took {dt:.2f}s, want < 1s")
    check(3, fails, f"elegant classical eig {fe:.9f} sdp {fs:.9f} in {dt:.3f}s")


def test_criterion_04_elegant_self_test_and_crossing():
    sc = scenario("elegant")
    top = bound_at_max("elegant")
    # the crossing sits a few percent below the maximum; start the grid at 90%
    rep = sweep(sc, 3, lower=0.9 * sc.quantum_bound)
    dev = rep.crossing_deviation_pct
    fails = []
    if not top.ok or abs(top.fidelity_lower_bound - 1) > 1e-3:
        fails.append(f"bound at 4*sqrt(3) {top.fidelity_lower_bound:.6f} ({top.status}), want 1 +- 1e-3")
    if dev is None or abs(dev - 5.4) > 1.0:
        fails.append(f"crossing deviation {dev}, want 5.4 +- 1.0 %")
    check(4, fails, f"elegant bound {top.fidelity_lower_bound:.6f}, crossing at I={rep.crossing_violation} "
                    f"({dev:.3f}% below maximum)" if dev is not None else "no crossing")


def test_criterion_05_tilted_chsh():
    fails, parts = [], []
    for alpha in (0.0, 0.5, 1.0):
        sc = scenario("tilted", alpha)
        real = realize(sc, sc.reference_state, sc.alice_povms, sc.bob_observables)
        qb = np.sqrt(8 + 2 * alpha ** 2)
        if abs(real.violation - qb) > 1e-10:
            fails.append(f"alpha={alpha}: realized value {real.violation!r}, want {qb!r}")
        top = bound_at_max("tilted", alpha)
        if not top.ok or abs(top.fidelity_lower_bound - 1) > 1e-3:
            fails.append(f"alpha={alpha}: bound {top.fidelity_lower_bound:.6f} ({top.status})")
        parts.append(f"alpha={alpha} bound {top.fidelity_lower_bound:.6f}")
    tilted = sweep(scenario("tilted", 0.0), 5, locate_crossing=False)
    chsh = sweep(scenario("chsh"), 5, locate_crossing=False)
    tol = 2 * max(default_gap_tol(scenario("tilted")), default_gap_tol(scenario("chsh")))
    diffs = [abs(p.fidelity_lower_bound - q.fidelity_lower_bound) for p, q in zip(tilted.curve, chsh.curve)]
    if max(diffs) > tol:
        fails.append(f"alpha=0 curve differs from CHSH by up to {max(diffs):.3e} (tol {tol:.0e}); "
                     f"tilted {[round(p.fidelity_lower_bound, 6) for p in tilted.curve]} vs "
                     f"chsh {[round(p.fidelity_lower_bound, 6) for p in chsh.curve]}")
    check(5, fails, ", ".join(parts) + f", alpha=0 vs CHSH max diff {max(diffs):.1e}")


@pytest.mark.slow
def test_criterion_06_i3622_maximal_violation():
    top = bound_at_max("i3622")
    fails = []
    if not top.ok or abs(top.fidelity_lower_bound - 1) > 1e-3:
        fails.append(f"bound {top.fidelity_lower_bound:.6f} ({top.status}), want 1 +- 1e-3")
    check(6, fails, f"I3622 bound {top.fidelity_lower_bound:.6f} in {top.seconds:.0f}s")


SOUNDNESS_CASES = [("chsh", (0.0,)), ("tilted", (0.0, 0.5, 1.0)), ("elegant", (0.0,)), ("i3622", (0.0,))]


@pytest.mark.slow
def test_criterion_07_soundness():
    rng = np.random.default_rng(7)
    fails, worst, count = [], -np.inf, 0
    for name, alphas in SOUNDNESS_CASES:
        for k in range(20):
            sc = scenario(name, alphas[k % len(alphas)])
            _, _, _, asm, violation = noisy_strategy(sc, rng)
            pt = fidelity_lower_bound(sc, min(violation, sc.quantum_bound), marginals=asm.marginals)
            true = assemblage_fidelity(sc.reference_assemblage, asm)
            count += 1
            if not pt.ok:
                fails.append(f"{name} #{k}: solver {pt.status} at I={violation:.6f}")
                continue
            excess = pt.fidelity_lower_bound - true
            worst = max(worst, excess)
            if excess > 1e-6:
                fails.append(f"{name} #{k}: bound {pt.fidelity_lower_bound:.8f} > fidelity {true:.8f}")
    check(7, fails, f"{count} strategies, largest bound minus fidelity {worst:.3e}")


def test_criterion_08_mixture_identities():
    rep = verify_mixture_identities(1000, raise_on_failure=False)
    fails = [] if rep.max_residual < 1e-10 else [f"max residual {rep.max_residual:.3e} at {rep.worst}"]
    check(8, fails, f"{rep.samples} samples, max residual {rep.max_residual:.3e}")


def test_criterion_09_certification():
    fails = []
    rep = certify.certify_state(certify.werner_state(0.5))
    if rep.verdict != "entangled" or abs(rep.value + 1 / 32) > 1e-10:
        fails.append(f"Werner 0.5: {rep.verdict} {rep.value}")
    rep3 = certify.certify_state(certify.werner_state(1 / 3))
    if rep3.verdict != "no witness":
        fails.append(f"Werner 1/3: {rep3.verdict}")
    side = certify.pauli_assemblage()
    beta = certify.expand_coefficients(certify.ppt_witness(certify.werner_state(0.5)), side, side).coefficients
    rng = np.random.default_rng(9)
    sep = min(certify.evaluate_diew(beta, certify.random_separable_state(rng), side, side) for _ in range(1000))
    if sep < -1e-9:
        fails.append(f"separable minimum {sep:.3e}")
    vals = {}
    for label, ch in (("identity", certify.QubitChannel.identity()),
                      ("amplitude damping 0.5", certify.QubitChannel.amplitude_damping(0.5))):
        wit = certify.channel_witness(ch)
        vals[label] = certify.evaluate_channel_witness(wit.coefficients, ch, side, side)
        if not vals[label] < 0:
            fails.append(f"{label}: {vals[label]}")
        dep = certify.evaluate_channel_witness(wit.coefficients, certify.QubitChannel.depolarizing(1.0), side, side)
        vals[f"depolarizing vs {label} witness"] = dep
        if dep < -1e-9:
            fails.append(f"depolarizing with {label} witness: {dep:.3e}")
    check(9, fails, f"Werner {rep.value:.12f}, separable min {sep:.3e}, "
                    + ", ".join(f"{k} {v:.4f}" for k, v in vals.items()))


def test_criterion_10_solver_correctness():
    pytest.importorskip("cvxopt")
    from steerfid.sdp.external import solve_sdpa_with_cvxopt

    rng = np.random.default_rng(10)
    fails, worst = [], 0.0
    for k in range(100):
        c = random_hermitian(rng, int(rng.integers(2, 7)))
        sol = solve(max_eig_problem(c))
        err = abs(-sol.primal_objective - eig_hermitian(c)[0][-1])
        worst = max(worst, err)
        if sol.status != "optimal" or err > 1e-6:
            fails.append(f"max-eig #{k}: {sol.status}, error {err:.3e}")
    sc = scenario("chsh")
    buf = io.StringIO()
    c0 = export_sdpa(assemble(sc, sc.quantum_bound).to_sdp(), buf)
    ext = solve_sdpa_with_cvxopt(io.StringIO(buf.getvalue()))
    value = ext["primal_objective"] + c0
    if ext["status"] != "optimal" or abs(value - 1) > 1e-4:
        fails.append(f"cvxopt on exported CHSH: {ext['status']} {value}")
    check(10, fails, f"max-eig worst error {worst:.3e}, cvxopt CHSH bound {value:.8f}")
