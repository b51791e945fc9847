import functools

import numpy as np
import pytest

from steerfid import scenarios
from steerfid.selftest import fidelity_lower_bound


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@functools.lru_cache(maxsize=None)
def scenario(name: str, alpha: float = 0.0):
    return scenarios.get_scenario(name, alpha)


@functools.lru_cache(maxsize=None)
def bound_at(name: str, violation: float, alpha: float = 0.0, mode: str = "equality"):
    """Cached solve so that expensive points are shared between test modules."""
    return fidelity_lower_bound(scenario(name, alpha), violation, mode=mode)


@functools.lru_cache(maxsize=None)
def bound_at_max(name: str, alpha: float = 0.0):
    sc = scenario(name, alpha)
    return bound_at(name, sc.quantum_bound, alpha)


def hermitian_basis(d: int) -> list:
    out = []
    for i in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[i, i] = 1
        out.append(e)
    for i in range(d):
        for j in range(i + 1, d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = e[j, i] = 1
            out.append(e)
            e = np.zeros((d, d), dtype=complex)
            e[i, j], e[j, i] = -1j, 1j
            out.append(e)
    return out


def max_eig_problem(c: np.ndarray):
    """``min -tr(C X)`` over density matrices; the optimum is ``-lambda_max(C)``."""
    from steerfid.sdp import SdpProblem, block_from_dense

    d = c.shape[0]
    basis = hermitian_basis(d)
    cost = np.array([-np.trace(c @ b).real for b in basis])
    blk = block_from_dense(np.zeros((d, d)), basis, "X")
    a = np.array([[np.trace(b).real for b in basis]])
    return SdpProblem(len(basis), cost, (blk,), a, np.array([1.0]))


def random_hermitian(rng, d: int) -> np.ndarray:
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2


def small_rotation(rng, scale: float) -> np.ndarray:
    """Qubit unitary ``exp(-i scale (n . sigma))`` about a random axis."""
    from steerfid import qmat

    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    h = n[0] * qmat.X + n[1] * qmat.Y + n[2] * qmat.Z
    ang = scale * rng.uniform(-1, 1)
    return np.cos(ang) * np.eye(2) - 1j * np.sin(ang) * h


def noisy_strategy(sc, rng, max_noise: float = 0.06, max_angle: float = 0.12):
    """Reference strategy with white noise and slightly rotated measurements on both sides.

    Returns the state, Alice's effects, Bob's observables (auxiliaries left at
    their reference values) and the Bell value.
    """
    from steerfid.steering import projective_povms, steered_assemblage

    p = rng.uniform(0, max_noise)
    d = sc.reference_state.shape[0]
    state = (1 - p) * sc.reference_state + p * np.eye(d) / d
    ua = [small_rotation(rng, max_angle) for _ in sc.alice_observables]
    alice = [u @ o @ u.conj().T for u, o in zip(ua, sc.alice_observables)]
    ub = [small_rotation(rng, max_angle) for _ in range(sc.n_measured)]
    bob = [u @ o @ u.conj().T for u, o in zip(ub, sc.bob_observables[:sc.n_measured])]
    bob += list(sc.bob_observables[sc.n_measured:])
    povms = projective_povms(alice)
    asm = steered_assemblage(state, povms)
    violation = float(np.real(sc.bell_functional.evaluate_realization(asm, bob)))
    return state, povms, bob, asm, violation


# acceptance summary -----------------------------------------------------------------------

CRITERIA: dict = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    CRITERIA[number] = (passed, detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        passed, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
