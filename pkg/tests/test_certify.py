import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steerfid import qmat
from steerfid.certify import (PHI_PLUS, CompletenessError, QubitChannel, certify_channel, certify_state,
                              channel_witness, choi, evaluate_channel_witness, evaluate_diew,
                              expand_coefficients, is_entanglement_breaking, pauli_assemblage, ppt_witness,
                              random_channel, random_eb_channel, random_separable_state, reconstruct,
                              werner_state)

SIDE = pauli_assemblage()
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def random_hermitian4(rng):
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    return (a + a.conj().T) / 2


# ppt witness ----------------------------------------------------------------------------------

def test_werner_half_has_witness():
    rho = werner_state(0.5)
    W = ppt_witness(rho)
    assert W is not None
    assert np.trace(W @ rho).real == pytest.approx((1 - 3 * 0.5) / 4, abs=1e-12)


@pytest.mark.parametrize("w", [1 / 3, 0.2, 0.0])
def test_werner_ppt_range_has_no_witness(w):
    assert ppt_witness(werner_state(w)) is None


@pytest.mark.parametrize("w", [0.34, 0.5, 0.8, 1.0])
def test_werner_witness_value_closed_form(w):
    rho = werner_state(w)
    W = ppt_witness(rho)
    # the most negative eigenvalue of the partial transpose is (1 - 3w)/4
    assert np.trace(W @ rho).real == pytest.approx((1 - 3 * w) / 4, abs=1e-12)


def test_product_state_has_no_witness(rng):
    rho = np.kron(qmat.random_density(2, rng), qmat.random_density(2, rng))
    assert ppt_witness(rho) is None


def test_ppt_witness_rejects_wrong_shape():
    with pytest.raises(ValueError):
        ppt_witness(np.eye(3) / 3)


# expansion -------------------------------------------------------------------------------------

def test_identity_reconstruction():
    wit = expand_coefficients(np.eye(4), SIDE, SIDE)
    assert np.max(np.abs(reconstruct(wit.coefficients, SIDE, SIDE) - np.eye(4))) < 1e-12
    assert wit.coefficients.shape == (2, 2, 3, 3)


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_random_hermitian_reconstruction(seed):
    W = random_hermitian4(np.random.default_rng(seed))
    wit = expand_coefficients(W, SIDE, SIDE)
    assert wit.residual < 1e-10
    assert np.max(np.abs(wit.reconstruct() - W)) < 1e-10


def test_swap_coefficients_symmetric_under_side_exchange():
    beta = expand_coefficients(SWAP, SIDE, SIDE).coefficients
    assert np.allclose(beta, beta.transpose(1, 0, 3, 2), atol=1e-12)


def test_incomplete_side_rejected():
    # Z and X settings alone cannot reach operators with Y components
    side = pauli_assemblage().elements[:, :2]
    with pytest.raises(CompletenessError):
        expand_coefficients(np.eye(4), side, side)


def test_non_hermitian_operator_rejected():
    with pytest.raises(ValueError):
        expand_coefficients(np.triu(np.ones((4, 4))), SIDE, SIDE)


# state witness ---------------------------------------------------------------------------------

def test_werner_diew_value():
    rep = certify_state(werner_state(0.5))
    assert rep.verdict == "entangled"
    assert rep.value == pytest.approx(-1 / 32, abs=1e-10)
    assert rep.residual < 1e-10


def test_werner_boundary_report():
    rep = certify_state(werner_state(1 / 3))
    assert rep.verdict == "no witness" and rep.value is None
    assert json.loads(rep.to_json())["verdict"] == "no witness"


def test_maximally_entangled_state_negative():
    rho = PHI_PLUS
    wit = expand_coefficients(ppt_witness(rho), SIDE, SIDE)
    assert evaluate_diew(wit.coefficients, rho, SIDE, SIDE) < -0.1


def test_diew_identity_on_random_states(rng):
    W = random_hermitian4(rng)
    wit = expand_coefficients(W, SIDE, SIDE)
    for _ in range(100):
        rho = qmat.random_density(4, rng)
        v = evaluate_diew(wit.coefficients, rho, SIDE, SIDE)
        assert v == pytest.approx(np.trace(W @ rho).real / 4, abs=1e-10)


def test_separable_states_never_witnessed(rng):
    wits = [expand_coefficients(ppt_witness(werner_state(w)), SIDE, SIDE) for w in (0.5, 0.9)]
    wits.append(expand_coefficients(ppt_witness(PHI_PLUS), SIDE, SIDE))
    worst = np.inf
    for _ in range(200):
        rho = random_separable_state(rng)
        for wit in wits:
            worst = min(worst, evaluate_diew(wit.coefficients, rho, SIDE, SIDE))
    assert worst >= -1e-10


def test_npt_states_always_witnessed(rng):
    hits = 0
    for _ in range(100):
        rho = qmat.random_density(4, rng, rank=1 + int(rng.integers(3)))
        if qmat.min_eig(qmat.partial_transpose(rho, (2, 2), "B")) < -1e-9:
            hits += 1
            assert certify_state(rho).value < 0
    assert hits > 10


# channels --------------------------------------------------------------------------------------

def test_choi_of_identity_and_depolarizing():
    assert np.allclose(choi(QubitChannel.identity()), PHI_PLUS)
    assert np.allclose(choi(QubitChannel.depolarizing(1.0)), np.eye(4) / 4)
    assert np.trace(choi(QubitChannel.identity(), normalized=False)).real == pytest.approx(2.0)


def test_choi_matches_kraus_sum(rng):
    for _ in range(10):
        ch = random_channel(rng, 3)
        phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
        ref = sum(np.kron(np.eye(2), k) @ np.outer(phi, phi) @ np.kron(np.eye(2), k).conj().T for k in ch.kraus)
        assert np.allclose(choi(ch), ref, atol=1e-12)


def test_amplitude_damping_choi_is_npt():
    J = choi(QubitChannel.amplitude_damping(0.5))
    assert qmat.min_eig(qmat.partial_transpose(J, (2, 2), "B")) < -1e-3


@pytest.mark.parametrize("ch,eb", [(QubitChannel.identity(), False), (QubitChannel.depolarizing(1.0), True),
                                   (QubitChannel.amplitude_damping(0.1), False),
                                   (QubitChannel.amplitude_damping(0.5), False),
                                   (QubitChannel.amplitude_damping(0.9), False),
                                   (QubitChannel.amplitude_damping(1.0), True)])
def test_entanglement_breaking(ch, eb):
    assert is_entanglement_breaking(ch) is eb


def test_kraus_completeness_checked():
    with pytest.raises(ValueError):
        QubitChannel([np.eye(2) * 0.9])


def test_channel_json_roundtrip():
    ch = QubitChannel.amplitude_damping(0.3)
    back = QubitChannel.from_json(ch.to_json())
    assert all(np.allclose(a, b) for a, b in zip(ch.kraus, back.kraus))


def test_identity_channel_witness():
    wit = channel_witness(QubitChannel.identity())
    v = evaluate_channel_witness(wit.coefficients, QubitChannel.identity(), SIDE, SIDE)
    J = choi(QubitChannel.identity(), normalized=False)
    assert v == pytest.approx(0.5 * np.trace(J @ wit.operator).real, abs=1e-12)
    assert v < 0


def test_depolarizing_channel_not_witnessed():
    wit = channel_witness(QubitChannel.identity())
    v = evaluate_channel_witness(wit.coefficients, QubitChannel.depolarizing(1.0), SIDE, SIDE)
    assert v >= -1e-9
    assert certify_channel(QubitChannel.depolarizing(1.0)).verdict == "no witness"


def test_amplitude_damping_witness_negative():
    rep = certify_channel(QubitChannel.amplitude_damping(0.5))
    assert rep.verdict == "non-entanglement-breaking" and rep.value < 0
    assert not rep.entanglement_breaking


def test_channel_identity_on_random_channels(rng):
    W = random_hermitian4(rng)
    wit = expand_coefficients(W, SIDE, SIDE, normalize_a=True)
    for _ in range(100):
        ch = random_channel(rng, int(rng.integers(1, 4)))
        v = evaluate_channel_witness(wit.coefficients, ch, SIDE, SIDE)
        assert v == pytest.approx(0.5 * np.trace(choi(ch, normalized=False) @ W).real, abs=1e-10)


def test_eb_channels_never_witnessed(rng):
    wits = [channel_witness(QubitChannel.identity()), channel_witness(QubitChannel.amplitude_damping(0.5))]
    worst = np.inf
    for _ in range(100):
        ch = random_eb_channel(rng)
        assert is_entanglement_breaking(ch)
        for wit in wits:
            worst = min(worst, evaluate_channel_witness(wit.coefficients, ch, SIDE, SIDE))
    assert worst >= -1e-9
