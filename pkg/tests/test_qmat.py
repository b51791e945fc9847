import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steerfid import qmat

I2, X, Y, Z = qmat.I2, qmat.X, qmat.Y, qmat.Z


def hermitian_from_seed(seed: int, d: int) -> np.ndarray:
    g = np.random.default_rng(seed)
    a = g.normal(size=(d, d)) + 1j * g.normal(size=(d, d))
    return a + a.conj().T


def test_kron_pauli_z():
    zz = qmat.kron(Z, Z)
    assert np.trace(zz) == 0
    assert np.array_equal(np.diag(zz).real, [1, -1, -1, 1])


def test_kron_identity_and_projectors():
    assert np.array_equal(qmat.kron(I2, I2), np.eye(4))
    p0, p1 = qmat.proj(qmat.ket(1, 0)), qmat.proj(qmat.ket(0, 1))
    assert np.array_equal(qmat.kron(p0, p1), np.diag([0, 1, 0, 0]))


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_kron_associative(seed):
    g = np.random.default_rng(seed)
    a, b, c = (g.normal(size=(2, 3)) + 1j * g.normal(size=(2, 3)) for _ in range(3))
    assert np.allclose(qmat.kron(qmat.kron(a, b), c), qmat.kron(a, qmat.kron(b, c)), atol=1e-13)


def test_partial_trace_of_bell_state():
    phi = qmat.proj(qmat.ket(1, 0, 0, 1) / np.sqrt(2))
    assert np.allclose(qmat.partial_trace(phi, (2, 2), "A"), I2 / 2)
    assert np.allclose(qmat.partial_trace(phi, (2, 2), "B"), I2 / 2)


@pytest.mark.parametrize("d", [2, 3])
def test_partial_trace_of_products(rng, d):
    for _ in range(10):
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        b = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        assert np.allclose(qmat.partial_trace(np.kron(a, b), (d, d), "B"), np.trace(b) * a, atol=1e-12)
        assert np.allclose(qmat.partial_trace(np.kron(a, b), (d, d), "A"), np.trace(a) * b, atol=1e-12)


@pytest.mark.parametrize("dims", [(2, 2), (2, 3), (3, 2)])
def test_partial_trace_preserves_trace(rng, dims):
    n = dims[0] * dims[1]
    m = hermitian_from_seed(int(rng.integers(1 << 30)), n)
    for side in ("A", "B"):
        assert np.isclose(np.trace(qmat.partial_trace(m, dims, side)), np.trace(m))


def test_partial_trace_dimension_mismatch():
    with pytest.raises(ValueError):
        qmat.partial_trace(np.eye(5), (2, 2), "A")


def test_partial_transpose_bell_state_min_eig():
    phi = qmat.proj(qmat.ket(1, 0, 0, 1) / np.sqrt(2))
    w, _ = qmat.eig_hermitian(qmat.partial_transpose(phi, (2, 2), "B"))
    assert w[0] == pytest.approx(-0.5, abs=1e-12)


@given(st.integers(0, 10_000), st.sampled_from(["A", "B"]))
@settings(max_examples=25, deadline=None)
def test_partial_transpose_involution(seed, side):
    m = hermitian_from_seed(seed, 6)
    assert np.array_equal(qmat.partial_transpose(qmat.partial_transpose(m, (2, 3), side), (2, 3), side), m)


def test_partial_transpose_keeps_product_states_psd(rng):
    for _ in range(10):
        rho = np.kron(qmat.random_density(2, rng), qmat.random_density(2, rng))
        assert qmat.min_eig(qmat.partial_transpose(rho, (2, 2), "B")) >= -1e-12


def test_eig_pauli_z():
    w, v = qmat.eig_hermitian(Z)
    assert np.allclose(w, [-1, 1])


@pytest.mark.parametrize("t", [0.0, 0.3, 0.7, 0.99])
def test_eig_sum_of_two_projectors(t):
    # two pure states with overlap t span a plane; the Gram matrix gives 1 +- t
    u = np.array([1, 0, 0], dtype=complex)
    v = np.array([t, np.sqrt(1 - t ** 2), 0], dtype=complex)
    w, _ = qmat.eig_hermitian(qmat.proj(u) + qmat.proj(v))
    assert np.allclose(w, [0, 1 - t, 1 + t], atol=1e-10)


@pytest.mark.parametrize("d", [1, 2, 3, 5, 8, 16])
def test_eig_reconstruction_and_orthonormality(d, rng):
    m = hermitian_from_seed(int(rng.integers(1 << 30)), d)
    w, v = qmat.eig_hermitian(m)
    assert np.all(np.diff(w) >= -1e-12)
    assert np.allclose(m @ v, v * w, atol=1e-10)
    assert np.allclose(v.conj().T @ v, np.eye(d), atol=1e-10)
    assert np.allclose((v * w) @ v.conj().T, m, atol=1e-10)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=50, deadline=None)
def test_eig_2x2_matches_characteristic_roots(a, d, re, im):
    m = np.array([[a, re + 1j * im], [re - 1j * im, d]])
    tr, det = a + d, a * d - (re ** 2 + im ** 2)
    disc = np.sqrt(max(tr ** 2 / 4 - det, 0.0))
    w, _ = qmat.eig_hermitian(m)
    assert np.allclose(w, [tr / 2 - disc, tr / 2 + disc], atol=1e-10)


def test_eig_rejects_non_hermitian():
    with pytest.raises(ValueError):
        qmat.eig_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))


def test_is_hermitian_tolerance():
    m = np.array([[1, 1e-13], [0, 1]], dtype=complex)
    assert qmat.is_hermitian(m)
    assert not qmat.is_hermitian(np.array([[1, 1e-9], [0, 1]]))
