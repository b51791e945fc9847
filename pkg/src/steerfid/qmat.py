"""Dense complex matrix helpers.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. The module adds the
few operations that numpy does not spell out directly: bipartite partial trace
and transpose, Hermiticity checks, and a small cyclic Jacobi eigensolver used
as an independent oracle for the LAPACK-backed code paths.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

HERM_TOL = 1e-12

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)


def as_cmatrix(m) -> np.ndarray:
    """Return ``m`` as a 2-D complex128 array (copying only when needed)."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {a.shape}")
    return a


def ket(*amps) -> np.ndarray:
    """Column vector from amplitudes."""
    return np.asarray(amps, dtype=complex).reshape(-1, 1)


def proj(v) -> np.ndarray:
    """Rank-one operator ``|v><v|``."""
    v = np.asarray(v, dtype=complex).reshape(-1, 1)
    return v @ v.conj().T


def dag(m) -> np.ndarray:
    return np.asarray(m).conj().T


def is_hermitian(m, tol: float = HERM_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.max(np.abs(m - m.conj().T), initial=0.0) <= tol


def hermitian_part(m) -> np.ndarray:
    m = np.asarray(m)
    return 0.5 * (m + m.conj().T)


def kron(*ms) -> np.ndarray:
    """Kronecker product of one or more matrices, left to right."""
    out = np.asarray(ms[0], dtype=complex)
    for m in ms[1:]:
        out = np.kron(out, np.asarray(m, dtype=complex))
    return out


def _check_bipartite(m: np.ndarray, dims: Sequence[int]) -> tuple[int, int]:
    da, db = (int(d) for d in dims)
    if m.shape != (da * db, da * db):
        raise ValueError(f"matrix of shape {m.shape} does not match dims {tuple(dims)}")
    return da, db


def partial_trace(m, dims: Sequence[int], subsystem: str = "A") -> np.ndarray:
    """Trace out one factor of a bipartite operator.

    Parameters
    ----------
    m : array_like
        Square matrix on ``C^dA (x) C^dB``.
    dims : (int, int)
        Local dimensions ``(dA, dB)``.
    subsystem : {"A", "B"}
        The factor that is traced out.

    Returns
    -------
    numpy.ndarray
        The reduced operator on the remaining factor.
    """
    m = as_cmatrix(m)
    da, db = _check_bipartite(m, dims)
    t = m.reshape(da, db, da, db)
    if subsystem == "A":
        return np.einsum("ijik->jk", t)
    if subsystem == "B":
        return np.einsum("ijkj->ik", t)
    raise ValueError("subsystem must be 'A' or 'B'")


def partial_transpose(m, dims: Sequence[int], subsystem: str = "B") -> np.ndarray:
    """Transpose one tensor factor of a bipartite operator."""
    m = as_cmatrix(m)
    da, db = _check_bipartite(m, dims)
    t = m.reshape(da, db, da, db)
    if subsystem == "A":
        t = t.transpose(2, 1, 0, 3)
    elif subsystem == "B":
        t = t.transpose(0, 3, 2, 1)
    else:
        raise ValueError("subsystem must be 'A' or 'B'")
    return np.ascontiguousarray(t).reshape(da * db, da * db)


def eig_hermitian(m, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.

    Parameters
    ----------
    m : array_like
        Hermitian matrix (checked to ``1e-12`` absolute).
    tol : float
        Sweeps stop once the off-diagonal Frobenius norm is below
        ``tol * max(1, ||m||_F)``.

    Returns
    -------
    w : numpy.ndarray
        Real eigenvalues in ascending order.
    v : numpy.ndarray
        Unitary matrix whose columns are the matching eigenvectors.

    Raises
    ------
    ValueError
        If ``m`` is not Hermitian.
    """
    a = as_cmatrix(m).copy()
    n = a.shape[0]
    if a.shape[1] != n or not is_hermitian(a):
        raise ValueError("eig_hermitian needs a Hermitian matrix")
    v = np.eye(n, dtype=complex)
    scale = max(1.0, float(np.linalg.norm(a)))
    for _ in range(max_sweeps):
        off = np.linalg.norm(a[~np.eye(n, dtype=bool)])
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag < 1e-300:
                    continue
                # zero a[p,q] with a unitary rotation in the (p,q) plane
                phase = apq / mag
                app, aqq = a[p, p].real, a[q, q].real
                theta = 0.5 * np.arctan2(2.0 * mag, aqq - app)
                c, s = np.cos(theta), np.sin(theta)
                rot = np.array([[c, s * phase], [-s * np.conj(phase), c]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ rot
                a[idx, :] = rot.conj().T @ a[idx, :]
                v[:, idx] = v[:, idx] @ rot
                a[p, q] = a[q, p] = 0.0
    w = np.real(np.diag(a))
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def min_eig(m) -> float:
    """Smallest eigenvalue of a Hermitian matrix (LAPACK path)."""
    return float(np.linalg.eigvalsh(hermitian_part(np.asarray(m, dtype=complex)))[0])


def is_psd(m, tol: float = 1e-10) -> bool:
    return min_eig(m) >= -tol


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix."""
    g = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix from a Ginibre ensemble of the given rank."""
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return (v / np.linalg.norm(v)).reshape(-1, 1)
