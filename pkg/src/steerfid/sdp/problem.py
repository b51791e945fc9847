"""Problem and solution containers for block semidefinite programs.

A problem reads::

    minimize    c . x + c0
    subject to  F0_k + sum_i x_i F_ik  >= 0   (Hermitian PSD, every block k)
                A x = b

with ``x`` real. Block coefficients are stored row-major vectorized, one sparse
column per variable, so that ``vec(F(x)) = F0.ravel() + coeffs @ x``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

STATUSES = ("optimal", "infeasible", "numericalTrouble", "maxIterations")


@dataclass(frozen=True)
class Block:
    """One Hermitian linear matrix inequality ``F0 + sum_i x_i F_i >= 0``.

    Attributes
    ----------
    size : int
        Side length ``m``.
    f0 : numpy.ndarray
        Constant ``m x m`` Hermitian term.
    coeffs : scipy.sparse.csc_matrix
        ``m*m x n`` complex matrix; column ``i`` is ``F_i`` vectorized row-major.
    label : str
        Free-form tag used in diagnostics and exports.
    """

    size: int
    f0: np.ndarray
    coeffs: sp.csc_matrix
    label: str = ""

    def evaluate(self, x) -> np.ndarray:
        m = self.size
        v = self.f0.ravel() + self.coeffs @ np.asarray(x, dtype=float)
        return v.reshape(m, m)

    def coefficient(self, i: int) -> np.ndarray:
        m = self.size
        return np.asarray(self.coeffs[:, i].todense()).reshape(m, m)

    @property
    def is_real(self) -> bool:
        return not (np.any(self.f0.imag) or (self.coeffs.nnz and np.any(self.coeffs.data.imag)))


@dataclass(frozen=True)
class SdpProblem:
    n_vars: int
    c: np.ndarray
    blocks: tuple[Block, ...]
    a_eq: sp.csr_matrix = None
    b_eq: np.ndarray = None
    c0: float = 0.0
    var_names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        n = self.n_vars
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float).reshape(n))
        if self.a_eq is None:
            object.__setattr__(self, "a_eq", sp.csr_matrix((0, n)))
            object.__setattr__(self, "b_eq", np.zeros(0))
        else:
            object.__setattr__(self, "a_eq", sp.csr_matrix(self.a_eq, dtype=float))
            object.__setattr__(self, "b_eq", np.asarray(self.b_eq, dtype=float).ravel())
        if self.a_eq.shape[1] != n or self.a_eq.shape[0] != self.b_eq.size:
            raise ValueError("equality data has inconsistent shape")
        for blk in self.blocks:
            if blk.coeffs.shape != (blk.size * blk.size, n):
                raise ValueError(f"block {blk.label!r} coefficient shape {blk.coeffs.shape} mismatch")

    @property
    def n_eq(self) -> int:
        return self.a_eq.shape[0]

    def objective(self, x) -> float:
        return float(self.c @ x + self.c0)

    def primal_residual(self, x) -> float:
        """Largest violation of the equalities or of block positivity at ``x``."""
        r = 0.0
        if self.n_eq:
            r = float(np.max(np.abs(self.a_eq @ x - self.b_eq)))
        for blk in self.blocks:
            m = blk.evaluate(x)
            r = max(r, -float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]))
        return r

    def check_hermitian(self, tol: float = 1e-12) -> None:
        for blk in self.blocks:
            m = blk.size
            if np.max(np.abs(blk.f0 - blk.f0.conj().T), initial=0.0) > tol:
                raise ValueError(f"block {blk.label!r}: constant term not Hermitian")
            co = blk.coeffs.tocoo()
            i, j = np.divmod(co.row, m)
            t = sp.csc_matrix((co.data.conj(), (j * m + i, co.col)), shape=blk.coeffs.shape)
            d = (t - blk.coeffs)
            if d.nnz and np.max(np.abs(d.data)) > tol:
                raise ValueError(f"block {blk.label!r}: coefficient not Hermitian")


@dataclass
class SdpSolution:
    x: np.ndarray
    primal_objective: float
    dual_objective: float
    gap: float
    max_primal_residual: float
    status: str
    iterations: int = 0
    seconds: float = 0.0
    detail: str = ""
    history: list = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.primal_objective


def block_from_dense(f0, fs, label: str = "") -> Block:
    """Build a :class:`Block` from a constant and a list of dense coefficients."""
    f0 = np.asarray(f0, dtype=complex)
    m = f0.shape[0]
    cols = [sp.csc_matrix(np.asarray(f, dtype=complex).reshape(m * m, 1)) for f in fs]
    coeffs = sp.hstack(cols, format="csc") if cols else sp.csc_matrix((m * m, 0), dtype=complex)
    return Block(m, f0, coeffs, label)


def complex_to_real(h):
    """Real symmetric embedding ``[[Re h, -Im h], [Im h, Re h]]`` of a Hermitian matrix.

    Accepts a dense array or a :class:`Block`; a block is mapped to the block of
    size ``2m`` whose constant and coefficients are embedded the same way. The
    spectrum of the embedding is that of ``h`` with every multiplicity doubled.
    """
    if isinstance(h, Block):
        m = h.size
        f0 = complex_to_real(h.f0)
        co = h.coeffs.tocoo()
        i, j = np.divmod(co.row, m)
        rows, vals, cols = [], [], []
        m2 = 2 * m
        for di, dj, part in ((0, 0, co.data.real), (0, m, -co.data.imag),
                             (m, 0, co.data.imag), (m, m, co.data.real)):
            rows.append((i + di) * m2 + (j + dj))
            vals.append(part)
            cols.append(co.col)
        coeffs = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                               shape=(m2 * m2, h.coeffs.shape[1]))
        coeffs.eliminate_zeros()
        return Block(m2, f0.astype(complex), coeffs.astype(complex), h.label)
    h = np.asarray(h, dtype=complex)
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])
