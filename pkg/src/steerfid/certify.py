"""Device-independent witnesses for entangled two-qubit states and non-EB qubit channels.

Only the perfect self-testing regime is covered: the parties' steered states
equal reference assemblages exactly, and the Bell-state measurements project
onto ``|Phi+> = (|00> + |11>)/sqrt(2)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import qmat
from .steering import Assemblage, projective_povms, steered_assemblage

PHI_PLUS = qmat.proj(qmat.ket(1, 0, 0, 1) / np.sqrt(2))
TOL = 1e-10


class CompletenessError(ValueError):
    """Raised when a set of operators cannot span the required Hermitian space."""


def pauli_assemblage() -> Assemblage:
    """Assemblage steered from ``|Phi+>`` by Z, X and Y measurements.

    Its six elements span the qubit Hermitian space, so it works as a
    tomographically complete side for both witnesses.
    """
    return steered_assemblage(PHI_PLUS, projective_povms([qmat.Z, qmat.X, qmat.Y]))


def werner_state(w: float) -> np.ndarray:
    """``w |Psi-><Psi-| + (1 - w) I/4``."""
    psi_m = (qmat.ket(0, 1, 0, 0) - qmat.ket(0, 0, 1, 0)) / np.sqrt(2)
    return w * qmat.proj(psi_m) + (1 - w) * np.eye(4) / 4


@dataclass
class Witness:
    """A two-qubit witness operator and its expansion over two assemblages.

    ``coefficients[c, d, u, v]`` multiplies ``(tau[c, u])^T (x) (omega[d, v])^T``.
    """

    operator: np.ndarray
    coefficients: np.ndarray
    side_a: np.ndarray
    side_b: np.ndarray
    residual: float

    def reconstruct(self) -> np.ndarray:
        return reconstruct(self.coefficients, self.side_a, self.side_b)


# witness construction ---------------------------------------------------------------

def ppt_witness(state, tol: float = 1e-12) -> Optional[np.ndarray]:
    """Witness from the most negative eigenvector of the partial transpose.

    Returns ``(|phi><phi|)^{T_B}`` when ``state^{T_B}`` has an eigenvalue below
    ``-tol``, otherwise ``None`` (in two qubits PPT means separable).
    """
    rho = qmat.as_cmatrix(state)
    if rho.shape != (4, 4):
        raise ValueError("expected a two-qubit density matrix")
    w, v = qmat.eig_hermitian(qmat.partial_transpose(qmat.hermitian_part(rho), (2, 2), "B"))
    if w[0] >= -tol:
        return None
    return qmat.partial_transpose(qmat.proj(v[:, 0]), (2, 2), "B")


def _elements(side) -> np.ndarray:
    el = side.elements if isinstance(side, Assemblage) else np.asarray(side, dtype=complex)
    if el.ndim != 4:
        raise ValueError("side must be indexed as [outcome, setting, d, d]")
    return el


def _normalized(el: np.ndarray) -> np.ndarray:
    tr = np.real(np.einsum("axii->ax", el))
    out = np.zeros_like(el)
    nz = tr > 0
    out[nz] = el[nz] / tr[nz][:, None, None]
    return out


def _design(ta: np.ndarray, tb: np.ndarray) -> np.ndarray:
    """Real design matrix whose column ``(c, d, u, v)`` is ``vec(ta^T (x) tb^T)``."""
    A, U = ta.shape[:2]
    D, V = tb.shape[:2]
    cols = np.empty((16, A, D, U, V), dtype=complex)
    for c in range(A):
        for u in range(U):
            for d in range(D):
                for v in range(V):
                    cols[:, c, d, u, v] = np.kron(ta[c, u].T, tb[d, v].T).ravel()
    cols = cols.reshape(16, -1)
    return np.vstack([cols.real, cols.imag])


def reconstruct(coefficients, side_a, side_b) -> np.ndarray:
    """``sum beta[c, d, u, v] (tau[c, u])^T (x) (omega[d, v])^T``."""
    ta, tb = _elements(side_a), _elements(side_b)
    beta = np.asarray(coefficients, dtype=float)
    return np.einsum("cduv,cuij,dvkl->ikjl", beta, np.transpose(ta, (0, 1, 3, 2)),
                     np.transpose(tb, (0, 1, 3, 2))).reshape(4, 4)


def expand_coefficients(operator, side_a, side_b, normalize_a: bool = False) -> Witness:
    """Minimum-norm real coefficients expanding ``operator`` over the two sides.

    Parameters
    ----------
    operator : (4, 4) Hermitian array
    side_a, side_b : Assemblage or (A, X, 2, 2) array
        Qubit assemblages. The overcomplete basis leaves the expansion
        non-unique; the least-norm solution is returned.
    normalize_a : bool
        Expand over the normalized states of ``side_a`` (the channel witness
        uses them as inputs).

    Raises
    ------
    CompletenessError
        If the products of the two sides do not span the 16-dimensional
        Hermitian space.
    """
    W = qmat.as_cmatrix(operator)
    if not qmat.is_hermitian(W, 1e-10):
        raise ValueError("witness operator must be Hermitian")
    ta, tb = _elements(side_a), _elements(side_b)
    if ta.shape[2:] != (2, 2) or tb.shape[2:] != (2, 2):
        raise ValueError("both sides must be qubit assemblages")
    if normalize_a:
        ta = _normalized(ta)
    M = _design(ta, tb)
    if np.linalg.matrix_rank(M, tol=1e-10) < 16:
        raise CompletenessError("sides are not tomographically complete")
    rhs = np.concatenate([W.ravel().real, W.ravel().imag])
    beta, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    beta = beta.reshape(ta.shape[0], tb.shape[0], ta.shape[1], tb.shape[1])
    res = float(np.max(np.abs(reconstruct(beta, ta, tb) - W)))
    if res > TOL:
        raise CompletenessError(f"reconstruction residual {res:.2e}")
    return Witness(W, beta, ta, tb, res)


# evaluation ---------------------------------------------------------------------------

def _bsm_value(tau: np.ndarray, rho_ab: np.ndarray, omega: np.ndarray) -> float:
    """``tr[(Phi+ (x) Phi+)(tau (x) rho (x) omega)]`` on ``A0 A B B0``."""
    proj = np.kron(PHI_PLUS, PHI_PLUS)
    op = qmat.kron(tau, rho_ab, omega)
    return float(np.real(np.trace(proj @ op)))


def evaluate_diew(coefficients, state, side_a, side_b) -> float:
    """Entanglement witness value for perfect self-tested sides.

    Sums ``beta * tr[(Phi+ (x) Phi+)(tau (x) rho_AB (x) omega)]`` over all
    coefficients. Equals ``tr(W rho_AB) / 4`` for the reconstructed ``W``.
    """
    ta, tb = _elements(side_a), _elements(side_b)
    beta = np.asarray(coefficients, dtype=float)
    rho = qmat.as_cmatrix(state)
    total = 0.0
    for (c, d, u, v), b in np.ndenumerate(beta):
        if b != 0.0:
            total += b * _bsm_value(ta[c, u], rho, tb[d, v])
    return float(total)


@dataclass
class StateReport:
    verdict: str
    value: Optional[float]
    residual: Optional[float]
    min_pt_eigenvalue: float

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


def certify_state(state, side_a=None, side_b=None) -> StateReport:
    """Build the PPT witness for ``state`` and evaluate it device-independently."""
    rho = qmat.as_cmatrix(state)
    lam = float(qmat.eig_hermitian(qmat.partial_transpose(qmat.hermitian_part(rho), (2, 2), "B"))[0][0])
    W = ppt_witness(rho)
    if W is None:
        return StateReport("no witness", None, None, lam)
    side_a = pauli_assemblage() if side_a is None else side_a
    side_b = pauli_assemblage() if side_b is None else side_b
    wit = expand_coefficients(W, side_a, side_b)
    val = evaluate_diew(wit.coefficients, rho, wit.side_a, wit.side_b)
    return StateReport("entangled" if val < 0 else "inconclusive", val, wit.residual, lam)


# channels -------------------------------------------------------------------------------

@dataclass
class QubitChannel:
    """Qubit channel in Kraus form.

    Raises
    ------
    ValueError
        If ``sum K^dagger K`` differs from the identity by more than 1e-10.
    """

    kraus: tuple

    def __init__(self, kraus: Sequence, check: bool = True):
        ks = tuple(qmat.as_cmatrix(k) for k in kraus)
        if not ks or any(k.shape != (2, 2) for k in ks):
            raise ValueError("Kraus operators must be 2x2")
        if check:
            s = sum(k.conj().T @ k for k in ks)
            if np.max(np.abs(s - np.eye(2))) > TOL:
                raise ValueError("Kraus operators are not trace preserving")
        self.kraus = ks

    def __call__(self, rho) -> np.ndarray:
        rho = qmat.as_cmatrix(rho)
        return sum(k @ rho @ k.conj().T for k in self.kraus)

    def to_json(self) -> str:
        return json.dumps({"kraus": [[[[z.real, z.imag] for z in row] for row in k] for k in self.kraus]})

    @classmethod
    def from_json(cls, text: str) -> "QubitChannel":
        data = json.loads(text)
        ks = data["kraus"] if isinstance(data, dict) else data
        return cls([np.array([[complex(*z) if isinstance(z, list) else complex(z) for z in row] for row in k])
                    for k in ks])

    @classmethod
    def identity(cls) -> "QubitChannel":
        return cls([np.eye(2)])

    @classmethod
    def depolarizing(cls, p: float = 1.0) -> "QubitChannel":
        """``rho -> (1 - p) rho + p I/2``; ``p = 1`` is completely depolarizing."""
        if not 0 <= p <= 4 / 3:
            raise ValueError("depolarizing parameter must lie in [0, 4/3]")
        k0 = np.sqrt(1 - 3 * p / 4) * np.eye(2)
        ks = [k0] + [np.sqrt(p / 4) * s for s in (qmat.X, qmat.Y, qmat.Z)]
        return cls(ks)

    @classmethod
    def amplitude_damping(cls, gamma: float) -> "QubitChannel":
        if not 0 <= gamma <= 1:
            raise ValueError("damping parameter must lie in [0, 1]")
        return cls([np.array([[1, 0], [0, np.sqrt(1 - gamma)]]), np.array([[0, np.sqrt(gamma)], [0, 0]])])

    @classmethod
    def measure_prepare(cls, povm: Sequence, states: Sequence) -> "QubitChannel":
        """``rho -> sum_k tr(Pi_k rho) xi_k`` for rank-one effects ``Pi_k``.

        Each effect ``c |e><e|`` and pure state ``|s><s|`` contribute the Kraus
        operator ``sqrt(c) |s><e|``.
        """
        ks = []
        for pi, xi in zip(povm, states):
            w, v = np.linalg.eigh(qmat.hermitian_part(qmat.as_cmatrix(pi)))
            ws, vs = np.linalg.eigh(qmat.hermitian_part(qmat.as_cmatrix(xi)))
            for lam, e in zip(w, v.T):
                if lam <= 1e-14:
                    continue
                for mu, s in zip(ws, vs.T):
                    if mu <= 1e-14:
                        continue
                    ks.append(np.sqrt(lam * mu) * np.outer(s, e.conj()))
        return cls(ks)


def choi(channel: QubitChannel, normalized: bool = True) -> np.ndarray:
    """Choi matrix ``(id (x) N)(|Phi+><Phi+|)`` with the input factor first.

    ``normalized=False`` uses the unnormalized ``|00> + |11>`` and gives
    trace 2.
    """
    J = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2))
            e[i, j] = 1
            J += np.kron(e, channel(e))
    return J / 2 if normalized else J


def is_entanglement_breaking(channel: QubitChannel, tol: float = TOL) -> bool:
    """True iff the Choi matrix has a PSD partial transpose (exact for qubits)."""
    pt = qmat.partial_transpose(choi(channel), (2, 2), "B")
    return bool(qmat.eig_hermitian(qmat.hermitian_part(pt))[0][0] >= -tol)


def channel_witness(channel: QubitChannel, side_a=None, side_b=None) -> Optional[Witness]:
    """PPT witness of the channel's Choi matrix expanded over normalized ``side_a``."""
    W = ppt_witness(choi(channel))
    if W is None:
        return None
    side_a = pauli_assemblage() if side_a is None else side_a
    side_b = pauli_assemblage() if side_b is None else side_b
    return expand_coefficients(W, side_a, side_b, normalize_a=True)


def evaluate_channel_witness(coefficients, channel: QubitChannel, side_a, side_b,
                             normalize_a: bool = True) -> float:
    """Channel witness ``sum gamma tr[Phi+ (N(tau_hat) (x) omega)]``.

    Equals ``tr(J W)`` for the normalized Choi matrix ``J``, i.e. half the
    trace against the unnormalized one.
    """
    ta, tb = _elements(side_a), _elements(side_b)
    if normalize_a:
        ta = _normalized(ta)
    g = np.asarray(coefficients, dtype=float)
    total = 0.0
    for (c, d, u, v), gv in np.ndenumerate(g):
        if gv != 0.0:
            total += gv * float(np.real(np.trace(PHI_PLUS @ np.kron(channel(ta[c, u]), tb[d, v]))))
    return float(total)


@dataclass
class ChannelReport:
    verdict: str
    value: Optional[float]
    residual: Optional[float]
    entanglement_breaking: bool

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


def certify_channel(channel: QubitChannel, side_a=None, side_b=None) -> ChannelReport:
    side_a = pauli_assemblage() if side_a is None else side_a
    side_b = pauli_assemblage() if side_b is None else side_b
    eb = is_entanglement_breaking(channel)
    wit = channel_witness(channel, side_a, side_b)
    if wit is None:
        return ChannelReport("no witness", None, None, eb)
    val = evaluate_channel_witness(wit.coefficients, channel, side_a, side_b)
    return ChannelReport("non-entanglement-breaking" if val < 0 else "inconclusive", val, wit.residual, eb)


# random samplers --------------------------------------------------------------------

def random_separable_state(rng: np.random.Generator, n_terms: int = 4) -> np.ndarray:
    """Convex mixture of ``n_terms`` random pure product states."""
    p = rng.dirichlet(np.ones(n_terms))
    return sum(pk * np.kron(qmat.proj(qmat.random_pure(2, rng)), qmat.proj(qmat.random_pure(2, rng))) for pk in p)


def random_eb_channel(rng: np.random.Generator, n_outcomes: int = 3) -> QubitChannel:
    """Measure-and-prepare channel with a random rank-one POVM and random pure outputs."""
    vecs = rng.normal(size=(n_outcomes, 2)) + 1j * rng.normal(size=(n_outcomes, 2))
    S = vecs.T @ vecs.conj()
    w, v = np.linalg.eigh(S)
    Sm = v @ np.diag(w ** -0.5) @ v.conj().T
    povm = [Sm @ np.outer(e, e.conj()) @ Sm for e in vecs]
    states = [qmat.proj(qmat.random_pure(2, rng)) for _ in range(n_outcomes)]
    return QubitChannel.measure_prepare(povm, states)


def random_channel(rng: np.random.Generator, n_kraus: int = 2) -> QubitChannel:
    """Haar-like random channel from an isometry built by QR."""
    g = rng.normal(size=(2 * n_kraus, 2)) + 1j * rng.normal(size=(2 * n_kraus, 2))
    q, _ = np.linalg.qr(g)
    return QubitChannel([q[2 * k:2 * k + 2] for k in range(n_kraus)])
