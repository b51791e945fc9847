"""Assemblages, local-hidden-state models and fidelity measures.

Outcome and setting labels are zero-based throughout: element ``(a, x)`` of an
assemblage is the subnormalized state Bob holds when Alice measured setting
``x`` and obtained outcome ``a``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from . import qmat

TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Assemblage:
    """Family of subnormalized operators ``rho[a, x]`` on a ``d``-dimensional space.

    Parameters
    ----------
    elements : array_like
        Array of shape ``(n_outcomes, n_settings, d, d)``.
    validate : bool
        Check positivity, normalization and no-signaling on construction.
    """

    elements: np.ndarray
    validate: bool = True

    def __post_init__(self):
        el = np.array(self.elements, dtype=complex)
        if el.ndim != 4 or el.shape[2] != el.shape[3]:
            raise ValueError(f"assemblage elements need shape (A, X, d, d), got {el.shape}")
        el.setflags(write=False)
        object.__setattr__(self, "elements", el)
        if self.validate:
            self.check()

    @property
    def n_outcomes(self) -> int:
        return self.elements.shape[0]

    @property
    def n_settings(self) -> int:
        return self.elements.shape[1]

    @property
    def dim(self) -> int:
        return self.elements.shape[2]

    def __getitem__(self, ax) -> np.ndarray:
        a, x = ax
        return self.elements[a, x]

    def marginal(self, a: int, x: int) -> float:
        return float(np.trace(self.elements[a, x]).real)

    @property
    def marginals(self) -> np.ndarray:
        """``(n_outcomes, n_settings)`` array of ``tr rho[a, x]``."""
        return np.real(np.einsum("axii->ax", self.elements))

    def reduced_state(self, x: int = 0) -> np.ndarray:
        return self.elements[:, x].sum(axis=0)

    def normalized(self, a: int, x: int) -> np.ndarray:
        p = self.marginal(a, x)
        if p <= 0:
            raise ZeroDivisionError(f"element ({a}, {x}) has zero weight")
        return self.elements[a, x] / p

    def check(self, tol: float = TOL) -> None:
        """Raise ``ValueError`` if an assemblage invariant fails."""
        for a, x in itertools.product(range(self.n_outcomes), range(self.n_settings)):
            m = self.elements[a, x]
            if not qmat.is_hermitian(m, max(tol, qmat.HERM_TOL)):
                raise ValueError(f"element ({a}, {x}) is not Hermitian")
            if qmat.min_eig(m) < -tol:
                raise ValueError(f"element ({a}, {x}) is not positive semidefinite")
        sums = self.marginals.sum(axis=0)
        if np.max(np.abs(sums - 1.0)) > tol:
            raise ValueError(f"marginals do not sum to one per setting: {sums}")
        red = self.elements.sum(axis=0)
        if np.max(np.abs(red - red[0][None]), initial=0.0) > tol:
            raise ValueError("assemblage is signaling: reduced state depends on the setting")

    def is_pure(self, tol: float = 1e-9) -> bool:
        """Every nonzero element has rank one."""
        for a, x in itertools.product(range(self.n_outcomes), range(self.n_settings)):
            p = self.marginal(a, x)
            if p <= tol:
                continue
            n = self.elements[a, x] / p
            if abs(np.trace(n @ n).real - 1.0) > tol:
                return False
        return True

    def pure_vectors(self) -> np.ndarray:
        """Unit vectors ``|sigma[a, x]>`` spanning each (rank-one) element.

        Returns an array of shape ``(A, X, d)``; zero-weight slots hold zeros.
        """
        if not self.is_pure():
            raise ValueError("assemblage is not pure")
        out = np.zeros(self.elements.shape[:3], dtype=complex)
        for a, x in itertools.product(range(self.n_outcomes), range(self.n_settings)):
            if self.marginal(a, x) <= 1e-12:
                continue
            w, v = np.linalg.eigh(self.normalized(a, x))
            out[a, x] = v[:, -1]
        return out

    @property
    def is_complex(self) -> bool:
        """True when some element has a nonzero imaginary part."""
        return bool(np.max(np.abs(self.elements.imag), initial=0.0) > 1e-12)

    def transpose(self) -> "Assemblage":
        return Assemblage(np.swapaxes(self.elements, 2, 3), validate=False)

    # serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "outcomes": self.n_outcomes,
            "settings": self.n_settings,
            "elements": [
                {"a": a, "x": x,
                 "entries": [[float(z.real), float(z.imag)] for z in self.elements[a, x].ravel()]}
                for a in range(self.n_outcomes) for x in range(self.n_settings)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: Mapping, validate: bool = True) -> "Assemblage":
        dim, na, nx = int(d["dim"]), int(d["outcomes"]), int(d["settings"])
        el = np.zeros((na, nx, dim, dim), dtype=complex)
        for item in d["elements"]:
            vals = np.array([complex(re, im) for re, im in item["entries"]])
            if vals.size != dim * dim:
                raise ValueError("element entry count does not match dim")
            el[int(item["a"]), int(item["x"])] = vals.reshape(dim, dim)
        return cls(el, validate=validate)

    @classmethod
    def from_json(cls, text: str, validate: bool = True) -> "Assemblage":
        return cls.from_dict(json.loads(text), validate=validate)


def assemblage_from_vectors(vectors, marginals) -> Assemblage:
    """Pure assemblage ``P(a|x) |v_ax><v_ax|`` from unit vectors and weights."""
    vectors = np.asarray(vectors, dtype=complex)
    marginals = np.asarray(marginals, dtype=float)
    na, nx, d = vectors.shape
    el = np.zeros((na, nx, d, d), dtype=complex)
    for a, x in itertools.product(range(na), range(nx)):
        v = vectors[a, x] / np.linalg.norm(vectors[a, x])
        el[a, x] = marginals[a, x] * qmat.proj(v)
    return Assemblage(el)


@dataclass(frozen=True, eq=False)
class LhsModel:
    """Local-hidden-state model over all deterministic strategies.

    Strategy ``k`` assigns outcome ``strategies[k][x]`` to setting ``x``; the
    strategies enumerate ``range(n_outcomes) ** n_settings`` in lexicographic
    order.
    """

    n_outcomes: int
    n_settings: int
    hidden_states: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        hs = np.asarray(self.hidden_states, dtype=complex)
        nl = self.n_outcomes ** self.n_settings
        if hs.shape[0] != nl:
            raise ValueError(f"need {nl} hidden states, got {hs.shape[0]}")
        w = np.full(nl, 1.0 / nl) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (nl,) or np.any(w < -TOL) or abs(w.sum() - 1.0) > TOL:
            raise ValueError("weights must be a probability vector over strategies")
        for k, s in enumerate(hs):
            if abs(np.trace(s).real - 1.0) > TOL or qmat.min_eig(s) < -TOL:
                raise ValueError(f"hidden state {k} is not a density matrix")
        object.__setattr__(self, "hidden_states", hs)
        object.__setattr__(self, "weights", w)

    @property
    def strategies(self) -> list[tuple[int, ...]]:
        return list(itertools.product(range(self.n_outcomes), repeat=self.n_settings))

    def assemblage(self) -> Assemblage:
        d = self.hidden_states.shape[1]
        el = np.zeros((self.n_outcomes, self.n_settings, d, d), dtype=complex)
        for w, lam, s in zip(self.weights, self.strategies, self.hidden_states):
            for x, a in enumerate(lam):
                el[a, x] += w * s
        return Assemblage(el)


@dataclass(frozen=True, eq=False)
class ControlledMixture:
    """``q sigma (x) |0><0| + (1-q) sigma^T (x) |1><1|`` applied element-wise."""

    base: Assemblage
    q: float

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("q must lie in [0, 1]")

    def assemblage(self) -> Assemblage:
        p0, p1 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
        b = self.base.elements
        el = np.array([[self.q * np.kron(b[a, x], p0) + (1 - self.q) * np.kron(b[a, x].T, p1)
                        for x in range(b.shape[1])] for a in range(b.shape[0])])
        return Assemblage(el)


def _povm_array(povms, d_a: int | None = None) -> np.ndarray:
    if isinstance(povms, Mapping):
        na = 1 + max(a for a, _ in povms)
        nx = 1 + max(x for _, x in povms)
        first = np.asarray(next(iter(povms.values())))
        out = np.zeros((na, nx) + first.shape, dtype=complex)
        for (a, x), m in povms.items():
            out[a, x] = m
        return out
    return np.asarray(povms, dtype=complex)


def steered_assemblage(state, povms, validate: bool = True) -> Assemblage:
    """Assemblage ``tr_A[(E[a, x] (x) 1) state]`` prepared by Alice's measurements.

    Parameters
    ----------
    state : array_like
        Density matrix on ``C^dA (x) C^dB``.
    povms : array_like or mapping
        Array of shape ``(A, X, dA, dA)`` or a mapping ``(a, x) -> E``.

    Raises
    ------
    ValueError
        If some setting's effects are not positive or do not sum to the identity
        within ``1e-8``.
    """
    state = qmat.as_cmatrix(state)
    E = _povm_array(povms)
    na, nx, da, _ = E.shape
    if state.shape[0] % da:
        raise ValueError("state dimension is not a multiple of Alice's dimension")
    db = state.shape[0] // da
    for x in range(nx):
        if np.max(np.abs(E[:, x].sum(axis=0) - np.eye(da))) > 1e-8:
            raise ValueError(f"effects of setting {x} do not sum to the identity")
        for a in range(na):
            if qmat.min_eig(E[a, x]) < -1e-8:
                raise ValueError(f"effect ({a}, {x}) is not positive")
    el = np.zeros((na, nx, db, db), dtype=complex)
    for a, x in itertools.product(range(na), range(nx)):
        el[a, x] = qmat.partial_trace(np.kron(E[a, x], np.eye(db)) @ state, (da, db), "A")
    return Assemblage(el, validate=validate)


def projective_povms(observables: Sequence) -> np.ndarray:
    """Two-outcome effects ``(1 +- O)/2`` for each ``+-1``-valued observable.

    Outcome 0 corresponds to eigenvalue ``+1``.
    """
    obs = [qmat.as_cmatrix(o) for o in observables]
    d = obs[0].shape[0]
    eye = np.eye(d)
    return np.array([[(eye + o) / 2 for o in obs], [(eye - o) / 2 for o in obs]])


def _as_pure_vector(s) -> np.ndarray:
    s = np.asarray(s, dtype=complex)
    if s.ndim == 1 or (s.ndim == 2 and 1 in s.shape):
        v = s.ravel()
        return v / np.linalg.norm(v)
    if abs(np.trace(s @ s).real - 1.0) > 1e-9 or abs(np.trace(s).real - 1.0) > 1e-9:
        raise ValueError("first ensemble must contain pure states")
    w, v = np.linalg.eigh(qmat.hermitian_part(s))
    return v[:, -1]


def ensemble_fidelity(e1, e2) -> float:
    """Fidelity ``sum_i sqrt(p_i q_i) F(rho_i, varsigma_i)`` between two ensembles.

    ``F`` is the root fidelity; since every state of ``e1`` must be pure it
    reduces to ``sqrt(<rho_i|varsigma_i|rho_i>)``.

    Parameters
    ----------
    e1 : sequence of (float, array_like)
        Weights and pure states (kets or rank-one density matrices).
    e2 : sequence of (float, array_like)
        Weights and density matrices (kets are accepted too).
    """
    if len(e1) != len(e2):
        raise ValueError("ensembles must have the same length")
    total = 0.0
    for (p, r), (q, s) in zip(e1, e2):
        v = _as_pure_vector(r)
        s = np.asarray(s, dtype=complex)
        if s.ndim == 1 or 1 in s.shape:
            s = qmat.proj(s.ravel() / np.linalg.norm(s))
        ov = max(0.0, float(np.real(v.conj() @ s @ v)))
        total += np.sqrt(p * q) * np.sqrt(ov)
    return float(total)


def assemblage_fidelity(reference: Assemblage, candidate: Assemblage) -> float:
    """Fidelity between a pure reference assemblage and any candidate.

    ``(1/|X|) sum_{a,x} sqrt(P_ref(a|x) / P_cand(a|x)) <s_ax| rho_ax |s_ax>``,
    where ``|s_ax>`` spans the reference element. Terms where both marginals
    vanish contribute zero.

    Raises
    ------
    ValueError
        If a candidate marginal vanishes where the reference one does not.
    """
    if reference.elements.shape != candidate.elements.shape:
        raise ValueError("assemblages have different shapes")
    vecs = reference.pure_vectors()
    pr, pc = reference.marginals, candidate.marginals
    total = 0.0
    for a, x in itertools.product(range(reference.n_outcomes), range(reference.n_settings)):
        if pr[a, x] <= 1e-14:
            continue
        if pc[a, x] <= 1e-14:
            raise ValueError(f"candidate marginal ({a}, {x}) vanishes against a nonzero reference")
        v = vecs[a, x]
        total += np.sqrt(pr[a, x] / pc[a, x]) * float(np.real(v.conj() @ candidate.elements[a, x] @ v))
    return float(total / reference.n_settings)


def p2_fidelity(a, b) -> float:
    """Schatten-2 fidelity ``tr(ab) / max(tr a^2, tr b^2)`` of two states."""
    a, b = qmat.as_cmatrix(a), qmat.as_cmatrix(b)
    num = float(np.real(np.trace(a @ b)))
    den = max(float(np.real(np.trace(a @ a))), float(np.real(np.trace(b @ b))))
    return num / den


def _lambda_operators(reference: Assemblage):
    vecs = reference.pure_vectors()
    p = reference.marginals
    na, nx, d = vecs.shape
    strategies = list(itertools.product(range(na), repeat=nx))
    ops = []
    for lam in strategies:
        m = np.zeros((d, d), dtype=complex)
        for x, a in enumerate(lam):
            m += np.sqrt(p[a, x]) * qmat.proj(vecs[a, x])
        ops.append(m)
    return strategies, ops


def classical_fidelity_eig(reference: Assemblage) -> float:
    """Best assemblage fidelity reachable by an LHS model with uniform weights.

    The objective is linear in each hidden state separately, so the optimum
    puts every hidden state on the top eigenvector of its strategy operator
    ``M_lam = sum_x sqrt(P(lam_x|x)) |s_{lam_x, x}><s_{lam_x, x}|``.
    """
    strategies, ops = _lambda_operators(reference)
    na, nx = reference.n_outcomes, reference.n_settings
    top = sum(qmat.eig_hermitian(qmat.hermitian_part(m))[0][-1] for m in ops)
    return float(np.sqrt(na) / (nx * len(strategies)) * top)


def classical_fidelity_sdp(reference: Assemblage, gap_tol: float = 1e-9, feas_tol: float = 1e-8):
    """Same optimum as :func:`classical_fidelity_eig`, solved as an SDP.

    Each hidden state is a Hermitian matrix variable constrained to be a
    density matrix; the program maximizes the LHS assemblage fidelity.

    Returns
    -------
    float
        The optimal value.

    Raises
    ------
    RuntimeError
        If the solver does not report ``optimal``.
    """
    from .sdp import Block, SdpProblem, solve

    strategies, ops = _lambda_operators(reference)
    na, nx, d = reference.n_outcomes, reference.n_settings, reference.dim
    nl = len(strategies)
    basis = _hermitian_basis(d)
    nb = len(basis)
    scale = np.sqrt(na) / (nx * nl)
    c = np.zeros(nl * nb)
    rows, bvals = [], []
    blocks = []
    basis_cols = sp.csc_matrix(np.array([b.ravel() for b in basis]).T)
    for k, m in enumerate(ops):
        # maximize scale * tr(M rho)  ->  minimize its negative
        c[k * nb:(k + 1) * nb] = [-scale * float(np.real(np.trace(m @ b))) for b in basis]
        co = sp.hstack([sp.csc_matrix((d * d, k * nb)), basis_cols,
                        sp.csc_matrix((d * d, (nl - k - 1) * nb))], format="csc")
        blocks.append(Block(d, np.zeros((d, d), dtype=complex), co.astype(complex), f"lambda{k}"))
        row = np.zeros(nl * nb)
        row[k * nb:(k + 1) * nb] = [float(np.trace(b).real) for b in basis]
        rows.append(row)
        bvals.append(1.0)
    prob = SdpProblem(nl * nb, c, tuple(blocks), sp.csr_matrix(np.array(rows)), np.array(bvals))
    sol = solve(prob, gap_tol=gap_tol, feas_tol=feas_tol)
    if sol.status != "optimal":
        raise RuntimeError(f"classical fidelity SDP ended with status {sol.status}: {sol.detail}")
    return -sol.primal_objective


def _hermitian_basis(d: int) -> list:
    basis = []
    for i in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[i, i] = 1
        basis.append(e)
    for i in range(d):
        for j in range(i + 1, d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = e[j, i] = 1
            basis.append(e)
            e = np.zeros((d, d), dtype=complex)
            e[i, j], e[j, i] = -1j, 1j
            basis.append(e)
    return basis


# complex reference: mixture identities ------------------------------------

def _elegant_reference_vectors():
    s = 1 / np.sqrt(2)
    return np.array([
        [[1, 0], [s, s], [s, -1j * s]],
        [[0, 1], [s, -s], [s, 1j * s]],
    ], dtype=complex)


@dataclass
class IdentityReport:
    samples: int
    max_residual: float
    worst: str

    @property
    def ok(self) -> bool:
        return self.max_residual < 1e-10


def mixture_identity_residuals(q: float):
    """Residuals of the moment identities satisfied by the controlled mixture.

    The mixture is built from the Pauli-eigenstate reference that a maximally
    entangled pair yields under Z, X, Y measurements (outcome 0 leaves the
    ``+1`` eigenstate of Z and X, and the ``-1`` eigenstate of Y), with auxiliary
    observables ``B5 = Z (x) 1``, ``B6 = X (x) 1``, ``B7 = Y (x) Z``. For every
    element the triple product satisfies ``-i tr(s B5 B6 B7) = q - 1/2``;
    pairs of auxiliaries and single auxiliaries obey sign-patterned versions of
    the same and of ``+-1/2``.

    Returns
    -------
    list of (str, float)
        Label and absolute residual of every identity.
    """
    base = assemblage_from_vectors(_elegant_reference_vectors(), np.full((2, 3), 0.5))
    mix = ControlledMixture(base, q).assemblage()
    b5 = np.kron(qmat.Z, qmat.I2)
    b6 = np.kron(qmat.X, qmat.I2)
    b7 = np.kron(qmat.Y, qmat.Z)
    B = {5: b5, 6: b6, 7: b7}
    out = []
    triple = b5 @ b6 @ b7
    for a in range(2):
        for x in range(3):
            v = -1j * np.trace(mix[a, x] @ triple)
            out.append((f"triple a={a} x={x}", abs(v - (q - 0.5))))
    # pair products: setting -> (k, l, sign applied to outcome 0)
    pairs = {0: (6, 7, +1), 1: (7, 5, +1), 2: (5, 6, -1)}
    for x, (k, l, sgn) in pairs.items():
        for a in range(2):
            expected = sgn * (1 if a == 0 else -1) * (q - 0.5)
            v = -1j * np.trace(mix[a, x] @ B[k] @ B[l])
            out.append((f"pair B{k}B{l} a={a} x={x}", abs(v - expected)))
    singles = {0: (5, +1), 1: (6, +1), 2: (7, -1)}
    for x, (j, sgn) in singles.items():
        for a in range(2):
            expected = 0.5
            v = sgn * (1 if a == 0 else -1) * np.trace(mix[a, x] @ B[j])
            out.append((f"single B{j} a={a} x={x}", abs(v - expected)))
    return out


def verify_mixture_identities(q_samples: int = 1000, seed: int = 0, raise_on_failure: bool = True,
                              tol: float = 1e-10) -> IdentityReport:
    """Check :func:`mixture_identity_residuals` on uniformly sampled ``q``.

    The endpoints ``0``, ``1/2`` and ``1`` are always included.
    """
    rng = np.random.default_rng(seed)
    qs = np.concatenate([[0.0, 0.5, 1.0], rng.uniform(0.0, 1.0, max(0, q_samples - 3))])[:max(q_samples, 3)]
    worst, worst_label = 0.0, ""
    for q in qs:
        for label, r in mixture_identity_residuals(float(q)):
            if r > worst:
                worst, worst_label = r, f"{label} q={q:.6f}"
    rep = IdentityReport(len(qs), float(worst), worst_label)
    if raise_on_failure and worst >= tol:
        raise AssertionError(f"mixture identity residual {worst:.3e} at {worst_label}")
    return rep
