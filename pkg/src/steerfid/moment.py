"""Moment relaxations over Bob's unknown observables.

Words are tuples of zero-based generator indices; the word ``(i, j)`` stands for
the operator product ``B_i B_j``. Generators are Hermitian and square to the
identity, so adjacent repeats cancel and the adjoint of a word is its reversal.

For an assemblage element ``rho[a, x]`` the moment of a word ``w`` is
``tr(w rho[a, x])``; the moment of the reversed word is its complex conjugate.
The compiler keeps one real variable per real part and one per imaginary part
of every conjugation orbit, and eliminates no-signaling structurally: it stores
moments of the reduced state ``R = sum_a rho[a, x]`` and of every element
except the last outcome, whose moments are ``R`` minus the others.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from . import qmat
from .sdp import Block, SdpProblem

Word = tuple
WordPoly = dict  # canonical word -> complex coefficient


class ContainmentError(ValueError):
    """A localizing matrix needs a moment that the moment matrices never produce."""


class AboveQuantumBound(ValueError):
    """Requested Bell value exceeds the scenario's quantum bound."""


# word algebra ---------------------------------------------------------------

def canonicalize(w: Iterable[int]) -> Word:
    """Cancel adjacent equal generators until none remain."""
    out: list[int] = []
    for g in w:
        if out and out[-1] == g:
            out.pop()
        else:
            out.append(int(g))
    return tuple(out)


def adjoint(w: Iterable[int]) -> Word:
    return canonicalize(tuple(w)[::-1])


def orbit_rep(w: Word) -> Word:
    """Representative of ``{w, reversed w}``: shorter first, then lexicographic."""
    r = w[::-1]
    return min(w, r)


def is_palindrome(w: Word) -> bool:
    return w == w[::-1]


def word_from_string(s: str) -> Word:
    """Parse ``"B1B2"``-style (one-based) labels; ``""`` or ``"1"`` is the identity."""
    s = s.strip()
    if s in ("", "1", "I"):
        return ()
    parts = [p for p in s.split("B") if p]
    return canonicalize(int(p) - 1 for p in parts)


def word_to_string(w: Word) -> str:
    return "".join(f"B{g + 1}" for g in w) if w else "1"


def word_matrix(w: Word, observables: Sequence[np.ndarray]) -> np.ndarray:
    d = np.asarray(observables[0]).shape[0]
    m = np.eye(d, dtype=complex)
    for g in w:
        m = m @ observables[g]
    return m


def poly(*terms) -> WordPoly:
    """Word polynomial from ``(coefficient, word)`` pairs."""
    out: WordPoly = {}
    for c, w in terms:
        w = canonicalize(w)
        out[w] = out.get(w, 0) + complex(c)
    return {w: c for w, c in out.items() if c != 0}


def poly_mul(p: WordPoly, q: WordPoly) -> WordPoly:
    return poly(*((cp * cq, wp + wq) for wp, cp in p.items() for wq, cq in q.items()))


def poly_scale(p: WordPoly, s: complex) -> WordPoly:
    return {w: c * s for w, c in p.items()}


def poly_matrix(p: WordPoly, observables) -> np.ndarray:
    return sum(c * word_matrix(w, observables) for w, c in p.items())


def npa_sequence(n_generators: int, level: int) -> list:
    """All canonical words of length at most ``level``, identity first."""
    seq = [()]
    frontier = [()]
    for _ in range(level):
        nxt = []
        for w in frontier:
            for g in range(n_generators):
                if not w or w[-1] != g:
                    nxt.append(w + (g,))
        seq.extend(nxt)
        frontier = nxt
    return seq


# polynomials in assemblage moments ---------------------------------------------

@dataclass(frozen=True)
class MomentPolynomial:
    """Linear form ``constant + sum coeff * tr(word rho[a, x])``.

    ``terms`` holds ``(a, x, word, coefficient)`` tuples; a negative ``a``
    denotes the reduced state ``R`` (setting-independent).
    """

    terms: tuple
    constant: complex = 0.0
    hermitian: bool = True

    def evaluate(self, moments) -> complex:
        """Evaluate against a mapping or callable ``(a, x, word) -> moment``."""
        get = moments if callable(moments) else (lambda a, x, w: moments[(a, x, w)])
        return self.constant + sum(c * get(a, x, canonicalize(w)) for a, x, w, c in self.terms)

    def evaluate_realization(self, assemblage, observables) -> complex:
        el = assemblage.elements

        def m(a, x, w):
            rho = el[:, 0].sum(axis=0) if a < 0 else el[a, x]
            return np.trace(word_matrix(w, observables) @ rho)

        return self.evaluate(m)

    def words(self) -> set:
        return {canonicalize(w) for _, _, w, _ in self.terms}

    def scaled(self, s: float) -> "MomentPolynomial":
        return MomentPolynomial(tuple((a, x, w, c * s) for a, x, w, c in self.terms),
                                self.constant * s, self.hermitian)


# moment table ------------------------------------------------------------------

class Lin:
    """Affine expression ``const + sum_k coef[k] x_k`` with complex coefficients."""

    __slots__ = ("const", "coef")

    def __init__(self, const: complex = 0.0, coef: dict | None = None):
        self.const = complex(const)
        self.coef = coef if coef is not None else {}

    def add(self, other: "Lin", s: complex = 1.0) -> "Lin":
        self.const += s * other.const
        for k, v in other.coef.items():
            self.coef[k] = self.coef.get(k, 0) + s * v
        return self

    def conj(self) -> "Lin":
        return Lin(self.const.conjugate(), {k: v.conjugate() for k, v in self.coef.items()})

    def value(self, x) -> complex:
        return self.const + sum(v * x[k] for k, v in self.coef.items())


class MomentTable:
    """Real decision variables for every assemblage moment in a word set.

    Parameters
    ----------
    n_outcomes, n_settings : int
    words : iterable of words
        Every canonical word whose moment is needed (closed under reversal
        automatically).
    marginals : array_like
        ``(n_outcomes, n_settings)`` probabilities pinning identity moments.
    """

    def __init__(self, n_outcomes: int, n_settings: int, words, marginals):
        self.n_outcomes = n_outcomes
        self.n_settings = n_settings
        self.marginals = np.asarray(marginals, dtype=float)
        reps = sorted({orbit_rep(canonicalize(w)) for w in words} - {()}, key=lambda w: (len(w), w))
        self.reps = reps
        self.sources = ["R"] + [(a, x) for x in range(n_settings) for a in range(n_outcomes - 1)]
        self.index: dict = {}
        names = []
        k = 0
        for s in self.sources:
            for w in reps:
                self.index[(s, w, "re")] = k
                names.append(f"Re m[{_src_label(s)}]({word_to_string(w)})")
                k += 1
                if not is_palindrome(w):
                    self.index[(s, w, "im")] = k
                    names.append(f"Im m[{_src_label(s)}]({word_to_string(w)})")
                    k += 1
        self.n_vars = k
        self.var_names = tuple(names)
        self._wordset = {w for r in reps for w in (r, r[::-1])} | {()}

    def __contains__(self, w) -> bool:
        return canonicalize(w) in self._wordset

    @property
    def words(self) -> set:
        return set(self._wordset)

    def source_expr(self, s, w: Word) -> Lin:
        w = canonicalize(w)
        if w == ():
            return Lin(1.0 if s == "R" else self.marginals[s[0], s[1]])
        rep = orbit_rep(w)
        if (s, rep, "re") not in self.index:
            raise KeyError(f"word {word_to_string(w)} is not in the moment table")
        coef = {self.index[(s, rep, "re")]: 1.0 + 0j}
        if not is_palindrome(rep):
            coef[self.index[(s, rep, "im")]] = 1j if w == rep else -1j
        return Lin(0.0, coef)

    def expr(self, a: int, x: int, w: Word) -> Lin:
        """Affine expression of ``tr(w rho[a, x])``; ``a < 0`` means ``R``."""
        if a < 0:
            return self.source_expr("R", w)
        if a < self.n_outcomes - 1:
            return self.source_expr((a, x), w)
        out = self.source_expr("R", w)
        for b in range(self.n_outcomes - 1):
            out.add(self.source_expr((b, x), w), -1.0)
        return out

    def assignment(self, moment) -> np.ndarray:
        """Variable vector from a callable ``moment(source, word) -> complex``."""
        x = np.zeros(self.n_vars)
        for (s, w, part), k in self.index.items():
            v = moment(s, w)
            x[k] = v.real if part == "re" else v.imag
        return x


def _src_label(s) -> str:
    return "R" if s == "R" else f"{s[0]}|{s[1]}"


# symbolic matrices ----------------------------------------------------------------

@dataclass(frozen=True)
class SymMatrix:
    """Affine matrix ``const + sum_k x_k coeffs[:, k]`` (row-major vectorized)."""

    size: int
    const: np.ndarray
    coeffs: sp.csc_matrix

    @classmethod
    def from_entries(cls, entries: Sequence[Sequence[Lin]], n_vars: int) -> "SymMatrix":
        m = len(entries)
        const = np.zeros((m, m), dtype=complex)
        rows, cols, vals = [], [], []
        for i in range(m):
            for j in range(m):
                e = entries[i][j]
                const[i, j] = e.const
                for k, v in e.coef.items():
                    if v != 0:
                        rows.append(i * m + j)
                        cols.append(k)
                        vals.append(v)
        co = sp.csc_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(m * m, n_vars))
        co.sum_duplicates()
        co.eliminate_zeros()
        return cls(m, const, co)

    def evaluate(self, x) -> np.ndarray:
        return (self.const.ravel() + self.coeffs @ np.asarray(x, dtype=float)).reshape(self.size, self.size)

    def _transpose_conj(self) -> "SymMatrix":
        m = self.size
        co = self.coeffs.tocoo()
        i, j = np.divmod(co.row, m)
        t = sp.csc_matrix((co.data.conj(), (j * m + i, co.col)), shape=co.shape)
        return SymMatrix(m, self.const.conj().T, t)

    def hermitian_part(self) -> "SymMatrix":
        t = self._transpose_conj()
        co = ((self.coeffs + t.coeffs) * 0.5).tocsc()
        co.eliminate_zeros()
        return SymMatrix(self.size, 0.5 * (self.const + t.const), co)

    def antihermitian_part(self) -> "SymMatrix":
        t = self._transpose_conj()
        co = ((self.coeffs - t.coeffs) * 0.5).tocsc()
        co.eliminate_zeros()
        return SymMatrix(self.size, 0.5 * (self.const - t.const), co)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        d = self.antihermitian_part()
        return (np.max(np.abs(d.const), initial=0.0) <= tol
                and (d.coeffs.nnz == 0 or np.max(np.abs(d.coeffs.data)) <= tol))

    def to_block(self, label: str = "") -> Block:
        return Block(self.size, self.const.copy(), self.coeffs.tocsc(), label)


def build_moment_matrix(a: int, x: int, S: Sequence[Word], table: MomentTable) -> SymMatrix:
    """Moment matrix with entry ``(i, j) = tr(S_j^dagger S_i rho[a, x])``."""
    if len(S) == 0 or canonicalize(S[0]) != ():
        raise ValueError("the word sequence must start with the identity")
    n = len(S)
    entries = [[table.expr(a, x, tuple(S[j])[::-1] + tuple(S[i])) for j in range(n)] for i in range(n)]
    return SymMatrix.from_entries(entries, table.n_vars)


def localizing_words(p: WordPoly, S: Sequence[Word]) -> set:
    out = set()
    for si in S:
        for sj in S:
            for t in p:
                out.add(canonicalize(tuple(sj)[::-1] + tuple(t) + tuple(si)))
    return out


def build_localizing_matrix(a: int, x: int, p: WordPoly, S: Sequence[Word], table: MomentTable,
                            strict_words: set | None = None) -> SymMatrix:
    """Localizing matrix ``(i, j) = tr(S_j^dagger P S_i rho[a, x])`` for a word polynomial ``P``.

    With ``strict_words`` given, every generated word must belong to it.

    Raises
    ------
    ContainmentError
        If a generated word falls outside ``strict_words`` or the table.
    """
    n = len(S)
    entries = []
    for i in range(n):
        row = []
        for j in range(n):
            e = Lin()
            for t, c in p.items():
                w = canonicalize(tuple(S[j])[::-1] + tuple(t) + tuple(S[i]))
                if strict_words is not None and w not in strict_words:
                    raise ContainmentError(f"localizing word {word_to_string(w)} is not generated by the "
                                           "moment matrices")
                try:
                    e.add(table.expr(a, x, w), c)
                except KeyError as err:
                    raise ContainmentError(str(err)) from None
            row.append(e)
        entries.append(row)
    return SymMatrix.from_entries(entries, table.n_vars)


def polynomial_expr(pol: MomentPolynomial, table: MomentTable) -> Lin:
    out = Lin(pol.constant)
    for a, x, w, c in pol.terms:
        out.add(table.expr(a, x, w), c)
    return out


# assembly ----------------------------------------------------------------------

@dataclass
class RelaxationProblem:
    """Assembled relaxation: PSD blocks, equalities and a linear objective (minimized)."""

    scenario_name: str
    table: MomentTable
    psd_blocks: list
    eq_rows: sp.csr_matrix
    eq_rhs: np.ndarray
    objective: np.ndarray
    objective_constant: float
    violation: float
    marginals: np.ndarray
    mode: str
    stats: dict = field(default_factory=dict)

    def to_sdp(self) -> SdpProblem:
        blocks = tuple(m.to_block(label) for label, m in self.psd_blocks)
        return SdpProblem(self.table.n_vars, self.objective, blocks, self.eq_rows, self.eq_rhs,
                          c0=self.objective_constant, var_names=self.table.var_names)

    def objective_value(self, x) -> float:
        return float(self.objective @ x + self.objective_constant)

    def residuals(self, x) -> dict:
        """Largest equality residual and most negative block eigenvalue at ``x``."""
        eq = float(np.max(np.abs(self.eq_rows @ x - self.eq_rhs), initial=0.0))
        worst = 0.0
        for _, m in self.psd_blocks:
            v = m.evaluate(x)
            worst = min(worst, qmat.min_eig(v))
        return {"equality": eq, "min_eig": worst}


def _check_marginals(marginals, na: int, nx: int) -> np.ndarray:
    p = np.asarray(marginals, dtype=float)
    if p.shape != (na, nx):
        raise ValueError(f"marginals must have shape ({na}, {nx})")
    if np.any(p < -1e-12) or np.max(np.abs(p.sum(axis=0) - 1.0)) > 1e-9:
        raise ValueError("marginals must be nonnegative and sum to one for every setting")
    return p


def _real_rows(exprs: Sequence[Lin], n_vars: int, take_imag: bool = False):
    rows, cols, vals, rhs = [], [], [], []
    for r, e in enumerate(exprs):
        for k, v in e.coef.items():
            val = v.imag if take_imag else v.real
            if val != 0:
                rows.append(r)
                cols.append(k)
                vals.append(val)
        rhs.append(-(e.const.imag if take_imag else e.const.real))
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(exprs), n_vars)), np.array(rhs)


def assemble(scenario, violation: float, marginals=None, mode: str = "equality", strict: bool = False,
             sequence: Sequence[Word] | None = None, localizing_sequence: Sequence[Word] | None = None,
             check_bound: bool = True) -> RelaxationProblem:
    """Compile the fidelity-minimization relaxation for one Bell value.

    Parameters
    ----------
    scenario : BellScenario
    violation : float
        Observed Bell value.
    marginals : array_like, optional
        Observed ``P(a|x)``; defaults to the reference marginals.
    mode : {"equality", "at-least"}
        Pin the Bell value or only bound it from below.
    strict : bool
        Reject localizing words that the moment matrices do not generate.
    sequence, localizing_sequence : list of words, optional
        Override the scenario's word sequences.
    check_bound : bool
        Raise :class:`AboveQuantumBound` for values beyond the quantum bound.

    Returns
    -------
    RelaxationProblem
    """
    if mode in ("eq", "equality"):
        mode = "equality"
    elif mode in ("geq", "at-least", "at_least"):
        mode = "at-least"
    else:
        raise ValueError(f"unknown constraint mode {mode!r}")
    if check_bound and violation > scenario.quantum_bound + 1e-9:
        raise AboveQuantumBound(f"Bell value {violation} exceeds the quantum bound "
                                f"{scenario.quantum_bound:.10f}")
    na, nx = scenario.n_outcomes, scenario.n_settings
    p = _check_marginals(scenario.reference_marginals if marginals is None else marginals, na, nx)
    if np.any(p[scenario.reference_marginals > 0] <= 0):
        raise ValueError("observed marginals vanish where the reference marginals do not")
    S = [canonicalize(w) for w in (sequence if sequence is not None else scenario.moment_sequence)]
    Sl = [canonicalize(w) for w in (localizing_sequence if localizing_sequence is not None
                                   else scenario.localizing_sequence)]
    objective_poly = scenario.fidelity_objective(p)
    bell = scenario.bell_functional

    chi_words = {canonicalize(sj[::-1] + si) for si in S for sj in S}
    chi_closed = chi_words | {w[::-1] for w in chi_words}
    loc_words = set()
    for lp in scenario.localizing_polynomials:
        loc_words |= localizing_words(lp, Sl)
    loc_words |= {w[::-1] for w in loc_words}
    extra = sorted(loc_words - chi_closed, key=lambda w: (len(w), w))
    if strict and extra:
        raise ContainmentError(f"{len(extra)} localizing words are not generated by the moment matrices, "
                               f"e.g. {word_to_string(extra[0])}")
    other = objective_poly.words() | bell.words()
    missing = sorted({orbit_rep(w) for w in other} - {orbit_rep(w) for w in chi_closed | loc_words},
                     key=lambda w: (len(w), w))
    if missing:
        raise ContainmentError("objective or Bell functional needs words outside every matrix: "
                               + ", ".join(word_to_string(w) for w in missing[:5]))
    table = MomentTable(na, nx, chi_closed | loc_words, p)

    blocks = []
    for x in range(nx):
        for a in range(na):
            blocks.append((f"chi[{a}|{x}]", build_moment_matrix(a, x, S, table)))
    anti_rows = []
    for li, lp in enumerate(scenario.localizing_polynomials):
        for x in range(nx):
            for a in range(na):
                L = build_localizing_matrix(a, x, lp, Sl, table)
                blocks.append((f"loc{li}[{a}|{x}]", L.hermitian_part()))
        # the anti-Hermitian part vanishes for R and for every stored element
        for src in [(-1, 0)] + [(a, x) for x in range(nx) for a in range(na - 1)]:
            L = build_localizing_matrix(src[0], src[1], lp, Sl, table)
            anti_rows.append(L.antihermitian_part())

    eq_A, eq_b = [], []
    for ah in anti_rows:
        m = ah.size
        iu, ju = np.triu_indices(m)
        sel = iu * m + ju
        co = ah.coeffs.tocsr()[sel]
        const = ah.const.ravel()[sel]
        for part in (np.real, np.imag):
            rows = co.copy()
            rows.data = part(rows.data)
            rows.eliminate_zeros()
            rows = rows.tocsr()
            c0 = part(const)
            keep = np.flatnonzero((np.diff(rows.indptr) > 0) | (c0 != 0))
            if keep.size:
                eq_A.append(rows[keep])
                eq_b.append(-c0[keep])

    bell_expr = polynomial_expr(bell, table)
    if max((abs(v.imag) for v in bell_expr.coef.values()), default=0.0) > 1e-12:
        raise ValueError("Bell functional is not real-valued on the moment table")
    bell_row, bell_rhs = _real_rows([bell_expr], table.n_vars)
    if mode == "equality":
        eq_A.append(bell_row)
        eq_b.append(bell_rhs + violation)
    else:
        # Bell(x) - violation >= 0 as a 1x1 block
        co = sp.csc_matrix(bell_row.astype(complex))
        blocks.append(("bell", SymMatrix(1, np.array([[bell_expr.const.real - violation]], dtype=complex), co)))

    obj = polynomial_expr(objective_poly, table)
    c = np.zeros(table.n_vars)
    for k, v in obj.coef.items():
        c[k] += v.real
    eq_rows = sp.vstack(eq_A, format="csr") if eq_A else sp.csr_matrix((0, table.n_vars))
    eq_rhs = np.concatenate(eq_b) if eq_b else np.zeros(0)
    stats = {
        "n_vars": table.n_vars,
        "chi_words": len(chi_closed),
        "chi_orbits": len({orbit_rep(w) for w in chi_closed}),
        "localizing_only_words": len(extra),
        "n_blocks": len(blocks),
        "n_equalities": int(eq_rows.shape[0]),
    }
    return RelaxationProblem(scenario.name, table, blocks, eq_rows, eq_rhs, c, float(obj.const.real),
                             float(violation), p, mode, stats)


# explicit strategies ---------------------------------------------------------------

@dataclass
class Realization:
    """A concrete quantum strategy pushed through the compiler."""

    assemblage: object
    observables: list
    violation: float
    marginals: np.ndarray
    problem: RelaxationProblem
    x: np.ndarray

    @property
    def objective(self) -> float:
        return self.problem.objective_value(self.x)


def realize(scenario, state, alice_povms, bob_observables, mode: str = "equality",
            sequence=None, localizing_sequence=None) -> Realization:
    """Moment assignment generated by an explicit strategy.

    The strategy's own Bell value and marginals are used to assemble the
    relaxation, so the returned assignment is feasible for it.

    Raises
    ------
    ValueError
        On dimension mismatches between state, effects and observables.
    """
    from .steering import steered_assemblage

    obs = [qmat.as_cmatrix(b) for b in bob_observables]
    if len(obs) != scenario.n_generators:
        raise ValueError(f"expected {scenario.n_generators} observables, got {len(obs)}")
    d = obs[0].shape[0]
    if any(b.shape != (d, d) for b in obs):
        raise ValueError("observables must share one dimension")
    asm = steered_assemblage(state, alice_povms)
    if asm.dim != d:
        raise ValueError("state dimension on Bob's side does not match the observables")
    el = asm.elements
    violation = float(np.real(scenario.bell_functional.evaluate_realization(asm, obs)))
    prob = assemble(scenario, violation, asm.marginals, mode, False, sequence, localizing_sequence,
                    check_bound=False)
    R = el[:, 0].sum(axis=0)
    cache = {}

    def moment(s, w):
        if w not in cache:
            cache[w] = word_matrix(w, obs)
        rho = R if s == "R" else el[s[0], s[1]]
        return np.trace(cache[w] @ rho)

    x = prob.table.assignment(moment)
    return Realization(asm, obs, violation, asm.marginals, prob, x)
