"""The four preset Bell scenarios and their reference strategies.

Labels are zero-based in code: Bob's generator ``B1`` of the usual notation is
index ``0``; outcome ``0`` is the ``+1`` outcome of a two-outcome observable.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import qmat
from .moment import (MomentPolynomial, WordPoly, canonicalize, npa_sequence, poly, poly_mul,
                     poly_matrix, word_from_string, word_matrix, word_to_string)
from .steering import Assemblage, projective_povms, steered_assemblage

ALPHA_GUARD = 1e-6


@dataclass(frozen=True, eq=False)
class BellScenario:
    """Everything needed to compile and check the relaxation for one scenario.

    Attributes
    ----------
    cj_expression : list of list of WordPoly or None
        Entries ``M[k][l]`` of the transposed Choi matrix written in Bob's
        generators, ``Omega^T = sum_kl M[k][l] (x) |k><l|``. ``None`` for
        complex references, which carry a direct fidelity polynomial instead.
    direct_fidelity : MomentPolynomial or None
        Fidelity polynomial at unit weights, used when ``cj_expression`` is None.
    """

    name: str
    n_generators: int
    n_settings: int
    n_outcomes: int
    reference_state: np.ndarray
    alice_observables: tuple
    bob_observables: tuple
    n_measured: int
    reference_assemblage: Assemblage
    bell_functional: MomentPolynomial
    local_bound: float
    quantum_bound: float
    cj_expression: Optional[list]
    direct_fidelity: Optional[MomentPolynomial]
    moment_sequence: tuple
    localizing_sequence: tuple
    localizing_polynomials: tuple
    params: dict = field(default_factory=dict)

    @property
    def reference_marginals(self) -> np.ndarray:
        return self.reference_assemblage.marginals

    @property
    def complex_reference(self) -> bool:
        return self.reference_assemblage.is_complex

    @property
    def alice_povms(self) -> np.ndarray:
        return projective_povms(self.alice_observables)

    def fidelity_objective(self, marginals=None) -> MomentPolynomial:
        """Fidelity polynomial weighted by ``sqrt(P_ref / P_obs)`` per element.

        At the reference marginals every weight is one.
        """
        pref = self.reference_marginals
        pobs = pref if marginals is None else np.asarray(marginals, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(pref > 0, np.sqrt(pref / np.where(pobs > 0, pobs, 1.0)), 0.0)
        if self.cj_expression is None:
            return MomentPolynomial(tuple((a, x, wd, c * w[a, x])
                                          for a, x, wd, c in self.direct_fidelity.terms))
        vecs = self.reference_assemblage.pure_vectors()
        nx = self.n_settings
        terms = []
        d = len(self.cj_expression)
        for a in range(self.n_outcomes):
            for x in range(nx):
                if w[a, x] == 0:
                    continue
                s = vecs[a, x]
                for k in range(d):
                    for l in range(d):
                        amp = np.conj(s[k]) * s[l] * w[a, x] / nx
                        if amp == 0:
                            continue
                        for wd, c in self.cj_expression[k][l].items():
                            terms.append((a, x, wd, amp * c))
        return MomentPolynomial(tuple(terms))

    @property
    def fidelity_polynomial(self) -> MomentPolynomial:
        return self.fidelity_objective(None)

    def cj_matrix(self, observables=None) -> np.ndarray:
        """Numeric ``Omega^T`` for given (default: reference) observables."""
        if self.cj_expression is None:
            raise ValueError(f"scenario {self.name} carries no Choi expression")
        obs = self.bob_observables if observables is None else observables
        d = len(self.cj_expression)
        out = 0
        for k in range(d):
            for l in range(d):
                e = np.zeros((d, d))
                e[k, l] = 1
                out = out + np.kron(poly_matrix(self.cj_expression[k][l], obs), e)
        return out

    def to_dict(self) -> dict:
        def wl(ws):
            return [list(w) for w in ws]

        def mp(p: MomentPolynomial):
            return {"constant": [p.constant.real, p.constant.imag] if isinstance(p.constant, complex)
                    else [float(p.constant), 0.0],
                    "terms": [{"a": a, "x": x, "word": list(w), "coefficient": [complex(c).real, complex(c).imag]}
                              for a, x, w, c in p.terms]}

        return {
            "name": self.name,
            "params": self.params,
            "generators": self.n_generators,
            "measured_generators": self.n_measured,
            "settings": self.n_settings,
            "outcomes": self.n_outcomes,
            "local_bound": self.local_bound,
            "quantum_bound": self.quantum_bound,
            "moment_sequence": wl(self.moment_sequence),
            "localizing_sequence": wl(self.localizing_sequence),
            "localizing_polynomials": [[{"word": list(w), "coefficient": [c.real, c.imag]}
                                        for w, c in p.items()] for p in self.localizing_polynomials],
            "bell_functional": mp(self.bell_functional),
            "fidelity_polynomial": mp(self.fidelity_polynomial),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


# helpers ------------------------------------------------------------------------

def _seq(labels: str) -> tuple:
    return tuple(word_from_string(t) for t in labels.split())


def _digit_seq(labels: str) -> tuple:
    """Sequence from digit strings such as ``"1 1 2 12"``; a leading ``1`` is the identity."""
    toks = labels.split()
    out = [()]
    for t in toks[1:]:
        out.append(canonicalize(int(ch) - 1 for ch in t))
    return tuple(out)


def correlator_terms(coeffs) -> list:
    """Terms of ``sum_xy coeffs[x][y] <A_x B_y>`` for two-outcome settings."""
    terms = []
    for x, row in enumerate(coeffs):
        for y, c in enumerate(row):
            if c:
                terms.append((0, x, (y,), float(c)))
                terms.append((1, x, (y,), -float(c)))
    return terms


def _bell_value(bell: MomentPolynomial, asm: Assemblage, obs) -> float:
    return float(np.real(bell.evaluate_realization(asm, obs)))


def _chsh_cj(b1: int, b2: int) -> list:
    """Transposed Choi matrix of the identity written with two anticommuting generators."""
    return [
        [poly((0.5, ()), (0.5, (b1,))), poly((0.5, (b2,)), (-0.5, (b2, b1)))],
        [poly((0.5, (b2,)), (-0.5, (b1, b2))), poly((0.5, ()), (-0.5, (b1,)))],
    ]


def _build(name, state, alice_obs, bob_obs, n_measured, bell, local, quantum, cj, direct, S, Sl, locs,
           params=None) -> BellScenario:
    asm = steered_assemblage(state, projective_povms(alice_obs))
    return BellScenario(
        name=name,
        n_generators=len(bob_obs),
        n_settings=len(alice_obs),
        n_outcomes=2,
        reference_state=state,
        alice_observables=tuple(alice_obs),
        bob_observables=tuple(bob_obs),
        n_measured=n_measured,
        reference_assemblage=asm,
        bell_functional=bell,
        local_bound=float(local),
        quantum_bound=float(quantum),
        cj_expression=cj,
        direct_fidelity=direct,
        moment_sequence=tuple(S),
        localizing_sequence=tuple(Sl),
        localizing_polynomials=tuple(locs),
        params=dict(params or {}),
    )


# presets ------------------------------------------------------------------------

def chsh_scenario() -> BellScenario:
    """CHSH with Pauli Z, X on both sides and a rotated maximally entangled state."""
    c, s = np.cos(np.pi / 8), np.sin(np.pi / 8)
    psi = (c / np.sqrt(2)) * (qmat.ket(1, 0, 0, 0) - qmat.ket(0, 0, 0, 1)) \
        + (s / np.sqrt(2)) * (qmat.ket(0, 1, 0, 0) + qmat.ket(0, 0, 1, 0))
    bell = MomentPolynomial(tuple(correlator_terms([[1, 1], [1, -1]])))
    S = _seq("1 B1 B2 B1B2 B2B1")
    return _build("chsh", qmat.proj(psi), [qmat.Z, qmat.X], [qmat.Z, qmat.X], 2, bell, 2.0, 2 * np.sqrt(2),
                  _chsh_cj(0, 1), None, S, (), ())


def tilted_angles(alpha: float) -> tuple[float, float]:
    """``(theta, mu)`` of the optimal tilted-CHSH strategy."""
    s2t = np.sqrt((4 - alpha ** 2) / (4 + alpha ** 2))
    theta = 0.5 * np.arcsin(s2t)
    mu = np.arctan(s2t)
    return float(theta), float(mu)


def tilted_chsh_scenario(alpha: float) -> BellScenario:
    """Tilted CHSH ``alpha <A1> + CHSH`` with auxiliary generators for polar decompositions.

    Raises
    ------
    ValueError
        If ``alpha`` is outside ``[0, 2 - 1e-6]``.
    """
    alpha = float(alpha)
    if not (0.0 <= alpha <= 2.0 - ALPHA_GUARD):
        raise ValueError(f"alpha must lie in [0, 2) with a {ALPHA_GUARD:g} guard, got {alpha}")
    theta, mu = tilted_angles(alpha)
    psi = np.cos(theta) * qmat.ket(1, 0, 0, 0) + np.sin(theta) * qmat.ket(0, 0, 0, 1)
    b1 = np.cos(mu) * qmat.Z + np.sin(mu) * qmat.X
    b2 = np.cos(mu) * qmat.Z - np.sin(mu) * qmat.X
    terms = correlator_terms([[1, 1], [1, -1]])
    terms += [(0, 0, (), alpha), (1, 0, (), -alpha)]
    bell = MomentPolynomial(tuple(terms))
    S = _digit_seq("1 1 2 3 4 12 21 43 34 31 32 13 23 41 42 14 24 121 212 343 434 131 132 141 142 "
                   "143 134 243 234")
    Sl = _digit_seq("1 1 2 3 4 12 21 43 34 14 41")
    locs = [
        poly_mul(poly((1, (2,))), poly((1 / np.cos(mu), (0,)), (1 / np.cos(mu), (1,)))),
        poly_mul(poly((1, (3,))), poly((1 / np.sin(mu), (0,)), (-1 / np.sin(mu), (1,)))),
    ]
    return _build("tilted", qmat.proj(psi), [qmat.Z, qmat.X], [b1, b2, qmat.Z, qmat.X], 2, bell,
                  2 + alpha, np.sqrt(8 + 2 * alpha ** 2), _chsh_cj(2, 3), None, S, Sl, locs,
                  {"alpha": alpha, "theta": theta, "mu": mu})


def _phi_plus() -> np.ndarray:
    return qmat.proj(qmat.ket(1, 0, 0, 1) / np.sqrt(2))


def _pauli_fidelity(aux: tuple[int, int, int]) -> MomentPolynomial:
    """Unit-weight fidelity polynomial against the Pauli-eigenstate reference.

    Settings 0, 1, 2 are Z, X, Y measurements; Bob's auxiliaries ``aux`` stand
    for Z, X, Y. The sign of the last setting follows the conjugated steered
    state of a Y measurement.
    """
    z, xg, y = aux
    t = 1.0 / 3.0
    return MomentPolynomial((
        (0, 0, (z,), t), (1, 0, (z,), -t),
        (0, 1, (xg,), t), (1, 1, (xg,), -t),
        (1, 2, (y,), t), (0, 2, (y,), -t),
    ))


def elegant_scenario() -> BellScenario:
    """Elegant Bell inequality: Pauli settings for Alice, tetrahedral settings for Bob."""
    r3 = np.sqrt(3)
    Z, X, Y = qmat.Z, qmat.X, qmat.Y
    bob = [(Z + X - Y) / r3, (Z - X + Y) / r3, (-Z + X + Y) / r3, (-Z - X - Y) / r3, Z, X, Y]
    signs = [[1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]]
    bell = MomentPolynomial(tuple(correlator_terms(signs)))
    S = _seq("1 B1 B2 B3 B4 B5 B6 B7 B5B6 B6B5 B5B7 B7B5 B6B7 B7B6 "
             "B5B1 B5B2 B5B3 B5B4 B1B5 B2B5 B3B5 B4B5 "
             "B6B1 B6B2 B6B3 B6B4 B1B6 B2B6 B3B6 B4B6 "
             "B7B1 B7B2 B7B3 B7B4 B1B7 B2B7 B3B7 B4B7")
    Sl = _seq("1 B1 B2 B3 B4 B5 B6 B7")
    locs = [
        poly_mul(poly((1, (4,))), poly((1, (0,)), (1, (1,)), (-1, (2,)), (-1, (3,)))),
        poly_mul(poly((1, (5,))), poly((1, (0,)), (-1, (1,)), (1, (2,)), (-1, (3,)))),
        poly_mul(poly((1, (6,))), poly((-1, (0,)), (1, (1,)), (1, (2,)), (-1, (3,)))),
    ]
    return _build("elegant", _phi_plus(), [Z, X, Y], bob, 4, bell, 6.0, 4 * r3, None,
                  _pauli_fidelity((4, 5, 6)), S, Sl, locs)


def i3622_scenario() -> BellScenario:
    """I3622 inequality with the same Pauli reference as the elegant scenario."""
    r2 = np.sqrt(2)
    Z, X, Y = qmat.Z, qmat.X, qmat.Y
    bob = [(Z + X) / r2, (Z - X) / r2, (Z + Y) / r2, (Z - Y) / r2, (X + Y) / r2, (X - Y) / r2, Z, X, Y]
    coeffs = [[1, 1, 1, 1, 0, 0],
              [1, -1, 0, 0, 1, 1],
              [0, 0, -1, 1, -1, 1]]
    bell = MomentPolynomial(tuple(correlator_terms(coeffs)))
    S = _seq("1 B1 B2 B3 B4 B5 B6 B7 B8 B9 B7B8 B8B7 B7B9 B9B7 B8B9 B9B8 "
             "B7B1 B7B2 B7B3 B7B4 B1B7 B2B7 B3B7 B4B7 "
             "B8B1 B8B2 B8B5 B8B6 B1B8 B2B8 B5B8 B6B8 "
             "B9B3 B9B4 B9B5 B9B6 B3B9 B4B9 B5B9 B6B9")
    Sl = _seq("1 B1 B2 B3 B4 B5 B6 B7 B8 B9")

    def lp(aux, *pairs):
        return poly_mul(poly((1, (aux,))), poly(*((c, (g,)) for c, g in pairs)))

    locs = [
        lp(6, (1, 0), (1, 1)),
        lp(7, (1, 4), (1, 5)),
        lp(8, (1, 2), (-1, 3)),
        lp(6, (1, 2), (1, 3)),
        lp(7, (1, 0), (-1, 1)),
        lp(8, (1, 4), (-1, 5)),
    ]
    return _build("i3622", _phi_plus(), [Z, X, Y], bob, 6, bell, 6.0, 6 * r2, None,
                  _pauli_fidelity((6, 7, 8)), S, Sl, locs)


def get_scenario(name: str, alpha: float = 0.0) -> BellScenario:
    name = name.lower()
    if name == "chsh":
        return chsh_scenario()
    if name in ("tilted", "tilted-chsh", "tilted_chsh"):
        return tilted_chsh_scenario(alpha)
    if name in ("elegant", "ebi"):
        return elegant_scenario()
    if name == "i3622":
        return i3622_scenario()
    raise ValueError(f"unknown scenario {name!r}")


SCENARIOS = ("chsh", "tilted", "elegant", "i3622")


# exact moments ------------------------------------------------------------------

def exact_moments(scenario: BellScenario, words=None) -> dict:
    """Moments ``tr(w rho*[a, x])`` of the reference strategy.

    Parameters
    ----------
    words : iterable of words, optional
        Defaults to every product ``S_j^dagger S_i`` of the moment sequence,
        every localizing word, and the words of the Bell and fidelity
        polynomials.

    Returns
    -------
    dict
        ``(a, x, word) -> complex`` over all outcomes and settings.
    """
    from .moment import localizing_words

    if words is None:
        S = scenario.moment_sequence
        words = {canonicalize(sj[::-1] + si) for si in S for sj in S}
        for lp in scenario.localizing_polynomials:
            words |= localizing_words(lp, scenario.localizing_sequence)
        words |= scenario.bell_functional.words() | scenario.fidelity_polynomial.words()
        words |= {w[::-1] for w in words}
    el = scenario.reference_assemblage.elements
    obs = scenario.bob_observables
    out = {}
    for w in words:
        wm = word_matrix(canonicalize(w), obs)
        for a in range(scenario.n_outcomes):
            for x in range(scenario.n_settings):
                out[(a, x, canonicalize(w))] = complex(np.trace(wm @ el[a, x]))
    return out


def sequence_from_level(scenario: BellScenario, level: int) -> tuple:
    return tuple(npa_sequence(scenario.n_generators, level))


__all__ = ["BellScenario", "chsh_scenario", "tilted_chsh_scenario", "elegant_scenario", "i3622_scenario",
           "exact_moments", "get_scenario", "tilted_angles", "correlator_terms", "SCENARIOS",
           "sequence_from_level", "word_to_string"]
