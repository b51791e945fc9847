"""Fidelity lower-bound curves, classical baselines and crossing points."""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .moment import assemble
from .scenarios import BellScenario, get_scenario
from .sdp import solve
from .steering import classical_fidelity_eig

log = logging.getLogger(__name__)

CSV_HEADER = ("violation", "fidelity_lower_bound", "status", "gap", "seconds")
LARGE_SCENARIOS = ("elegant", "i3622")


def default_gap_tol(scenario: BellScenario) -> float:
    """1e-7, relaxed to 1e-5 for the two large three-setting scenarios."""
    return 1e-5 if scenario.name in LARGE_SCENARIOS else 1e-7


@dataclass
class CurvePoint:
    violation: float
    fidelity_lower_bound: float
    status: str
    gap: float
    seconds: float
    dual_bound: float = float("nan")
    iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    def csv_row(self) -> list:
        return [repr(float(self.violation)), repr(float(self.fidelity_lower_bound)), self.status,
                f"{self.gap:.3e}", f"{self.seconds:.3f}"]


@dataclass
class SelfTestReport:
    scenario: str
    curve: list
    classical_fidelity: float
    crossing_violation: Optional[float]
    local_bound: float
    quantum_bound: float
    mode: str = "equality"
    params: dict = field(default_factory=dict)

    @property
    def failed(self) -> list:
        return [p for p in self.curve if not p.ok]

    @property
    def crossing_deviation_pct(self) -> Optional[float]:
        """Distance of the crossing below the quantum bound, in percent of it."""
        if self.crossing_violation is None:
            return None
        return 100.0 * (self.quantum_bound - self.crossing_violation) / self.quantum_bound

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "params": self.params,
            "mode": self.mode,
            "local_bound": self.local_bound,
            "quantum_bound": self.quantum_bound,
            "classical_fidelity": self.classical_fidelity,
            "crossing_violation": self.crossing_violation,
            "crossing_deviation_pct": self.crossing_deviation_pct,
            "curve": [asdict(p) for p in self.curve],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def to_csv(self) -> str:
        return curve_csv(self.curve)


def curve_csv(points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for p in points:
        w.writerow(p.csv_row())
    return buf.getvalue()


def fidelity_lower_bound(scenario: BellScenario, violation: float, marginals=None, mode: str = "equality",
                         gap_tol: Optional[float] = None, feas_tol: float = 1e-8, max_iter: int = 200,
                         strict: bool = False, sequence=None, localizing_sequence=None) -> CurvePoint:
    """Minimum of the relaxation at one observed Bell value.

    Parameters
    ----------
    scenario : BellScenario
    violation : float
        Observed Bell value, at most the quantum bound (+1e-9).
    marginals : array_like, optional
        Observed ``P(a|x)``; the reference marginals by default.
    mode : {"equality", "at-least"}
    gap_tol : float, optional
        Defaults to :func:`default_gap_tol`.

    Returns
    -------
    CurvePoint
        The bound is the solver's primal value; ``dual_bound`` holds the
        dual objective. Non-optimal statuses are passed through.
    """
    gap_tol = default_gap_tol(scenario) if gap_tol is None else gap_tol
    t0 = time.perf_counter()
    rp = assemble(scenario, violation, marginals, mode, strict, sequence, localizing_sequence)
    sol = solve(rp.to_sdp(), gap_tol=gap_tol, feas_tol=feas_tol, max_iter=max_iter)
    seconds = time.perf_counter() - t0
    log.info("%s I=%.8f f>=%.8f %s (%.1fs)", scenario.name, violation, sol.primal_objective, sol.status,
             seconds)
    return CurvePoint(float(violation), float(sol.primal_objective), sol.status, float(sol.gap), seconds,
                      float(sol.dual_objective), int(sol.iterations))


def _point_job(args):
    name, alpha, violation, mode, kw = args
    return fidelity_lower_bound(get_scenario(name, alpha), violation, mode=mode, **kw)


def _run_points(scenario: BellScenario, violations, mode: str, jobs: int, kw: dict) -> list:
    if jobs <= 1:
        return [fidelity_lower_bound(scenario, v, mode=mode, **kw) for v in violations]
    alpha = scenario.params.get("alpha", 0.0)
    tasks = [(scenario.name, alpha, float(v), mode, kw) for v in violations]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_point_job, tasks))


def find_crossing(scenario: BellScenario, lo: CurvePoint, hi: CurvePoint, classical: float,
                  mode: str = "equality", tol: float = 1e-4, **kw) -> Optional[float]:
    """Bisect on ``f(I) - classical`` between a point below and a point above.

    A failed midpoint ends the search at the current bracket midpoint.
    """
    a, b = lo.violation, hi.violation
    while b - a > tol:
        m = 0.5 * (a + b)
        p = fidelity_lower_bound(scenario, m, mode=mode, **kw)
        if not p.ok:
            log.warning("bisection point %.6f failed with %s", m, p.status)
            break
        if p.fidelity_lower_bound > classical:
            b = m
        else:
            a = m
    return 0.5 * (a + b)


def sweep(scenario: BellScenario, n_points: int, mode: str = "equality", jobs: int = 1,
          crossing_tol: float = 1e-4, locate_crossing: bool = True, lower: Optional[float] = None,
          **kw) -> SelfTestReport:
    """Curve on a uniform grid from the local to the quantum bound.

    Parameters
    ----------
    n_points : int
        Grid size, at least 2.
    lower : float, optional
        Start the grid here instead of at the local bound.
    **kw
        Passed to :func:`fidelity_lower_bound` (tolerances, sequences).

    Returns
    -------
    SelfTestReport
        Failed points stay in the curve and are skipped when locating the
        crossing with the classical fidelity.
    """
    if n_points < 2:
        raise ValueError("a sweep needs at least two points")
    start = scenario.local_bound if lower is None else float(lower)
    grid = np.linspace(start, scenario.quantum_bound, n_points)
    curve = _run_points(scenario, grid, mode, jobs, kw)
    fc = classical_fidelity_eig(scenario.reference_assemblage)
    crossing = None
    if locate_crossing:
        good = [p for p in curve if p.ok]
        for p, q in zip(good, good[1:]):
            if p.fidelity_lower_bound <= fc < q.fidelity_lower_bound:
                crossing = find_crossing(scenario, p, q, fc, mode, crossing_tol, **kw)
                break
    return SelfTestReport(scenario.name, curve, fc, crossing, scenario.local_bound, scenario.quantum_bound,
                          mode, dict(scenario.params))


def deviation_to_violation(scenario: BellScenario, pct: float) -> float:
    """Bell value ``pct`` percent below the quantum bound."""
    return scenario.quantum_bound * (1.0 - pct / 100.0)
