"""Device-independent fidelity bounds for quantum steering assemblages."""
from .moment import AboveQuantumBound, ContainmentError, assemble, realize
from .scenarios import (BellScenario, chsh_scenario, elegant_scenario, get_scenario, i3622_scenario,
                        tilted_chsh_scenario)
from .sdp import SdpProblem, SdpSolution, solve
from .selftest import CurvePoint, SelfTestReport, fidelity_lower_bound, sweep
from .steering import (Assemblage, assemblage_fidelity, classical_fidelity_eig, classical_fidelity_sdp,
                       ensemble_fidelity, steered_assemblage)

__version__ = "0.1.0"

__all__ = [
    "AboveQuantumBound", "Assemblage", "BellScenario", "ContainmentError", "CurvePoint", "SdpProblem",
    "SdpSolution", "SelfTestReport", "assemblage_fidelity", "assemble", "chsh_scenario",
    "classical_fidelity_eig", "classical_fidelity_sdp", "elegant_scenario", "ensemble_fidelity",
    "fidelity_lower_bound", "get_scenario", "i3622_scenario", "realize", "solve", "steered_assemblage",
    "sweep", "tilted_chsh_scenario",
]
