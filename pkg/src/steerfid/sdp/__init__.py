"""Block semidefinite programs: problem IR, embedded solver, SDPA interchange."""
from .problem import Block, SdpProblem, SdpSolution, block_from_dense, complex_to_real
from .sdpa import SdpaData, export_sdpa, parse_sdpa, sdpa_text, sdpa_to_problem
from .solver import SolverOptions, solve

__all__ = ["Block", "SdpProblem", "SdpSolution", "SdpaData", "SolverOptions", "block_from_dense",
           "complex_to_real", "export_sdpa", "parse_sdpa", "sdpa_text", "sdpa_to_problem", "solve"]
