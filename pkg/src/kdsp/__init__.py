"""K-densest sub-lattice search: lattice reduction, qubit Hamiltonians, Grover and QAOA simulation."""

__version__ = "0.1.0"

from .errors import CapExceeded, ConfigError, KdspError, NumericalError, ParseError
from .lattice import Basis, GramMatrix, gram, hkz_reduce, lll_reduce, load_basis
from .hamiltonian import DiagonalCost, EncodingConfig, diagonal_vector, eval_cost_direct
from .preprocess import preprocess, qubit_budget
from .solvers import brute_force_solve, grover_simulate
from .qaoa import optimize_params, qaoa_state, sample_report

__all__ = [
    "Basis", "CapExceeded", "ConfigError", "DiagonalCost", "EncodingConfig", "GramMatrix",
    "KdspError", "NumericalError", "ParseError", "brute_force_solve", "diagonal_vector",
    "eval_cost_direct", "gram", "grover_simulate", "hkz_reduce", "lll_reduce", "load_basis",
    "optimize_params", "preprocess", "qaoa_state", "qubit_budget", "sample_report",
]
