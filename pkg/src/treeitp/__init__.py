"""Tree-sparse compressed sensing: projections, ITP/NITP solvers, and the
asymptotic recovery theory for Gaussian measurement ensembles."""

__version__ = "0.1.0"

from .trees import (TreeTopology, TreeSupport, build_complete_tree,
                    validate_support, enumerate_supports, tree_count,
                    tree_count_exponent)
from .projection import project, project_bruteforce, ProjectionResult, backend_name
from .sampling import (ProblemInstance, RipEstimate, make_instance,
                       sample_gaussian_matrix, sample_tree_sparse_signal,
                       sample_noise, estimate_tree_rip,
                       stable_point_condition_terms)
from .solvers import (SolverConfig, SolverReport, StablePointCheck,
                      itp_step, solve_itp, solve_nitp, verify_stable_point)
from . import theory

__all__ = [
    "TreeTopology", "TreeSupport", "build_complete_tree", "validate_support",
    "enumerate_supports", "tree_count", "tree_count_exponent",
    "project", "project_bruteforce", "ProjectionResult", "backend_name",
    "ProblemInstance", "RipEstimate", "make_instance", "sample_gaussian_matrix",
    "sample_tree_sparse_signal", "sample_noise", "estimate_tree_rip",
    "stable_point_condition_terms",
    "SolverConfig", "SolverReport", "StablePointCheck", "itp_step",
    "solve_itp", "solve_nitp", "verify_stable_point",
    "theory",
]
