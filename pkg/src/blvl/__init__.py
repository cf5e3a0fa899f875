"""Exact toolkit for linear bilevel problems with coupling constraints.

Transforms a linear bilevel problem whose upper level constrains follower
variables into an equivalent problem without such coupling, via a lifting of
the coupling rows into the follower problem and an exact penalty on the
lifted violation.  Equivalence is verified by solving each formulation with
independent in-repo solvers: an exact rational simplex, a branch-and-bound
MILP solver, and a vertex-enumeration reference solver.
"""

from .errors import (BlvlError, DimensionDeficientError, EnumerationLimitError,
                     GenerationError, InfeasibleProblemError, ParseError,
                     SolverInternalError, UnboundedPolyhedronError,
                     UnboundedProblemError)
from .generator import GeneratorParams, generate_instance
from .model import (EQ, GE, LE, BilevelInstance, BilevelSolution,
                    FeasibilityCheck, FeasibilityReport, LiftedInstance,
                    LinRow, MilpModel, parse_instance, parse_lifted, parse_milp,
                    parse_solution, serialize_instance, serialize_lifted,
                    serialize_milp, serialize_solution, validate)
from .branch_bound import (BoundLogEntry, MilpOutcome,
                           enumerate_all_binary_patterns, solve_milp)
from .oracle import (SampleRecord, SampleReport, VertexList,
                     bilevel_feasible_vertices, check_bilevel_feasible,
                     enumerate_vertices, lift_point, render_samples,
                     sample_induced_set, solve_bilevel_bruteforce)
from .rational import Rat, format_rational, parse_rational
from .simplex import (FarkasCertificate, LpModel, LpOutcome, lower_level_solve,
                      lp_model, solve_lp, verify_farkas, verify_ray)
from .transform import (ComplementaritySystem, LinExpr, auto_kappa, bound_big_m,
                        kkt_reformulate, lift_coupling, linearize_big_m,
                        original_instance, penalize, penalized_instance,
                        project_solution, serialize_system, solve_with_kkt,
                        solve_with_penalty)

__version__ = "0.1.0"

__all__ = [
    "BilevelInstance", "BilevelSolution", "BlvlError", "BoundLogEntry",
    "ComplementaritySystem", "DimensionDeficientError", "EnumerationLimitError",
    "EQ", "FarkasCertificate", "FeasibilityCheck", "FeasibilityReport", "GE",
    "GenerationError", "GeneratorParams", "InfeasibleProblemError", "LE",
    "LiftedInstance", "LinExpr", "LinRow", "LpModel", "LpOutcome", "MilpModel",
    "MilpOutcome", "ParseError", "Rat", "SampleRecord", "SampleReport",
    "SolverInternalError", "UnboundedPolyhedronError", "UnboundedProblemError",
    "VertexList", "auto_kappa", "bilevel_feasible_vertices", "bound_big_m",
    "check_bilevel_feasible", "enumerate_all_binary_patterns",
    "enumerate_vertices", "format_rational", "generate_instance",
    "kkt_reformulate", "lift_coupling", "lift_point", "linearize_big_m",
    "lower_level_solve", "lp_model", "original_instance", "parse_instance",
    "parse_lifted", "parse_milp", "parse_rational", "parse_solution",
    "penalize", "penalized_instance", "project_solution", "render_samples",
    "sample_induced_set", "serialize_instance", "serialize_lifted",
    "serialize_milp", "serialize_solution", "serialize_system", "solve_lp",
    "solve_milp", "solve_bilevel_bruteforce", "solve_with_kkt",
    "solve_with_penalty", "validate", "verify_farkas", "verify_ray",
]
