"""Desk-scale solvers, MPS interchange and solution auditing."""

from .audit import AuditError, AuditReport, audit
from .bnb import BranchAndBound, branch_and_bound
from .lp import LPResult, infeasible_rows, solve_lp
from .mps import ExportError, MPSParseError, export_mps, read_mps, read_mps_file, write_mps
from .simplex import simplex
from .solution import Solution, optimality_gap, read_solution_csv, solution_from_values

__all__ = [
    "AuditError",
    "AuditReport",
    "BranchAndBound",
    "ExportError",
    "LPResult",
    "MPSParseError",
    "Solution",
    "audit",
    "branch_and_bound",
    "export_mps",
    "infeasible_rows",
    "optimality_gap",
    "read_mps",
    "read_mps_file",
    "read_solution_csv",
    "simplex",
    "solution_from_values",
    "solve_lp",
    "write_mps",
]
