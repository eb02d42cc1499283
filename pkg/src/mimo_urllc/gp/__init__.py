"""Geometric programming: expressions, log-space barrier solver, text format."""

from .expr import Constraint, GpProblem, Monomial, Posynomial, as_monomial, as_posynomial, const, var
from .solver import GpSolution, LogProgram, SolverOptions, log_transform, solve
from .textio import GpParseError, dump, dumps, load, loads
from .oracle import grid_oracle

__all__ = [
    "Constraint", "GpProblem", "Monomial", "Posynomial", "as_monomial", "as_posynomial",
    "const", "var", "GpSolution", "LogProgram", "SolverOptions", "log_transform", "solve",
    "GpParseError", "dump", "dumps", "load", "loads", "grid_oracle",
]
