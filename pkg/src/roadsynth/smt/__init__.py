"""Self-contained decision procedure for quantifier-free linear real
arithmetic: a conflict-driven boolean search on top of an exact-rational
general simplex, plus SMT-LIB 2 text input/output so it can serve as an
external solver process."""

from .problem import Atom, Clause, LinExpr, Problem
from .solver import LraSolver, SolveResult, solve_problem

__all__ = [
    "Atom", "Clause", "LinExpr", "Problem",
    "LraSolver", "SolveResult", "solve_problem",
]
