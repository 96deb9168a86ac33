"""Problem form consumed by the solver: clauses over linear atoms.

An atom is a linear expression compared to a rational constant.  Formulas
arrive already clause-shaped (units, implications, disjunctions); there is no
need for a general CNF conversion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

LinExpr = tuple  # tuple[tuple[str, Fraction], ...], sorted by variable name

OPS = ("<=", "<", ">=", ">", "=")


def lin(terms: dict[str, Fraction]) -> LinExpr:
    return tuple(sorted((v, c) for v, c in terms.items() if c != 0))


@dataclass(frozen=True)
class Atom:
    """expr  op  rhs, e.g. (pos_1_3 - pos_2_3) > 5."""

    expr: LinExpr
    op: str
    rhs: Fraction

    def __post_init__(self):
        if self.op not in OPS:
            raise ValueError(f"unknown relation {self.op!r}")
        if not self.expr:
            raise ValueError("atom over the empty expression")

    def evaluate(self, assignment) -> bool:
        val = sum(c * assignment[v] for v, c in self.expr)
        return {
            "<=": val <= self.rhs,
            "<": val < self.rhs,
            ">=": val >= self.rhs,
            ">": val > self.rhs,
            "=": val == self.rhs,
        }[self.op]


@dataclass(frozen=True)
class Literal:
    atom: Atom
    positive: bool = True

    def evaluate(self, assignment) -> bool:
        return self.atom.evaluate(assignment) == self.positive


Clause = tuple  # tuple[Literal, ...]


@dataclass
class Problem:
    """Variables, always-true atoms, and disjunctive clauses."""

    variables: list[str] = field(default_factory=list)
    units: list[Atom] = field(default_factory=list)
    clauses: list[Clause] = field(default_factory=list)
    hint: dict[str, Fraction] | None = None

    def add_unit(self, atom: Atom) -> None:
        self.units.append(atom)

    def add_clause(self, *lits: Literal) -> None:
        if len(lits) == 1 and lits[0].positive:
            self.units.append(lits[0].atom)
        else:
            self.clauses.append(tuple(lits))

    def atom_count(self) -> int:
        seen = set()
        for a in self.units:
            seen.add(a)
        for cl in self.clauses:
            for l in cl:
                seen.add(l.atom)
        return len(seen)

    def check_model(self, assignment: dict[str, Fraction]) -> bool:
        return all(a.evaluate(assignment) for a in self.units) and all(
            any(l.evaluate(assignment) for l in cl) for cl in self.clauses
        )
