"""Conflict-driven search over linear-arithmetic atoms.

Every atom is normalized to an upper-bound statement ``term <= c`` (strict
bounds carry a delta component); the negation is the corresponding lower
bound, so one boolean variable covers both senses.  Multi-variable terms get
a slack variable defined by a tableau row.  Assignments are pushed into the
simplex immediately; infeasibility yields an explanation clause, and bound
implications between atoms on the same term are propagated eagerly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .problem import Atom, Problem
from .simplex import Conflict, Simplex, drat


@dataclass
class SolveResult:
    status: str                      # "sat" | "unsat" | "unknown"
    model: dict[str, Fraction] | None = None
    conflicts: int = 0
    decisions: int = 0


class SolverBudget(Exception):
    """Raised internally when a deadline cuts the search short."""


class _BoolAtom:
    __slots__ = ("var", "value", "strict", "pos_level", "neg_level")

    def __init__(self, var: int, value: Fraction, strict: bool):
        self.var = var          # simplex variable the bound applies to
        self.value = value
        self.strict = strict    # True: term < value, else term <= value


class LraSolver:
    """One-shot CDCL(T) solver for a Problem."""

    def __init__(self, problem: Problem):
        self.problem = problem
        self.simplex = Simplex()
        self.svar: dict[str, int] = {}
        self.slack: dict[tuple, int] = {}
        self.atoms: list[_BoolAtom] = []
        self.atom_index: dict[tuple, int] = {}
        self.by_term: dict[int, list[int]] = {}

        self.clauses: list[list[int]] = []
        self.watches: dict[int, list[int]] = {}
        self.assign: dict[int, bool] = {}
        self.trail: list[tuple[int, object]] = []   # (lit, reason clause | None)
        self.level_of: dict[int, int] = {}
        self.levels: list[int] = []
        self.activity: dict[int, float] = {}
        self.phase: dict[int, bool] = {}
        self.conflicts = 0
        self.decisions = 0
        self._ground_unsat = False

        try:
            self._build()
        except Conflict:
            self._ground_unsat = True

    # -- construction --------------------------------------------------------

    def _var(self, name: str) -> int:
        if name not in self.svar:
            self.svar[name] = self.simplex.new_var(name)
        return self.svar[name]

    def _term_var(self, expr) -> tuple[int, Fraction]:
        """Simplex variable carrying the expression, plus the factor applied.

        Single-variable expressions are scaled onto the variable itself;
        anything longer gets (or reuses) a slack row.
        """
        if len(expr) == 1:
            name, coeff = expr[0]
            return self._var(name), coeff
        key = expr
        if key not in self.slack:
            row = {self._var(name): c for name, c in expr}
            self.slack[key] = self.simplex.define(f"!s{len(self.slack)}", row)
        return self.slack[key], Fraction(1)

    def _atom_id(self, atom: Atom) -> int:
        """Boolean id of the atom, normalized to 'term <= c'; the sign of the
        returned literal says whether the original sense matches."""
        var, factor = self._term_var(atom.expr)
        rhs = atom.rhs / factor
        op = atom.op
        if factor < 0:
            op = {"<=": ">=", "<": ">", ">=": "<=", ">": "<"}[op]
        if op in ("<=", "<"):
            key = (var, rhs, op == "<")
            sign = 1
        else:
            # term >= c  ==  not (term < c);  term > c  ==  not (term <= c)
            key = (var, rhs, op == ">=")
            sign = -1
        if key not in self.atom_index:
            idx = len(self.atoms)
            self.atoms.append(_BoolAtom(key[0], key[1], key[2]))
            self.atom_index[key] = idx
            self.by_term.setdefault(key[0], []).append(idx)
            self.activity[idx] = 0.0
        return sign * (self.atom_index[key] + 1)

    def _build(self) -> None:
        p = self.problem
        for name in p.variables:
            self._var(name)
        if p.hint:
            # Warm-start the assignment near the reference trajectory so the
            # first feasibility repairs are local adjustments.
            for name, val in p.hint.items():
                v = self.svar.get(name)
                if v is not None and v not in self.simplex.rows:
                    self.simplex._update(v, drat(val))
        for atom in p.units:
            var, factor = self._term_var(atom.expr)
            rhs = atom.rhs / factor
            op = atom.op
            if factor < 0:
                op = {"<=": ">=", "<": ">", ">=": "<=", ">": "<", "=": "="}[op]
            if op == "=":
                self.simplex.assert_lower(var, drat(rhs), None)
                self.simplex.assert_upper(var, drat(rhs), None)
            elif op == "<=":
                self.simplex.assert_upper(var, drat(rhs), None)
            elif op == "<":
                self.simplex.assert_upper(var, drat(rhs, -1), None)
            elif op == ">=":
                self.simplex.assert_lower(var, drat(rhs), None)
            else:
                self.simplex.assert_lower(var, drat(rhs, 1), None)
        for clause in p.clauses:
            lits = [self._atom_id(l.atom) * (1 if l.positive else -1) for l in clause]
            self.clauses.append(lits)
        if p.hint:
            values = {}
            for name, val in p.hint.items():
                if name in self.svar:
                    values[self.svar[name]] = val
            for key, sv in self.slack.items():
                values[sv] = sum(values.get(self.svar[n], Fraction(0)) * c
                                 for n, c in key)
            for idx, atom in enumerate(self.atoms):
                if atom.var in values:
                    val = values[atom.var]
                    self.phase[idx] = (val < atom.value) if atom.strict else (
                        val <= atom.value)

    # -- literal/bound glue ----------------------------------------------------

    def _assert_to_theory(self, lit: int) -> None:
        atom = self.atoms[abs(lit) - 1]
        if lit > 0:
            bound = drat(atom.value, -1 if atom.strict else 0)
            self.simplex.assert_upper(atom.var, bound, lit)
        else:
            bound = drat(atom.value, 0 if atom.strict else 1)
            self.simplex.assert_lower(atom.var, bound, lit)

    def _implied_lits(self, lit: int):
        """Atoms on the same term entailed by this bound (theory propagation)."""
        atom = self.atoms[abs(lit) - 1]
        for other_idx in self.by_term[atom.var]:
            other = self.atoms[other_idx]
            if other is atom:
                continue
            if lit > 0:
                # term <= value(strict) implies every weaker upper bound.
                if (atom.value, not atom.strict) <= (other.value, not other.strict):
                    yield other_idx + 1
            else:
                # not A implies not B  iff  B implies A.
                if (other.value, not other.strict) <= (atom.value, not atom.strict):
                    yield -(other_idx + 1)

    # -- CDCL ------------------------------------------------------------------

    def _watch(self, ci: int) -> None:
        clause = self.clauses[ci]
        for lit in clause[:2]:
            self.watches.setdefault(lit, []).append(ci)

    def _value(self, lit: int):
        v = self.assign.get(abs(lit))
        if v is None:
            return None
        return v if lit > 0 else not v

    def _enqueue(self, lit: int, reason) -> bool:
        cur = self._value(lit)
        if cur is not None:
            return cur
        self.assign[abs(lit)] = lit > 0
        self.level_of[abs(lit)] = len(self.levels)
        self.trail.append((lit, reason))
        return True

    def _propagate(self) -> list[int] | None:
        """Unit propagation + theory assertion; returns a conflict clause.

        Bounds are pushed into the simplex as literals arrive, but the pivot
        search runs once per drained queue: feasibility checks are batched.
        """
        while True:
            head = self._qhead
            while head < len(self.trail):
                lit, _ = self.trail[head]
                head += 1
                self._qhead = head
                try:
                    self._assert_to_theory(lit)
                except Conflict as c:
                    return self._theory_clause(c, lit)
                for implied in self._implied_lits(lit):
                    if self._value(implied) is None:
                        self._enqueue(implied, [implied, -lit])
                    elif self._value(implied) is False:
                        return [implied, -lit]
                # Boolean watches on the falsified literal.
                falsified = -lit
                todo = self.watches.get(falsified, [])
                idx = 0
                while idx < len(todo):
                    ci = todo[idx]
                    clause = self.clauses[ci]
                    if clause[0] == falsified:
                        clause[0], clause[1] = clause[1], clause[0]
                    satisfied = self._value(clause[0])
                    if satisfied is True:
                        idx += 1
                        continue
                    moved = False
                    for k in range(2, len(clause)):
                        if self._value(clause[k]) is not False:
                            clause[1], clause[k] = clause[k], clause[1]
                            self.watches.setdefault(clause[1], []).append(ci)
                            todo[idx] = todo[-1]
                            todo.pop()
                            moved = True
                            break
                    if moved:
                        continue
                    if satisfied is False:
                        return list(clause)
                    if not self._enqueue(clause[0], list(clause)):
                        return list(clause)
                    idx += 1
            try:
                self.simplex.check()
            except Conflict as c:
                return self._theory_clause(c, None)
            if self._qhead >= len(self.trail):
                return None

    def _theory_clause(self, conflict: Conflict, current: int) -> list[int]:
        lits = set()
        for reason in conflict.reasons:
            if isinstance(reason, int):
                lits.add(-reason)
        if not lits:
            # Conflict purely among unit constraints: unsatisfiable problem.
            return []
        return sorted(lits)

    def _analyze(self, conflict: list[int]) -> tuple[list[int], int]:
        """First-UIP resolution; returns the learned clause and backjump level."""
        if not conflict:
            return [], -1
        level = len(self.levels)
        if level == 0:
            return [], -1
        seen = set()
        learned = []
        counter = 0
        clause = list(conflict)
        idx = len(self.trail)
        uip = None
        while True:
            for lit in clause:
                var = abs(lit)
                if var in seen:
                    continue
                seen.add(var)
                self.activity[var - 1] = self.activity.get(var - 1, 0.0) + 1.0
                if self.level_of.get(var, 0) == level:
                    counter += 1
                else:
                    learned.append(lit)
            while True:
                idx -= 1
                if idx < 0:
                    # Conflict does not depend on this level after all.
                    return [], -1
                lit, reason = self.trail[idx]
                if abs(lit) in seen:
                    break
            counter -= 1
            if counter == 0:
                uip = lit
                break
            clause = [l for l in (reason or []) if abs(l) != abs(lit)]
        if len(learned) == 0:
            return [-uip], 0
        # Asserting literal first, then a deepest-level literal: both watched.
        learned.sort(key=lambda l: -self.level_of.get(abs(l), 0))
        back = self.level_of.get(abs(learned[0]), 0)
        return [-uip] + learned, back

    def _backjump(self, level: int) -> None:
        import heapq

        while len(self.levels) > level:
            mark = self.levels.pop()
            self.simplex.pop()
            while len(self.trail) > mark:
                lit, _ = self.trail.pop()
                var = abs(lit)
                self.phase[var - 1] = lit > 0
                del self.assign[var]
                del self.level_of[var]
                heapq.heappush(
                    self._heap, (-self.activity.get(var - 1, 0.0), var - 1)
                )
        self._qhead = min(getattr(self, "_qhead", 0), len(self.trail))

    def _decide(self) -> int | None:
        # Activity-ordered heap with lazy cleanup; creation order breaks ties,
        # which matches the problem's time axis.
        import heapq

        heap = self._heap
        while heap:
            act, idx = heap[0]
            if (idx + 1) in self.assign:
                heapq.heappop(heap)
                continue
            if -act < self.activity.get(idx, 0.0):
                heapq.heappop(heap)
                heapq.heappush(heap, (-self.activity[idx], idx))
                continue
            # Follow the arithmetic model: the current assignment is feasible
            # for everything asserted, so deciding atoms the way it already
            # leans keeps theory repairs local.
            atom = self.atoms[idx]
            val = self.simplex.alpha[atom.var]
            bound = (atom.value, Fraction(-1) if atom.strict else Fraction(0))
            polarity = val <= bound
            return (idx + 1) if polarity else -(idx + 1)
        for idx in range(len(self.atoms)):
            if (idx + 1) not in self.assign:
                heapq.heappush(heap, (-self.activity.get(idx, 0.0), idx))
        if heap:
            return self._decide()
        return None

    def solve(self, deadline: float | None = None) -> SolveResult:
        """Decide the problem; ``deadline`` (time.monotonic) yields unknown."""
        import time as _time

        # Ground conflicts among the unit constraints surface immediately.
        try:
            if self._ground_unsat:
                raise Conflict([])
            self.simplex.check()
        except Conflict:
            return SolveResult("unsat", conflicts=0, decisions=0)
        self._deadline = deadline
        self._clock = _time.monotonic

        self._qhead = 0
        self._heap = [(-self.activity.get(i, 0.0), i) for i in range(len(self.atoms))]
        import heapq
        heapq.heapify(self._heap)
        for ci in range(len(self.clauses)):
            clause = self.clauses[ci]
            if not clause:
                return SolveResult("unsat")
            if len(clause) == 1:
                if self._value(clause[0]) is False:
                    return SolveResult("unsat")
                self._enqueue(clause[0], None)
            else:
                self._watch(ci)

        while True:
            conflict = self._propagate()
            if conflict is not None:
                self.conflicts += 1
                learned, back = self._analyze(conflict)
                if back < 0:
                    return SolveResult(
                        "unsat", conflicts=self.conflicts, decisions=self.decisions
                    )
                self._backjump(back)
                if len(learned) == 1:
                    if not self._enqueue(learned[0], None):
                        return SolveResult(
                            "unsat", conflicts=self.conflicts, decisions=self.decisions
                        )
                else:
                    self.clauses.append(learned)
                    self._watch(len(self.clauses) - 1)
                    self._enqueue(learned[0], list(learned))
                if self.conflicts % 64 == 0:
                    for k in self.activity:
                        self.activity[k] *= 0.7
                continue
            lit = self._decide()
            if lit is None:
                return SolveResult(
                    "sat", model=self._model(),
                    conflicts=self.conflicts, decisions=self.decisions,
                )
            self.decisions += 1
            if (self._deadline is not None and self.decisions % 32 == 0
                    and self._clock() > self._deadline):
                return SolveResult("unknown", conflicts=self.conflicts,
                                   decisions=self.decisions)
            self.levels.append(len(self.trail))
            self.simplex.push()
            self._enqueue(lit, None)

    def _model(self) -> dict[str, Fraction]:
        values = self.simplex.concrete_values()
        out = {}
        for name, v in self.svar.items():
            out[name] = values[v]
        return out


def solve_problem(problem: Problem, deadline: float | None = None) -> SolveResult:
    result = LraSolver(problem).solve(deadline)
    if result.status == "sat":
        assert result.model is not None
        if not problem.check_model(result.model):
            raise AssertionError("solver produced a non-model; internal bug")
    return result
