"""Solver handles for the refinement layer.

Both back-ends accept a ConstraintSet and answer ("sat", model) or
("unsat", None).  The in-process one calls the bundled decision procedure
directly; the subprocess one writes SMT-LIB 2 to any conformant command
(including our own ``roadsynth smt-server``) and parses the reply, so a
system z3/cvc5 drops in via ``--solver-cmd``.
"""

from __future__ import annotations

import subprocess
from fractions import Fraction

from .smt.solver import solve_problem
from .smt.text import emit_smtlib, parse_sexprs, tokenize


class SolverError(RuntimeError):
    """Transport or protocol failure, distinct from an unsat answer."""


class BuiltinSolver:
    name = "builtin"

    def solve(self, cs, deadline: float | None = None):
        result = solve_problem(cs.problem, deadline)
        return result.status, result.model


class SubprocessSolver:
    def __init__(self, command: list[str], timeout: float | None = None):
        self.command = list(command)
        self.timeout = timeout
        self.name = " ".join(command)

    def solve(self, cs, deadline: float | None = None):
        import time as _time

        text = emit_smtlib(cs.problem)
        limit = self.timeout
        if deadline is not None:
            left = deadline - _time.monotonic()
            if left <= 0:
                return "unknown", None
            limit = min(limit, left) if limit else left
        try:
            proc = subprocess.run(
                self.command,
                input=text,
                capture_output=True,
                text=True,
                timeout=limit,
            )
        except subprocess.TimeoutExpired:
            return "unknown", None
        except OSError as exc:
            raise SolverError(f"solver process failed: {exc}") from exc
        out = proc.stdout.strip().splitlines()
        if not out:
            raise SolverError(
                f"no solver output (stderr: {proc.stderr.strip()[:200]})"
            )
        verdict = out[0].strip()
        if verdict == "unsat":
            return "unsat", None
        if verdict != "sat":
            raise SolverError(f"unexpected solver verdict {verdict!r}")
        model = _parse_values("\n".join(out[1:]))
        missing = [v for v in cs.problem.variables if v not in model]
        if missing:
            raise SolverError(f"model misses variables, e.g. {missing[0]}")
        return "sat", model


def _parse_values(text: str) -> dict[str, Fraction]:
    """Read a get-value reply: ((name value) (name value) ...)."""
    model: dict[str, Fraction] = {}
    for form in parse_sexprs(tokenize(text)):
        if not isinstance(form, list):
            continue
        for pair in form:
            if isinstance(pair, list) and len(pair) == 2 and isinstance(pair[0], str):
                value = _number(pair[1])
                if value is not None:
                    model[pair[0]] = value
    return model


def _number(form) -> Fraction | None:
    if isinstance(form, str):
        try:
            return Fraction(form)
        except ValueError:
            return None
    if isinstance(form, list) and form:
        if form[0] == "-" and len(form) == 2:
            inner = _number(form[1])
            return None if inner is None else -inner
        if form[0] == "/" and len(form) == 3:
            num, den = _number(form[1]), _number(form[2])
            if num is not None and den is not None:
                return num / den
    return None
