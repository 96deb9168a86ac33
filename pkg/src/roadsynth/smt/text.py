"""SMT-LIB 2 text for the QF_LRA fragment the package emits and consumes.

The writer produces plain declare-const/assert/check-sat/get-value documents
with exact rational literals; the reader accepts that subset (plus and/or/=>
/not combinations of linear atoms), so emitted documents round-trip and any
conformant external solver can consume them unchanged.
"""

from __future__ import annotations

from fractions import Fraction

from .problem import Atom, Literal, Problem, lin
from .solver import solve_problem


def fmt_rational(x: Fraction) -> str:
    if x < 0:
        return f"(- {fmt_rational(-x)})"
    if x.denominator == 1:
        return str(x.numerator)
    return f"(/ {x.numerator} {x.denominator})"


def fmt_term(expr) -> str:
    parts = []
    for name, coeff in expr:
        if coeff == 1:
            parts.append(name)
        else:
            parts.append(f"(* {fmt_rational(coeff)} {name})")
    if len(parts) == 1:
        return parts[0]
    return "(+ " + " ".join(parts) + ")"


def fmt_atom(atom: Atom) -> str:
    return f"({atom.op} {fmt_term(atom.expr)} {fmt_rational(atom.rhs)})"


def fmt_literal(lit: Literal) -> str:
    body = fmt_atom(lit.atom)
    return body if lit.positive else f"(not {body})"


def emit_smtlib(problem: Problem, logic: str = "QF_LRA") -> str:
    """Self-contained document: declarations, assertions, check, model query."""
    lines = [f"(set-logic {logic})"]
    for name in problem.variables:
        lines.append(f"(declare-const {name} Real)")
    for atom in problem.units:
        lines.append(f"(assert {fmt_atom(atom)})")
    for clause in problem.clauses:
        if len(clause) == 1:
            lines.append(f"(assert {fmt_literal(clause[0])})")
        else:
            lines.append("(assert (or " + " ".join(fmt_literal(l) for l in clause) + "))")
    lines.append("(check-sat)")
    if problem.variables:
        lines.append("(get-value (" + " ".join(problem.variables) + "))")
    lines.append("(exit)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Reading


def tokenize(text: str):
    out = []
    token = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == ";":
            while i < len(text) and text[i] != "\n":
                i += 1
            continue
        if ch in "()":
            if token:
                out.append("".join(token))
                token = []
            out.append(ch)
        elif ch.isspace():
            if token:
                out.append("".join(token))
                token = []
        else:
            token.append(ch)
        i += 1
    if token:
        out.append("".join(token))
    return out


def parse_sexprs(tokens):
    forms = []
    stack = []
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            done = stack.pop()
            if stack:
                stack[-1].append(done)
            else:
                forms.append(done)
        else:
            if stack:
                stack[-1].append(tok)
            else:
                forms.append(tok)
    if stack:
        raise ValueError("unbalanced parentheses in SMT-LIB input")
    return forms


def _const(form) -> Fraction | None:
    if isinstance(form, str):
        try:
            return Fraction(form)
        except ValueError:
            return None
    if isinstance(form, list) and form:
        if form[0] == "-" and len(form) == 2:
            inner = _const(form[1])
            return None if inner is None else -inner
        if form[0] == "/" and len(form) == 3:
            num, den = _const(form[1]), _const(form[2])
            if num is not None and den is not None:
                return num / den
    return None


def _linear(form) -> tuple[dict[str, Fraction], Fraction]:
    """Parse a term into (coefficients, constant)."""
    c = _const(form)
    if c is not None:
        return {}, c
    if isinstance(form, str):
        return {form: Fraction(1)}, Fraction(0)
    head = form[0]
    if head == "+":
        coeffs: dict[str, Fraction] = {}
        const = Fraction(0)
        for sub in form[1:]:
            sc, scst = _linear(sub)
            const += scst
            for v, cc in sc.items():
                coeffs[v] = coeffs.get(v, Fraction(0)) + cc
        return coeffs, const
    if head == "-":
        if len(form) == 2:
            sc, scst = _linear(form[1])
            return {v: -c for v, c in sc.items()}, -scst
        coeffs, const = _linear(form[1])
        for sub in form[2:]:
            sc, scst = _linear(sub)
            const -= scst
            for v, cc in sc.items():
                coeffs[v] = coeffs.get(v, Fraction(0)) - cc
        return coeffs, const
    if head == "*":
        factors = [_linear(sub) for sub in form[1:]]
        consts = [cst for sc, cst in factors if not sc]
        lins = [(sc, cst) for sc, cst in factors if sc]
        if len(lins) > 1:
            raise ValueError("nonlinear product in QF_LRA input")
        scale = Fraction(1)
        for c in consts:
            scale *= c
        if not lins:
            return {}, scale
        sc, cst = lins[0]
        return {v: c * scale for v, c in sc.items()}, cst * scale
    raise ValueError(f"unsupported term {form!r}")


OPS = {"<=", "<", ">=", ">", "="}


def _atom(form) -> Atom:
    if not (isinstance(form, list) and len(form) == 3 and form[0] in OPS):
        raise ValueError(f"expected a linear atom, got {form!r}")
    lc, lconst = _linear(form[1])
    rc, rconst = _linear(form[2])
    coeffs = dict(lc)
    for v, c in rc.items():
        coeffs[v] = coeffs.get(v, Fraction(0)) - c
    expr = lin(coeffs)
    if not expr:
        raise ValueError(f"ground atom {form!r} has no variables")
    return Atom(expr, form[0], rconst - lconst)


def _literals(form) -> list[Literal]:
    if isinstance(form, list) and form and form[0] == "not":
        inner = _literals(form[1])
        if len(inner) != 1:
            raise ValueError("negation of a non-atom")
        lit = inner[0]
        return [Literal(lit.atom, not lit.positive)]
    return [Literal(_atom(form))]


def _assert_into(problem: Problem, form) -> None:
    if isinstance(form, list) and form:
        if form[0] == "and":
            for sub in form[1:]:
                _assert_into(problem, sub)
            return
        if form[0] == "or":
            lits = []
            for sub in form[1:]:
                lits.extend(_literals(sub))
            problem.add_clause(*lits)
            return
        if form[0] == "=>":
            if len(form) != 3:
                raise ValueError("chained implication unsupported")
            lhs = _literals(form[1])
            rhs = _literals(form[2])
            problem.add_clause(
                *[Literal(l.atom, not l.positive) for l in lhs], *rhs
            )
            return
        if form[0] == "not":
            lit = _literals(form)[0]
            problem.add_clause(lit)
            return
    problem.add_unit(_atom(form))


def parse_smtlib(text: str) -> Problem:
    """Collect declarations and assertions from a document."""
    problem = Problem()
    for form in parse_sexprs(tokenize(text)):
        if not isinstance(form, list) or not form:
            continue
        head = form[0]
        if head == "declare-const":
            problem.variables.append(form[1])
        elif head == "declare-fun" and form[2] == []:
            problem.variables.append(form[1])
        elif head == "assert":
            _assert_into(problem, form[1])
    return problem


def run_session(lines) -> list[str]:
    """Interpret a command stream; returns the printed responses.

    Supports the one-shot flow the refinement pipeline uses: declarations and
    assertions, one (check-sat), then (get-value ...) / (get-model).
    """
    problem = Problem()
    out: list[str] = []
    result = None
    text = "\n".join(lines) if not isinstance(lines, str) else lines
    for form in parse_sexprs(tokenize(text)):
        if not isinstance(form, list) or not form:
            continue
        head = form[0]
        if head in ("set-logic", "set-info", "set-option"):
            continue
        if head == "declare-const":
            problem.variables.append(form[1])
        elif head == "declare-fun" and form[2] == []:
            problem.variables.append(form[1])
        elif head == "assert":
            _assert_into(problem, form[1])
        elif head == "check-sat":
            result = solve_problem(problem)
            out.append(result.status)
        elif head == "get-value":
            if result is None or result.model is None:
                out.append("(error \"no model available\")")
                continue
            names = form[1]
            pairs = " ".join(
                f"({n} {fmt_rational(result.model.get(n, Fraction(0)))})"
                for n in names
            )
            out.append(f"({pairs})")
        elif head == "get-model":
            if result is None or result.model is None:
                out.append("(error \"no model available\")")
                continue
            defs = " ".join(
                f"(define-fun {n} () Real {fmt_rational(v)})"
                for n, v in sorted(result.model.items())
            )
            out.append(f"({defs})")
        elif head == "exit":
            break
        else:
            out.append(f"(error \"unsupported command {head}\")")
    return out
