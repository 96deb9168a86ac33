"""General simplex over delta-rationals with incremental bound assertion.

Strict inequalities are handled by an infinitesimal: every value is a pair
(r, k) meaning r + k*delta, compared lexicographically.  The tableau keeps
one row per basic variable expressing it over the nonbasic ones; asserted
bounds move nonbasic variables directly and repair basic ones by pivoting
(Bland's rule, so the repair terminates).
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd

ZERO = (Fraction(0), Fraction(0))


def drat(value: Fraction, delta: int | Fraction = 0) -> tuple[Fraction, Fraction]:
    return (value, Fraction(delta))


def d_add(a, b):
    return (a[0] + b[0], a[1] + b[1])


def d_sub(a, b):
    return (a[0] - b[0], a[1] - b[1])


def d_scale(c: Fraction, a):
    return (c * a[0], c * a[1])


class Conflict(Exception):
    """Raised with the asserting reasons that cannot hold together."""

    def __init__(self, reasons):
        super().__init__("theory conflict")
        self.reasons = [r for r in reasons if r is not None]


class Simplex:
    """Rows are integer vectors with one positive denominator per row:
    basic = (1/den) * sum(coeff[v] * v).  Pivoting then works in plain integer
    arithmetic with a single gcd normalization per touched row."""

    def __init__(self):
        self.names: list[str] = []
        self.rows: dict[int, dict[int, int]] = {}
        self.dens: dict[int, int] = {}
        self.occurs: dict[int, set[int]] = {}
        self.alpha: list[tuple[Fraction, Fraction]] = []
        self.lower: list[tuple | None] = []
        self.upper: list[tuple | None] = []
        self.lower_reason: list = []
        self.upper_reason: list = []
        self._dirty: set[int] = set()
        self._trail: list[tuple] = []
        self._levels: list[int] = []

    # -- construction -------------------------------------------------------

    def new_var(self, name: str) -> int:
        v = len(self.names)
        self.names.append(name)
        self.alpha.append(ZERO)
        self.lower.append(None)
        self.upper.append(None)
        self.lower_reason.append(None)
        self.upper_reason.append(None)
        self.occurs.setdefault(v, set())
        return v

    def coeff(self, basic: int, var: int) -> Fraction:
        return Fraction(self.rows[basic][var], self.dens[basic])

    def define(self, name: str, expr: dict[int, Fraction]) -> int:
        """New basic variable equal to the linear expression."""
        s = self.new_var(name)
        den = 1
        for c in expr.values():
            den = den * c.denominator // gcd(den, c.denominator)
        row = {}
        for v, c in expr.items():
            if c != 0:
                row[v] = c.numerator * (den // c.denominator)
        self.rows[s] = row
        self.dens[s] = den
        val = ZERO
        for v, num in row.items():
            self.occurs[v].add(s)
            val = d_add(val, d_scale(Fraction(num, den), self.alpha[v]))
        self.alpha[s] = val
        return s

    # -- bound assertion ----------------------------------------------------

    def push(self) -> None:
        self._levels.append(len(self._trail))

    def pop(self) -> None:
        # Bounds are restored; the assignment is not (it still solves the
        # rows), so variables recorded as possibly violated stay recorded.
        mark = self._levels.pop()
        while len(self._trail) > mark:
            v, is_lower, bound, reason = self._trail.pop()
            if is_lower:
                self.lower[v], self.lower_reason[v] = bound, reason
            else:
                self.upper[v], self.upper_reason[v] = bound, reason

    def assert_lower(self, v: int, bound, reason=None) -> None:
        cur = self.lower[v]
        if cur is not None and bound <= cur:
            return
        up = self.upper[v]
        if up is not None and bound > up:
            raise Conflict([reason, self.upper_reason[v]])
        self._trail.append((v, True, cur, self.lower_reason[v]))
        self.lower[v], self.lower_reason[v] = bound, reason
        if v not in self.rows:
            if self.alpha[v] < bound:
                self._update(v, bound)
        else:
            self._dirty.add(v)

    def assert_upper(self, v: int, bound, reason=None) -> None:
        cur = self.upper[v]
        if cur is not None and bound >= cur:
            return
        lo = self.lower[v]
        if lo is not None and bound < lo:
            raise Conflict([reason, self.lower_reason[v]])
        self._trail.append((v, False, cur, self.upper_reason[v]))
        self.upper[v], self.upper_reason[v] = bound, reason
        if v not in self.rows:
            if self.alpha[v] > bound:
                self._update(v, bound)
        else:
            self._dirty.add(v)

    def _update(self, v: int, value) -> None:
        diff = d_sub(value, self.alpha[v])
        for b in self.occurs[v]:
            c = Fraction(self.rows[b][v], self.dens[b])
            self.alpha[b] = d_add(self.alpha[b], d_scale(c, diff))
            self._dirty.add(b)
        self.alpha[v] = value

    # -- feasibility --------------------------------------------------------

    def _violated_basic(self) -> int | None:
        stale = []
        for b in sorted(self._dirty):
            if b not in self.rows:
                stale.append(b)
                continue
            lo, up = self.lower[b], self.upper[b]
            if (lo is not None and self.alpha[b] < lo) or (
                up is not None and self.alpha[b] > up
            ):
                for s in stale:
                    self._dirty.discard(s)
                return b
            stale.append(b)
        self._dirty.clear()
        return None

    def check(self) -> None:
        """Pivot until every variable sits within its bounds.

        Raises Conflict with the smallest implied reason set when the asserted
        bounds are unsatisfiable.  Column choice favours large coefficients
        (fewer, better-conditioned pivots); after a budget it degrades to
        Bland's least-index rule, which cannot cycle.
        """
        steps = 0
        bland_after = 8 * (len(self.rows) + 8)
        while True:
            b = self._violated_basic()
            if b is None:
                return
            steps += 1
            bland = steps > bland_after
            lo, up = self.lower[b], self.upper[b]
            if lo is not None and self.alpha[b] < lo:
                target, grow = lo, True
            else:
                target, grow = up, False
            row = self.rows[b]
            pivot = None
            best_mag = None
            for j in sorted(row):
                c = row[j]
                if (c > 0) == grow:
                    usable = self.upper[j] is None or self.alpha[j] < self.upper[j]
                else:
                    usable = self.lower[j] is None or self.alpha[j] > self.lower[j]
                if not usable:
                    continue
                if bland:
                    pivot = j
                    break
                mag = abs(c)
                if best_mag is None or mag > best_mag:
                    pivot, best_mag = j, mag
            if pivot is None:
                reasons = [self.lower_reason[b] if grow else self.upper_reason[b]]
                for j in sorted(row):
                    c = row[j]
                    if (c > 0) == grow:
                        reasons.append(self.upper_reason[j])
                    else:
                        reasons.append(self.lower_reason[j])
                raise Conflict(reasons)
            self._pivot_and_update(b, pivot, target)

    def _pivot_and_update(self, b: int, j: int, target) -> None:
        c = Fraction(self.rows[b][j], self.dens[b])
        theta = d_scale(Fraction(1) / c, d_sub(target, self.alpha[b]))
        self.alpha[b] = target
        self.alpha[j] = d_add(self.alpha[j], theta)
        for i in self.occurs[j]:
            if i != b:
                ci = Fraction(self.rows[i][j], self.dens[i])
                self.alpha[i] = d_add(self.alpha[i], d_scale(ci, theta))
                self._dirty.add(i)
        self._pivot(b, j)
        self._dirty.discard(b)
        self._dirty.add(j)

    @staticmethod
    def _normalize(row: dict[int, int], den: int) -> int:
        g = den
        for val in row.values():
            g = gcd(g, val)
            if g == 1:
                return den
        if g > 1:
            for k in row:
                row[k] //= g
            den //= g
        return den

    def _pivot(self, b: int, j: int) -> None:
        row = self.rows.pop(b)
        den_b = self.dens.pop(b)
        cbj = row.pop(j)
        for k in row:
            self.occurs[k].discard(b)
        self.occurs[j].discard(b)

        # j = (den_b * b - sum_k row[k] * k) / cbj
        new_row = {b: den_b}
        for k, ck in row.items():
            new_row[k] = -ck
        new_den = cbj
        if new_den < 0:
            new_den = -new_den
            for k in new_row:
                new_row[k] = -new_row[k]
        new_den = self._normalize(new_row, new_den)

        for i in list(self.occurs[j]):
            irow = self.rows[i]
            cij = irow.pop(j)
            self.occurs[j].discard(i)
            # irow/den_i + (cij/den_i) * new_row/new_den, over den_i*new_den.
            for k in irow:
                irow[k] *= new_den
            for k, ck in new_row.items():
                val = irow.get(k, 0) + cij * ck
                if val == 0:
                    if k in irow:
                        del irow[k]
                        self.occurs[k].discard(i)
                else:
                    if k not in irow:
                        self.occurs[k].add(i)
                    irow[k] = val
            empty = [k for k, val in irow.items() if val == 0]
            for k in empty:
                del irow[k]
                self.occurs[k].discard(i)
            self.dens[i] = self._normalize(irow, self.dens[i] * new_den)

        self.rows[j] = new_row
        self.dens[j] = new_den
        for k in new_row:
            self.occurs[k].add(j)

    # -- models --------------------------------------------------------------

    def concrete_values(self, delta_cap: Fraction = Fraction(1, 8)) -> list[Fraction]:
        """Realize the delta-rational assignment with an actual small delta.

        Delta must stay below every margin that separates a strict bound from
        its variable, so the largest safe value is computed and then halved.
        """
        cap = delta_cap
        for v in range(len(self.names)):
            val = self.alpha[v]
            for bound, sense in ((self.lower[v], 1), (self.upper[v], -1)):
                if bound is None:
                    continue
                num = sense * (val[0] - bound[0])
                den = sense * (bound[1] - val[1])
                # num + delta*(-den) >= 0 must hold; binding only when den > 0.
                if den > 0 and num / den < cap:
                    cap = num / den
            if cap == 0:
                break
        delta = cap / 2 if cap > 0 else Fraction(0)
        return [a + b * delta for a, b in self.alpha]
