"""Refinement of a high-level trace into a feasible per-step speed plan.

The trace fixes which car does what in which order; this layer restores real
dynamics: piecewise-constant speeds with acceleration bounds, positional
safety gaps, the trace's relative event order, and bounded lag behind the
trace's own schedule.  Everything is linear, instantiated per timestep, and
handed to a solver for quantifier-free linear real arithmetic; a linear
search over the horizon finds the smallest feasible step count.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .automata import traversal
from .config import DEFAULTS, Defaults
from .network import (
    Car,
    CarTraffic,
    Section,
    WorldSnapshot,
    check_collision_rules,
    head_on_shares,
    shared_stretches,
)
from .smt.problem import Atom, Literal, Problem, lin
from .system import SwaSystem, Trace

ENTER, LEAVE = 0, 1


@dataclass(frozen=True)
class ImportantEvent:
    car: int
    section: Section
    kind: int                 # ENTER or LEAVE
    time: Fraction            # global trace time
    path_offset: Fraction     # absolute offset along the car's path

    def sort_key(self):
        return (self.time, self.car, self.section.key, self.kind)


@dataclass(frozen=True)
class RefinementSpec:
    steps: int
    max_speed: Fraction = DEFAULTS.max_speed
    max_accel: Fraction = DEFAULTS.max_accel
    max_decel: Fraction = DEFAULTS.max_decel
    timing_slack: int = DEFAULTS.timing_slack
    safety_gap: Fraction = DEFAULTS.safety_gap
    horizon_cap: int = DEFAULTS.horizon_cap

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("horizon must contain at least one step")
        if self.max_speed <= 0 or self.max_accel <= 0 or self.max_decel <= 0:
            raise ValueError("speed and acceleration bounds must be positive")
        if self.timing_slack < 0:
            raise ValueError("timing slack cannot be negative")

    @staticmethod
    def from_defaults(steps: int, defaults: Defaults = DEFAULTS) -> "RefinementSpec":
        return RefinementSpec(
            steps=steps,
            max_speed=defaults.max_speed,
            max_accel=defaults.max_accel,
            max_decel=defaults.max_decel,
            timing_slack=defaults.timing_slack,
            safety_gap=defaults.safety_gap,
            horizon_cap=defaults.horizon_cap,
        )


@dataclass
class RefinedPlan:
    spec: RefinementSpec
    speeds: dict[int, list[Fraction]]          # car index -> v[0..N-1]
    trace_sha: str | None = None

    @property
    def steps(self) -> int:
        return self.spec.steps

    def positions(self, car: int) -> list[Fraction]:
        """Relative positions pos[0..N] as prefix sums of the speeds."""
        out = [Fraction(0)]
        for v in self.speeds[car]:
            out.append(out[-1] + v)
        return out


class HorizonError(ValueError):
    pass


def extract_events(trace: Trace, traffic: CarTraffic) -> list[ImportantEvent]:
    """One enter and one leave per traversed section, timed from the trace.

    The first section of each car gets a synthetic enter at time zero (the car
    is already inside); every arrival is the leave of one section, every
    advance the enter of the next.  Events are sorted by time, ties broken by
    car, section, kind.
    """
    system = SwaSystem(traffic)
    ok = system.validate_trace(trace)
    if not ok:
        raise ValueError(f"trace does not replay: {ok.reason}")

    steps_of = {car.index: traversal(car) for car in traffic.cars}
    at = {car.index: 0 for car in traffic.cars}
    events: list[ImportantEvent] = []
    for car in traffic.cars:
        first = steps_of[car.index][0]
        events.append(ImportantEvent(
            car.index, first.dsec.section, ENTER, Fraction(0), first.start
        ))
    for event in trace:
        for edge in event.edges:
            if not edge.automaton.startswith("car"):
                continue
            idx = int(edge.automaton[3:])
            k = at[idx]
            step = steps_of[idx][k]
            if edge.transition_id.startswith("driving["):
                events.append(ImportantEvent(
                    idx, step.dsec.section, LEAVE, event.time, step.end
                ))
            elif edge.transition_id.startswith("arrived["):
                nxt = steps_of[idx][k + 1]
                events.append(ImportantEvent(
                    idx, nxt.dsec.section, ENTER, event.time, nxt.start
                ))
                at[idx] = k + 1
    events.sort(key=ImportantEvent.sort_key)
    return events


# ---------------------------------------------------------------------------
# Pair selection and window geometry (shared by the builder and the validator)


def order_components(events, full_pairs=False):
    """Ordered event pairs whose relative order the plan must preserve.

    Default scope: chronologically consecutive cross-car pairs plus all pairs
    sharing a section (transitively equivalent to the full ordering); the full
    quadratic set is available for equivalence testing.
    """
    out = []
    seen = set()

    def add(e1, e2):
        if e1.car == e2.car or e1.time > e2.time:
            return
        key = (e1.car, e1.section.key, e1.kind, e2.car, e2.section.key, e2.kind)
        if key not in seen:
            seen.add(key)
            out.append((e1, e2))

    if full_pairs:
        for i, e1 in enumerate(events):
            for e2 in events[i + 1:]:
                add(e1, e2)
        return out

    for e1, e2 in zip(events, events[1:]):
        add(e1, e2)
    by_section: dict[str, list[ImportantEvent]] = {}
    for e in events:
        by_section.setdefault(e.section.key, []).append(e)
    for sec_events in by_section.values():
        for i, e1 in enumerate(sec_events):
            for e2 in sec_events[i + 1:]:
                add(e1, e2)
    return out


@dataclass(frozen=True)
class GapWindow:
    """Aligned positional-gap requirement between a leader and a follower.

    Within the window (absolute offsets, already clipped to each traversal)
    the leader must stay more than ``gap`` ahead on the common axis:
    (pos_lead - lead_shift) - (pos_follow - follow_shift) > gap.
    Unconditional windows (same-path pairs) have no bounds.
    """

    lead: int
    follow: int
    lead_shift: Fraction
    follow_shift: Fraction
    lead_lo: Fraction | None
    lead_hi: Fraction | None
    follow_lo: Fraction | None
    follow_hi: Fraction | None


@dataclass(frozen=True)
class HeadOnWindow:
    """Joint clearance ahead of a contested node for opposite traversals.

    While ``first`` is still inside the shared section and ``second`` is in
    its approach zone, their summed distances to the node must exceed gap:
    (first_leave - pos_first) + (second_enter - pos_second) > gap.
    """

    first: int
    second: int
    first_enter: Fraction
    first_leave: Fraction
    second_enter: Fraction
    approach_lo: Fraction


def _enter_time(events, car: int, offset: Fraction) -> Fraction | None:
    for e in events:
        if e.car == car and e.kind == ENTER and e.path_offset == offset:
            return e.time
    return None


def gap_windows(events, traffic: CarTraffic):
    """All pairwise safety windows implied by the trace and the geometry."""
    windows: list[GapWindow] = []
    head_ons: list[HeadOnWindow] = []
    cars = list(traffic.cars)
    for i in range(len(cars)):
        for j in range(i + 1, len(cars)):
            a, b = cars[i], cars[j]
            for st in shared_stretches(a, b):
                if st.same_path:
                    lead, follow = (a, b) if a.initial_offset > b.initial_offset else (b, a)
                    windows.append(GapWindow(
                        lead.index, follow.index,
                        Fraction(0), Fraction(0), None, None, None, None,
                    ))
                    continue
                # Order from the trace: who enters the stretch first.
                ta = _enter_time(events, a.index, st.a_start)
                tb = _enter_time(events, b.index, st.b_start)
                if ta is None or tb is None:
                    continue  # a car never reaches the stretch
                if ta <= tb:
                    lead_car, follow_car = a, b
                    lead_lo, lead_len = st.a_start, st.length
                    lead_next = st.a_next_len
                    fol_lo, fol_len = st.b_start, st.length
                else:
                    lead_car, follow_car = b, a
                    lead_lo, lead_len = st.b_start, st.length
                    lead_next = st.b_next_len
                    fol_lo, fol_len = st.a_start, st.length
                lead_hi = lead_lo + lead_len + (lead_next or 0)
                windows.append(GapWindow(
                    lead_car.index, follow_car.index,
                    lead_lo, fol_lo,
                    max(lead_lo, lead_car.initial_offset),
                    min(lead_hi, lead_car.goal_offset),
                    max(fol_lo, follow_car.initial_offset),
                    min(fol_lo + fol_len, follow_car.goal_offset),
                ))
            for ho in head_on_shares(a, b) + head_on_shares(b, a):
                ta = _enter_time(events, ho.a, ho.a_enter)
                tb = _enter_time(events, ho.b, ho.b_enter)
                if ta is None or tb is None or ta > tb:
                    continue  # roles fixed: ho.a crosses first
                head_ons.append(HeadOnWindow(
                    ho.a, ho.b,
                    ho.a_enter, ho.a_leave, ho.b_enter,
                    ho.b_enter - (ho.b_prev_len or 0),
                ))
    return windows, head_ons


# ---------------------------------------------------------------------------
# Constraint emission


@dataclass
class ConstraintSet:
    problem: Problem
    spec: RefinementSpec
    cars: list[int]
    initials: dict[int, Fraction]
    family_counts: dict[str, int] = field(default_factory=dict)
    events: list = field(default_factory=list)

    def var_count(self) -> int:
        """Free dimensions of the plan: one speed per car per step."""
        return len(self.cars) * self.spec.steps


def _vname(car: int, k: int) -> str:
    return f"v_{car}_{k}"


def _pname(car: int, k: int) -> str:
    return f"pos_{car}_{k}"


def build_constraints(
    events,
    spec: RefinementSpec,
    traffic: CarTraffic,
    initial_speeds: dict[int, Fraction] | None = None,
    full_pairs: bool = False,
    drop_families: set[str] = frozenset(),
) -> ConstraintSet:
    """Instantiate every constraint family over N steps.

    Families: (a) positions as prefix sums, (b) acceleration bounds with the
    measured starting speed, (c) speed bounds, (d) relative event order,
    (e) safety gaps (aligned stretches and head-on approaches), (f) timing
    slack deadlines, (g) goal attainment.
    """
    N = spec.steps
    if N < 1:
        raise HorizonError("horizon must have at least one step")
    initial_speeds = initial_speeds or {}
    cars = [c.index for c in traffic.cars]
    initials = {c.index: c.initial_offset for c in traffic.cars}
    goals = {c.index: c.goal_offset for c in traffic.cars}

    p = Problem()
    counts: dict[str, int] = {f: 0 for f in "abcdefg"}

    def unit(family: str, atom: Atom):
        if family in drop_families:
            return
        p.add_unit(atom)
        counts[family] += 1

    def clause(family: str, *lits: Literal):
        if family in drop_families:
            return
        p.add_clause(*lits)
        counts[family] += 1

    # Positions are the solver variables; the speed during step k is the
    # difference pos[k+1]-pos[k], which keeps every row short and banded.
    for c in cars:
        for k in range(N + 1):
            p.variables.append(_pname(c, k))

    one = Fraction(1)
    for c in cars:
        # (a) position anchor (prefix sums are implicit in the difference form)
        unit("a", Atom(lin({_pname(c, 0): one}), "=", Fraction(0)))
        # (b) acceleration: bounded second differences, anchored at the
        # measured initial speed
        v0 = initial_speeds.get(c, Fraction(0))
        unit("b", Atom(lin({_pname(c, 1): one, _pname(c, 0): -one}), "=", v0))
        for k in range(N - 1):
            curve = lin({
                _pname(c, k + 2): one,
                _pname(c, k + 1): -2 * one,
                _pname(c, k): one,
            })
            unit("b", Atom(curve, "<=", spec.max_accel))
            unit("b", Atom(curve, ">=", -spec.max_decel))
        # (c) speed bounds: first differences
        for k in range(N):
            step = lin({_pname(c, k + 1): one, _pname(c, k): -one})
            unit("c", Atom(step, ">=", Fraction(0)))
            unit("c", Atom(step, "<=", spec.max_speed))
        # (g) goal attainment
        unit("g", Atom(lin({_pname(c, N): one}), ">=", goals[c] - initials[c]))

    # (d) relative event order
    for e1, e2 in order_components(events, full_pairs=full_pairs):
        p1 = e1.path_offset - initials[e1.car]
        p2 = e2.path_offset - initials[e2.car]
        if p1 <= 0:
            continue  # the antecedent can never hold (positions start at 0)
        for k in range(N - 1):
            clause(
                "d",
                Literal(Atom(lin({_pname(e1.car, k): one}), "<", p1), positive=False),
                Literal(Atom(lin({_pname(e2.car, k): one}), "<", p2)),
            )

    # (e) safety gaps
    windows, head_ons = gap_windows(events, traffic)
    for w in windows:
        shift = (w.lead_shift - initials[w.lead]) - (w.follow_shift - initials[w.follow])
        gap_atom = Atom(
            lin({_pname(w.lead, 0): one}), ">", Fraction(0)
        )  # placeholder shape; rebuilt per k below
        for k in range(N + 1):
            expr = lin({_pname(w.lead, k): one, _pname(w.follow, k): -one})
            rhs = spec.safety_gap + shift
            if w.lead_lo is None:
                unit("e", Atom(expr, ">", rhs))
                continue
            # Windows are half-open at their exits: a position exactly on the
            # far boundary already belongs to the next section.
            lits = []
            lo_l = w.lead_lo - initials[w.lead]
            hi_l = w.lead_hi - initials[w.lead]
            lo_f = w.follow_lo - initials[w.follow]
            hi_f = w.follow_hi - initials[w.follow]
            if lo_l > 0:
                lits.append(Literal(
                    Atom(lin({_pname(w.lead, k): one}), ">=", lo_l), positive=False))
            lits.append(Literal(
                Atom(lin({_pname(w.lead, k): one}), "<", hi_l), positive=False))
            if lo_f > 0:
                lits.append(Literal(
                    Atom(lin({_pname(w.follow, k): one}), ">=", lo_f), positive=False))
            lits.append(Literal(
                Atom(lin({_pname(w.follow, k): one}), "<", hi_f), positive=False))
            lits.append(Literal(Atom(expr, ">", rhs)))
            clause("e", *lits)
    for h in head_ons:
        # (first_leave - pos_first) + (second_enter - pos_second) > gap
        for k in range(N + 1):
            lits = []
            lo_1 = h.first_enter - initials[h.first]
            hi_1 = h.first_leave - initials[h.first]
            lo_2 = h.approach_lo - initials[h.second]
            hi_2 = h.second_enter - initials[h.second]
            if lo_1 > 0:
                lits.append(Literal(
                    Atom(lin({_pname(h.first, k): one}), ">=", lo_1), positive=False))
            lits.append(Literal(
                Atom(lin({_pname(h.first, k): one}), "<", hi_1), positive=False))
            if lo_2 > 0:
                lits.append(Literal(
                    Atom(lin({_pname(h.second, k): one}), ">=", lo_2), positive=False))
            lits.append(Literal(
                Atom(lin({_pname(h.second, k): one}), "<", hi_2), positive=False))
            rhs = spec.safety_gap - hi_1 - hi_2
            lits.append(Literal(
                Atom(lin({_pname(h.first, k): -one, _pname(h.second, k): -one}),
                     ">", rhs)))
            clause("e", *lits)

    # (f) approximate timing: each enter happens at most slack steps late
    for e in events:
        if e.kind != ENTER:
            continue
        target = e.path_offset - initials[e.car]
        if target <= 0:
            continue
        index = min(int(e.time.__floor__()) + spec.timing_slack, N)
        unit("f", Atom(lin({_pname(e.car, index): one}), ">=", target))

    # Redundant monotonicity links: positions never decrease, so a positional
    # threshold, once crossed, stays crossed.  Encoding that as binary clauses
    # lets the boolean layer sweep whole timelines by unit propagation instead
    # of discovering each step through the arithmetic.
    if "m" not in drop_families:
        thresholds: set[tuple[int, Fraction, str]] = set()
        for e1, e2 in order_components(events, full_pairs=full_pairs):
            p1 = e1.path_offset - initials[e1.car]
            p2 = e2.path_offset - initials[e2.car]
            if p1 <= 0:
                continue
            thresholds.add((e1.car, p1, "<"))
            thresholds.add((e2.car, p2, "<"))
        for w in windows:
            if w.lead_lo is None:
                continue
            for car, lo, hi, shift in (
                (w.lead, w.lead_lo, w.lead_hi, initials[w.lead]),
                (w.follow, w.follow_lo, w.follow_hi, initials[w.follow]),
            ):
                if lo - shift > 0:
                    thresholds.add((car, lo - shift, ">="))
                thresholds.add((car, hi - shift, "<="))
        for h in head_ons:
            for car, lo, hi in (
                (h.first, h.first_enter - initials[h.first],
                 h.first_leave - initials[h.first]),
                (h.second, h.approach_lo - initials[h.second],
                 h.second_enter - initials[h.second]),
            ):
                if lo > 0:
                    thresholds.add((car, lo, ">="))
                thresholds.add((car, hi, "<="))
        counts["m"] = 0
        for car, value, op in sorted(thresholds, key=lambda t: (t[0], t[1], t[2])):
            for k in range(1, N + 1):
                later = Atom(lin({_pname(car, k): one}), op, value)
                earlier = Atom(lin({_pname(car, k - 1): one}), op, value)
                if op == ">=":
                    # crossed at k-1 implies crossed at k
                    p.add_clause(Literal(earlier, positive=False), Literal(later))
                else:
                    # still below at k implies still below at k-1
                    p.add_clause(Literal(later, positive=False), Literal(earlier))
                counts["m"] += 1

    # Reference trajectory to steer the boolean search: race each car to its
    # goal independently;  the matching phases are a good first guess.
    hint: dict[str, Fraction] = {}
    for c in cars:
        v = initial_speeds.get(c, Fraction(0))
        pos = Fraction(0)
        hint[_pname(c, 0)] = pos
        for k in range(N):
            v = min(spec.max_speed, v + spec.max_accel)
            pos += v
            hint[_pname(c, k + 1)] = pos

    cs = ConstraintSet(
        problem=p, spec=spec, cars=cars, initials=initials,
        family_counts=counts, events=list(events),
    )
    p.hint = hint
    return cs


def emit_solver_text(cs: ConstraintSet) -> str:
    """SMT-LIB 2 document for the constraint set.

    Speed names are provided as defined aliases over the position variables,
    so the document reads like the speed formulation while the assertions use
    the sparse difference form.
    """
    from .smt.text import emit_smtlib

    text = emit_smtlib(cs.problem)
    aliases = []
    for c in cs.cars:
        for k in range(cs.spec.steps):
            aliases.append(
                f"(define-fun {_vname(c, k)} () Real "
                f"(- {_pname(c, k + 1)} {_pname(c, k)}))"
            )
    head, tail = text.split("(check-sat)", 1)
    return head + "\n".join(aliases) + "\n(check-sat)" + tail


# ---------------------------------------------------------------------------
# Validation


def validate_plan(
    plan: RefinedPlan,
    events,
    spec: RefinementSpec,
    traffic: CarTraffic,
    initial_speeds: dict[int, Fraction] | None = None,
    full_pairs: bool = False,
):
    """Exact re-check of every family plus the collision rules per step.

    Returns an object that is truthy on success and carries the first failed
    requirement otherwise.
    """
    from .system import ValidationResult

    initial_speeds = initial_speeds or {}
    N = spec.steps
    cars = {c.index: c for c in traffic.cars}
    pos = {c: plan.positions(c) for c in plan.speeds}

    for c, speeds in plan.speeds.items():
        if len(speeds) != N:
            return ValidationResult(False, f"car {c}: speed row is not length {N}")
        v0 = initial_speeds.get(c, Fraction(0))
        if speeds[0] != v0:
            return ValidationResult(False, f"car {c}: v0 {speeds[0]} != measured {v0}")
        for k, v in enumerate(speeds):
            if not (0 <= v <= spec.max_speed):
                return ValidationResult(False, f"car {c}: speed bound broken at {k}")
        for k in range(N - 1):
            dv = speeds[k + 1] - speeds[k]
            if dv > spec.max_accel or dv < -spec.max_decel:
                return ValidationResult(False, f"car {c}: acceleration broken at {k}")
        goal = cars[c].goal_offset - cars[c].initial_offset
        if pos[c][N] < goal:
            return ValidationResult(False, f"car {c}: goal not reached")

    for e1, e2 in order_components(events, full_pairs=full_pairs):
        p1 = e1.path_offset - cars[e1.car].initial_offset
        p2 = e2.path_offset - cars[e2.car].initial_offset
        if p1 <= 0:
            continue
        for k in range(N - 1):
            if pos[e1.car][k] < p1 and not pos[e2.car][k] < p2:
                return ValidationResult(
                    False,
                    f"order broken at step {k}: car {e2.car} passed "
                    f"{e2.section.key}/{e2.kind} before car {e1.car}",
                )

    windows, head_ons = gap_windows(events, traffic)
    for w in windows:
        for k in range(N + 1):
            la = pos[w.lead][k] + cars[w.lead].initial_offset
            fa = pos[w.follow][k] + cars[w.follow].initial_offset
            if w.lead_lo is not None:
                if not (w.lead_lo <= la < w.lead_hi and w.follow_lo <= fa < w.follow_hi):
                    continue
                gap = (la - w.lead_shift) - (fa - w.follow_shift)
            else:
                gap = la - fa
            if gap <= spec.safety_gap:
                return ValidationResult(
                    False,
                    f"gap {gap} between cars {w.lead}/{w.follow} at step {k}",
                )
    for h in head_ons:
        for k in range(N + 1):
            fa = pos[h.first][k] + cars[h.first].initial_offset
            sa = pos[h.second][k] + cars[h.second].initial_offset
            if h.first_enter <= fa < h.first_leave and h.approach_lo <= sa < h.second_enter:
                clearance = (h.first_leave - fa) + (h.second_enter - sa)
                if clearance <= spec.safety_gap:
                    return ValidationResult(
                        False,
                        f"head-on clearance {clearance} between "
                        f"{h.first}/{h.second} at step {k}",
                    )

    for e in events:
        if e.kind != ENTER:
            continue
        target = e.path_offset - cars[e.car].initial_offset
        if target <= 0:
            continue
        index = min(int(e.time.__floor__()) + spec.timing_slack, N)
        if pos[e.car][index] < target:
            return ValidationResult(
                False,
                f"car {e.car} misses the {e.section.key} entry deadline "
                f"(step {index})",
            )

    # Collision rules on every step's snapshot (cars past their goal leave).
    for k in range(N + 1):
        offsets, speeds_now = {}, {}
        for c in plan.speeds:
            absolute = pos[c][k] + cars[c].initial_offset
            if absolute >= cars[c].goal_offset:
                continue
            offsets[c] = absolute
            speeds_now[c] = plan.speeds[c][k] if k < N else Fraction(0)
        snap = WorldSnapshot.from_offsets(traffic, offsets, speeds_now)
        violations = check_collision_rules(snap, traffic)
        if violations:
            return ValidationResult(
                False, f"step {k}: {violations[0].describe()}"
            )
    return ValidationResult(True)


# ---------------------------------------------------------------------------
# Linear search


def kinematic_min_steps(
    distance: Fraction, v0: Fraction, spec: RefinementSpec
) -> int:
    """Fewest steps a lone car needs to cover *distance* from speed v0."""
    if distance <= 0:
        return 0
    pos, v, n = Fraction(0), v0, 0
    while pos < distance:
        v = min(spec.max_speed, v + spec.max_accel)
        pos += v
        n += 1
        if n > 10_000:
            raise HorizonError("distance unreachable under the speed bounds")
    return n


def horizon_lower_bound(
    events, spec: RefinementSpec, traffic: CarTraffic,
    initial_speeds: dict[int, Fraction] | None = None,
) -> int:
    """Steps no feasible plan can beat.

    Per-car acceleration-limited travel, sharpened by a longest-path pass over
    the event-order graph: an ordered pair never crosses earlier than its
    predecessor, and a follower enters a shared stretch only once the leader
    is more than the safety gap inside.
    """
    initial_speeds = initial_speeds or {}
    cars = {c.index: c for c in traffic.cars}

    reach: dict[int, list[Fraction]] = {}
    for car in traffic.cars:
        v = initial_speeds.get(car.index, Fraction(0))
        pos, prefix = Fraction(0), [Fraction(0)]
        goal = car.goal_offset - car.initial_offset
        while pos < goal:
            v = min(spec.max_speed, v + spec.max_accel)
            pos += v
            prefix.append(pos)
        reach[car.index] = prefix

    def steps_to(car: int, target_rel: Fraction) -> int:
        seq = reach[car]
        for k, p in enumerate(seq):
            if p >= target_rel:
                return k
        extra = target_rel - seq[-1]
        return len(seq) - 1 + int((extra / spec.max_speed).__ceil__())

    def steps_between(car: int, frm: Fraction, to: Fraction) -> int:
        if to <= frm:
            return 0
        return int(((to - frm) / spec.max_speed).__ceil__())

    lb: dict[tuple, int] = {}
    key = lambda e: (e.car, e.section.key, e.kind)
    ordered = sorted(events, key=ImportantEvent.sort_key)
    for e in ordered:
        lb[key(e)] = steps_to(e.car, e.path_offset - cars[e.car].initial_offset)

    components = order_components(events)
    windows, _ = gap_windows(events, traffic)
    stagger = int((spec.safety_gap / spec.max_speed - 1).__floor__()) + 1
    stretch_edges = []
    for w in windows:
        if w.lead_lo is None:
            continue
        e_lead = next((e for e in events if e.car == w.lead and e.kind == ENTER
                       and e.path_offset == w.lead_shift), None)
        e_fol = next((e for e in events if e.car == w.follow and e.kind == ENTER
                      and e.path_offset == w.follow_shift), None)
        if e_lead and e_fol:
            stretch_edges.append((key(e_lead), key(e_fol), stagger))

    for _ in range(6):
        changed = False
        for e1, e2 in components:
            need = lb[key(e1)]
            if lb[key(e2)] < need:
                lb[key(e2)] = need
                changed = True
        for k1, k2, w in stretch_edges:
            need = lb[k1] + w
            if lb[k2] < need:
                lb[k2] = need
                changed = True
        if not changed:
            break

    bound = 1
    for car in traffic.cars:
        bound = max(bound, len(reach[car.index]) - 1)
    for e in ordered:
        rest = steps_between(
            e.car, e.path_offset - cars[e.car].initial_offset,
            cars[e.car].goal_offset - cars[e.car].initial_offset,
        )
        bound = max(bound, lb[key(e)] + rest)
    return bound


def solve_refinement(
    trace: Trace,
    spec: RefinementSpec,
    traffic: CarTraffic,
    solver=None,
    initial_speeds: dict[int, Fraction] | None = None,
    full_pairs: bool = False,
    timeout: float | None = None,
) -> RefinedPlan | None:
    """Smallest-horizon feasible plan for the trace, or None if none exists.

    The horizon is searched upward from a per-car event-order lower bound, so
    the first satisfiable N is minimal under the discretization.  A timeout
    abandons the search (an unknown answer is never treated as unsat).
    """
    import time as _time

    from .backends import BuiltinSolver

    solver = solver or BuiltinSolver()
    deadline = _time.monotonic() + timeout if timeout else None
    events = extract_events(trace, traffic)
    start = horizon_lower_bound(events, spec, traffic, initial_speeds)
    if start > spec.horizon_cap:
        return None
    for n in range(start, spec.horizon_cap + 1):
        if deadline is not None and _time.monotonic() > deadline:
            return None
        cs = build_constraints(
            events, replace(spec, steps=n), traffic,
            initial_speeds=initial_speeds, full_pairs=full_pairs,
        )
        status, model = solver.solve(cs, deadline)
        if status == "unknown":
            return None
        if status != "sat":
            continue
        speeds = {
            c: [model[_pname(c, k + 1)] - model[_pname(c, k)] for k in range(n)]
            for c in cs.cars
        }
        plan = RefinedPlan(replace(spec, steps=n), speeds, trace_sha=None)
        ok = validate_plan(plan, events, plan.spec, traffic, initial_speeds,
                           full_pairs=full_pairs)
        if not ok:
            raise AssertionError(f"solver model fails validation: {ok.reason}")
        return plan
    return None


# ---------------------------------------------------------------------------
# Plan files

PLAN_FORMAT = "roadsynth-plan"
PLAN_VERSION = 1


def save_plan(path, plan: RefinedPlan, traffic: CarTraffic,
              trace_sha: str | None = None) -> None:
    doc = {
        "format": PLAN_FORMAT,
        "version": PLAN_VERSION,
        "instance_sha": traffic.digest(),
        "trace_sha": trace_sha or plan.trace_sha,
        "spec": {
            "steps": plan.spec.steps,
            "max_speed": str(plan.spec.max_speed),
            "max_accel": str(plan.spec.max_accel),
            "max_decel": str(plan.spec.max_decel),
            "timing_slack": plan.spec.timing_slack,
            "safety_gap": str(plan.spec.safety_gap),
            "horizon_cap": plan.spec.horizon_cap,
        },
        "speeds": {
            str(c): [str(v) for v in row] for c, row in sorted(plan.speeds.items())
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_plan(path, traffic: CarTraffic | None = None) -> RefinedPlan:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != PLAN_FORMAT:
        raise ValueError(f"not a {PLAN_FORMAT} document")
    if doc.get("version") != PLAN_VERSION:
        raise ValueError(f"unsupported plan version {doc.get('version')}")
    if traffic is not None and doc["instance_sha"] != traffic.digest():
        raise ValueError("plan does not belong to this instance (hash mismatch)")
    s = doc["spec"]
    spec = RefinementSpec(
        steps=s["steps"],
        max_speed=Fraction(s["max_speed"]),
        max_accel=Fraction(s["max_accel"]),
        max_decel=Fraction(s["max_decel"]),
        timing_slack=s["timing_slack"],
        safety_gap=Fraction(s["safety_gap"]),
        horizon_cap=s["horizon_cap"],
    )
    speeds = {
        int(c): [Fraction(v) for v in row] for c, row in doc["speeds"].items()
    }
    return RefinedPlan(spec, speeds, trace_sha=doc.get("trace_sha"))


def trace_digest(trace: Trace) -> str:
    blob = json.dumps(
        [[str(ev.time), [(e.automaton, e.transition_id) for e in ev.edges]]
         for ev in trace],
        separators=(",", ":"),
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
