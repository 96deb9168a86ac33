"""Independent reference computations used to cross-check the solvers.

The scheduling oracle recomputes the optimal completion time for one- or
two-car instances by enumerating the order in which the cars use each shared
section and relaxing the resulting difference constraints; it shares no code
with the depth-first search.  The speed-lattice oracle brute-forces the
refinement problem on a discrete speed grid for small horizons.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from .automata import starts_at_boundary, traversal
from .network import CarTraffic, intersections
from .refine import (
    ENTER,
    RefinedPlan,
    RefinementSpec,
    gap_windows,
    order_components,
)


@dataclass
class _Journey:
    steps: list                      # TraversalStep list
    travel: list[Fraction]           # driving time per step
    boundary_start: bool
    virtual_entry: Fraction          # entry instant of step 0 (<= 0)

    @property
    def count(self) -> int:
        return len(self.steps)


def _journey(car, v: Fraction) -> _Journey:
    steps = traversal(car)
    boundary = starts_at_boundary(car)
    _, rel = car.path.locate(car.initial_offset)
    return _Journey(
        steps=steps,
        travel=[(st.end - st.start) / v for st in steps],
        boundary_start=boundary,
        virtual_entry=Fraction(0) if boundary else -rel / v,
    )


def exhaustive_optimal_time(traffic: CarTraffic) -> Fraction | None:
    """Minimum completion time by order enumeration, or None if unsolvable.

    Handles at most two cars: with fixed paths, the only interleaving
    decisions are which car uses each shared section first; given those
    orders, earliest drive-start times are the least fixpoint of a small
    difference constraint system.
    """
    if len(traffic.cars) > 2:
        raise ValueError("the scheduling oracle handles at most two cars")
    v = traffic.nominal_speed
    journeys = [_journey(car, v) for car in traffic.cars]
    if len(journeys) == 1:
        return sum(journeys[0].travel, Fraction(0))

    a, b = journeys
    inter = intersections(traffic)
    eps = traffic.epsilon / v
    shared = [
        (ka, kb)
        for ka in range(a.count)
        for kb in range(b.count)
        if a.steps[ka].dsec.section == b.steps[kb].dsec.section
    ]

    best = None
    for orders in product((0, 1), repeat=len(shared)):
        t = _earliest_makespan(journeys, shared, orders, inter, eps, v)
        if t is not None and (best is None or t < best):
            best = t
    return best


def _earliest_makespan(journeys, shared, orders, inter, eps, v):
    a, b = journeys
    plans = {0: a, 1: b}
    total = sum(a.travel) + sum(b.travel)
    gaps = [eps + s.dsec.section.length / v for (ka, _) in shared
            for s in [a.steps[ka]]]
    bound = (total + sum(gaps, Fraction(0)) + 1) * 4

    # Drive-start variables: step 0 only for boundary starters, all later steps.
    start: dict[tuple[int, int], Fraction] = {}
    for who, plan in plans.items():
        if plan.boundary_start:
            start[(who, 0)] = Fraction(0)
        for k in range(1, plan.count):
            start[(who, k)] = Fraction(0)

    def arrive(who, k):
        plan = plans[who]
        if (who, k) in start:
            return start[(who, k)] + plan.travel[k]
        # Mid-section starter: step 0 runs from t=0 (travel is the remainder).
        return plan.travel[0]

    def enter(who, k):
        if k == 0:
            return plans[who].virtual_entry
        return arrive(who, k - 1)

    def raise_enter(who, k, need) -> bool | None:
        """Push enter(who, k) up to *need*; None when it is fixed too low."""
        if k == 0 or (who, k - 1) not in start:
            return None if enter(who, k) < need else False
        key = (who, k - 1)
        lo = need - plans[who].travel[k - 1]
        if start[key] < lo:
            start[key] = lo
            return True
        return False

    # A car's token for a shared directed section: seeded ahead of everything
    # for a boundary starter on step 0, absent for a mid-section starter.
    def token(who, k):
        if k == 0:
            return "seeded" if plans[who].boundary_start else None
        return enter(who, k)

    for _ in range(128):
        changed = False
        for (ka, kb), first_a in zip(shared, orders):
            fw, fk = (0, ka) if first_a else (1, kb)
            sw, sk = (1, kb) if first_a else (0, ka)
            sec = a.steps[ka].dsec.section
            same_dir = a.steps[ka].dsec.direction == b.steps[kb].dsec.direction
            if sec in inter:
                gap = eps if same_dir else sec.length / v + eps
                res = raise_enter(sw, sk, enter(fw, fk) + gap)
                if res is None:
                    return None
                changed = changed or res
            if same_dir and token(fw, fk) is not None and token(sw, sk) is not None:
                # FIFO: the second pop cannot precede the first.
                if (sw, sk) in start:
                    f_start = start.get((fw, fk), plans[fw].virtual_entry)
                    if start[(sw, sk)] < f_start:
                        start[(sw, sk)] = f_start
                        changed = True
                elif token(sw, sk) == "seeded":
                    return None  # a seeded token is at the head; it cannot go second
        for who, plan in plans.items():
            for k in range(1, plan.count):
                lo = arrive(who, k - 1)
                if start[(who, k)] < lo:
                    start[(who, k)] = lo
                    changed = True
        if any(val > bound for val in start.values()):
            return None
        if not changed:
            break
    else:
        return None

    # Realized orders must match the hypothesis.
    for (ka, kb), first_a in zip(shared, orders):
        fw, fk = (0, ka) if first_a else (1, kb)
        sw, sk = (1, kb) if first_a else (0, ka)
        sec = a.steps[ka].dsec.section
        same_dir = a.steps[ka].dsec.direction == b.steps[kb].dsec.direction
        if sec in inter and enter(fw, fk) > enter(sw, sk):
            return None
        if same_dir:
            tf, ts = token(fw, fk), token(sw, sk)
            if tf is not None and ts is not None:
                if ts == "seeded" and tf != "seeded":
                    return None
                if tf != "seeded" and ts != "seeded" and tf > ts:
                    return None

    return max(arrive(0, a.count - 1), arrive(1, b.count - 1))


# ---------------------------------------------------------------------------
# Refinement oracle: exhaustive search over a discrete speed grid


def lattice_min_horizon(
    events,
    spec: RefinementSpec,
    traffic: CarTraffic,
    initial_speeds: dict[int, Fraction] | None = None,
    n_max: int = 20,
) -> tuple[int, RefinedPlan] | None:
    """Smallest feasible horizon over speeds restricted to multiples of the
    acceleration step, found by forward enumeration of reachable joint states.

    Intended for instances of at most two cars and short horizons; constraint
    checks are evaluated directly per step, independently of the constraint
    compiler and of the arithmetic solver.
    """
    if len(traffic.cars) > 2:
        raise ValueError("the lattice oracle handles at most two cars")
    initial_speeds = initial_speeds or {}
    quantum = spec.max_accel
    levels = spec.max_speed / quantum
    if levels.denominator != 1 or (spec.max_decel / quantum).denominator != 1:
        raise ValueError("lattice oracle needs speed bounds on the acceleration grid")
    levels = int(levels)
    down = int(spec.max_decel / quantum)

    cars = [c.index for c in traffic.cars]
    initials = {c.index: c.initial_offset for c in traffic.cars}
    goals = {c.index: c.goal_offset - c.initial_offset for c in traffic.cars}
    start_level = {}
    for c in cars:
        lvl = initial_speeds.get(c, Fraction(0)) / quantum
        if lvl.denominator != 1:
            raise ValueError("initial speed off the lattice")
        start_level[c] = int(lvl)

    components = [
        (e1, e2, e1.path_offset - initials[e1.car], e2.path_offset - initials[e2.car])
        for e1, e2 in order_components(events)
    ]
    windows, head_ons = gap_windows(events, traffic)
    deadlines = [
        (e.car, int(e.time.__floor__()) + spec.timing_slack,
         e.path_offset - initials[e.car])
        for e in events
        if e.kind == ENTER and e.path_offset - initials[e.car] > 0
    ]

    def ok_at(positions: dict[int, Fraction], k: int, n: int) -> bool:
        if k <= n - 2:
            for e1, e2, p1, p2 in components:
                if p1 <= 0:
                    continue
                if positions[e1.car] < p1 and not positions[e2.car] < p2:
                    return False
        for w in windows:
            la = positions[w.lead] + initials[w.lead]
            fa = positions[w.follow] + initials[w.follow]
            if w.lead_lo is None:
                gap = la - fa
            else:
                if not (w.lead_lo <= la < w.lead_hi
                        and w.follow_lo <= fa < w.follow_hi):
                    continue
                gap = (la - w.lead_shift) - (fa - w.follow_shift)
            if gap <= spec.safety_gap:
                return False
        for h in head_ons:
            fa = positions[h.first] + initials[h.first]
            sa = positions[h.second] + initials[h.second]
            if (h.first_enter <= fa < h.first_leave
                    and h.approach_lo <= sa < h.second_enter):
                if (h.first_leave - fa) + (h.second_enter - sa) <= spec.safety_gap:
                    return False
        for car, index, target in deadlines:
            if min(index, n) == k and positions[car] < target:
                return False
        return True

    for n in range(1, n_max + 1):
        # State: per car (position, previous speed level); parents for replay.
        init_state = tuple((Fraction(0), start_level[c]) for c in cars)
        if not ok_at({c: Fraction(0) for c in cars}, 0, n):
            continue
        layer = {init_state: None}
        layers = [layer]
        for k in range(n):
            nxt: dict = {}
            for state in layer:
                choices = []
                for (pos, lvl), c in zip(state, cars):
                    if k == 0:
                        opts = [start_level[c]]
                    else:
                        opts = range(max(0, lvl - down), min(levels, lvl + 1) + 1)
                    choices.append([(pos + quantum * l, l) for l in opts])
                if len(choices) == 1:
                    combos = [(a,) for a in choices[0]]
                else:
                    combos = [(a, b) for a in choices[0] for b in choices[1]]
                for combo in combos:
                    positions = {c: combo[i][0] for i, c in enumerate(cars)}
                    if not ok_at(positions, k + 1, n):
                        continue
                    key = tuple(combo)
                    if key not in nxt:
                        nxt[key] = state
            layer = nxt
            layers.append(layer)
            if not layer:
                break
        winners = [
            s for s in layer
            if all(s[i][0] >= goals[c] for i, c in enumerate(cars))
        ]
        if not winners:
            continue
        state = sorted(winners)[0]
        speeds: dict[int, list[Fraction]] = {c: [] for c in cars}
        for k in range(n, 0, -1):
            prev = layers[k][state]
            for i, c in enumerate(cars):
                speeds[c].append(state[i][0] - prev[i][0])
            state = prev
        for c in cars:
            speeds[c].reverse()
        plan = RefinedPlan(
            RefinementSpec(
                steps=n, max_speed=spec.max_speed, max_accel=spec.max_accel,
                max_decel=spec.max_decel, timing_slack=spec.timing_slack,
                safety_gap=spec.safety_gap, horizon_cap=spec.horizon_cap,
            ),
            speeds,
        )
        return n, plan
    return None
