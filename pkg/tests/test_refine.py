"""Refinement layer: events, constraint families, search, validation."""

import sys
from dataclasses import replace
from fractions import Fraction as F

import pytest

from roadsynth.backends import BuiltinSolver, SubprocessSolver
from roadsynth.corpus import small_instance
from roadsynth.network import (
    Car,
    CarTraffic,
    Direction,
    DirectedSection,
    Path,
    Section,
    running_example,
)
from roadsynth.oracles import lattice_min_horizon
from roadsynth.refine import (
    ENTER,
    LEAVE,
    RefinementSpec,
    build_constraints,
    emit_solver_text,
    extract_events,
    gap_windows,
    horizon_lower_bound,
    load_plan,
    order_components,
    save_plan,
    solve_refinement,
    trace_digest,
    validate_plan,
)
from roadsynth.search import SearchBudget, solve_time_optimal
from roadsynth.smt.text import parse_smtlib
from roadsynth.system import SwaSystem
from roadsynth.automata import traversal


def up(sec):
    return DirectedSection(sec, Direction.UP)


def solved(traffic):
    system = SwaSystem(traffic)
    best = solve_time_optimal(system, SearchBudget(max_nodes=300000, max_seconds=30))
    assert best.found
    return system, best


def single_car(lengths=(30, 30)):
    secs = [Section(f"n{i}", f"n{i+1}", F(l)) for i, l in enumerate(lengths)]
    path = Path(tuple(up(s) for s in secs))
    return CarTraffic([Car(1, path, F(0), path.length)])


def merge_traffic(eps=F(5)):
    s_ab, s_eb, s_bc = (Section("a", "b", F(30)), Section("e", "b", F(30)),
                        Section("b", "c", F(30)))
    p1, p2 = Path((up(s_ab), up(s_bc))), Path((up(s_eb), up(s_bc)))
    return CarTraffic([Car(1, p1, F(0), F(60)), Car(2, p2, F(0), F(60))],
                      security_distance=eps)


UNIT_SPEC = dict(max_speed=F(1), max_accel=F(1), max_decel=F(1),
                 timing_slack=4, safety_gap=F(5), horizon_cap=85)


class TestExtractEvents:
    def test_single_car_single_section(self):
        secs = [Section("a", "b", F(30))]
        path = Path((up(secs[0]),))
        t = CarTraffic([Car(1, path, F(0), F(30))])
        _, best = solved(t)
        events = extract_events(best.trace, t)
        assert [(e.kind, e.time, e.path_offset) for e in events] == [
            (ENTER, F(0), F(0)),
            (LEAVE, F(30), F(30)),
        ]

    def test_event_count_matches_traversals(self):
        t = running_example()
        _, best = solved(t)
        events = extract_events(best.trace, t)
        expected = sum(2 * len(traversal(c)) for c in t.cars)
        assert len(events) == expected

    def test_per_car_times_nondecreasing(self):
        t = merge_traffic()
        _, best = solved(t)
        events = extract_events(best.trace, t)
        for car in t.cars:
            times = [e.time for e in events if e.car == car.index]
            assert times == sorted(times)

    def test_invalid_trace_rejected(self):
        t = merge_traffic()
        _, best = solved(t)
        with pytest.raises(ValueError):
            extract_events(best.trace[:-2], t)


class TestBuildConstraints:
    def test_single_car_reduces_to_dynamics(self):
        t = single_car()
        _, best = solved(t)
        events = extract_events(best.trace, t)
        spec = RefinementSpec(steps=30, **UNIT_SPEC)
        cs = build_constraints(events, spec, t, {1: F(0)})
        assert cs.family_counts["d"] == 0
        assert cs.family_counts["e"] == 0
        n = 30
        assert cs.family_counts["a"] == 1
        assert cs.family_counts["b"] == 1 + 2 * (n - 1)
        assert cs.family_counts["c"] == 2 * n
        assert cs.family_counts["g"] == 1

    def test_var_count_is_cars_times_steps(self):
        t = merge_traffic()
        _, best = solved(t)
        events = extract_events(best.trace, t)
        cs = build_constraints(events, RefinementSpec(steps=40, **UNIT_SPEC), t)
        assert cs.var_count() == 2 * 40

    def test_full_pairs_counts_all_ordered_pairs(self):
        t = merge_traffic()
        _, best = solved(t)
        events = extract_events(best.trace, t)
        full = order_components(events, full_pairs=True)
        expected = 0
        for i, e1 in enumerate(events):
            for e2 in events[i + 1:]:
                if e1.car != e2.car and e1.time <= e2.time:
                    expected += 1
        assert len(full) == expected
        # The default scope is a subset, transitively equivalent.
        assert set(order_components(events)) <= set(full)

    def test_head_on_pairs_of_two_direction_intersection(self):
        # All ordered cross-direction car pairs through the shared section get
        # one clearance implication per timestep.
        t = running_example()
        _, best = solved(t)
        events = extract_events(best.trace, t)
        _, head_ons = gap_windows(events, t)
        pairs = {(h.first, h.second) for h in head_ons}
        assert len(pairs) == 9  # 3 cars down x 3 cars up
        firsts = {h.first for h in head_ons}
        assert firsts == {7, 8, 9}  # the opposite-direction train crosses first

    def test_deadline_indexes_clamped_to_horizon(self):
        t = single_car((30, 30))
        _, best = solved(t)
        events = extract_events(best.trace, t)
        spec = RefinementSpec(steps=5, **UNIT_SPEC)
        cs = build_constraints(events, spec, t, {1: F(0)})
        assert cs.family_counts["f"] == 1  # clamped to N, not an error


class TestEmitText:
    def test_round_trip_counts(self):
        t = merge_traffic()
        _, best = solved(t)
        events = extract_events(best.trace, t)
        cs = build_constraints(events, RefinementSpec(steps=20, **UNIT_SPEC), t)
        text = emit_solver_text(cs)
        back = parse_smtlib(text)
        assert len(back.units) == len(cs.problem.units)
        assert len(back.clauses) == len(cs.problem.clauses)
        assert sorted(back.variables) == sorted(cs.problem.variables)

    def test_speed_aliases_present(self):
        t = single_car((30,))
        _, best = solved(t)
        events = extract_events(best.trace, t)
        cs = build_constraints(events, RefinementSpec(steps=10, **UNIT_SPEC), t)
        text = emit_solver_text(cs)
        assert "(define-fun v_1_0 () Real" in text
        assert "(check-sat)" in text and "(get-value" in text

    def test_empty_like_document_is_satisfiable(self):
        from roadsynth.smt import Problem, solve_problem
        from roadsynth.smt.text import emit_smtlib

        text = emit_smtlib(Problem(variables=["z"]))
        assert solve_problem(parse_smtlib(text)).status == "sat"


class TestSolveRefinement:
    def test_single_car_sixty_needs_61_steps(self):
        # One step is lost accelerating from rest when top speed equals the
        # nominal speed and acceleration is one unit per step.
        t = single_car((30, 30))
        _, best = solved(t)
        spec = RefinementSpec(steps=1, **UNIT_SPEC)
        plan = solve_refinement(best.trace, spec, t, initial_speeds={1: F(0)})
        assert plan is not None and plan.steps == 61

    def test_zero_slack_with_weak_acceleration_unsat(self):
        t = single_car((10, 10))
        _, best = solved(t)
        spec = RefinementSpec(
            steps=1, max_speed=F(1), max_accel=F(1, 4), max_decel=F(1, 4),
            timing_slack=0, safety_gap=F(5), horizon_cap=40,
        )
        plan = solve_refinement(best.trace, spec, t, initial_speeds={1: F(0)})
        assert plan is None

    def test_dropping_timing_family_restores_feasibility(self):
        # Distinguishes slack infeasibility from dynamic infeasibility.
        t = single_car((10, 10))
        _, best = solved(t)
        events = extract_events(best.trace, t)
        spec = RefinementSpec(
            steps=30, max_speed=F(1), max_accel=F(1, 4), max_decel=F(1, 4),
            timing_slack=0, safety_gap=F(5), horizon_cap=40,
        )
        from roadsynth.smt import solve_problem
        with_f = build_constraints(events, spec, t, {1: F(0)})
        assert solve_problem(with_f.problem).status == "unsat"
        without_f = build_constraints(events, spec, t, {1: F(0)}, drop_families={"f"})
        assert solve_problem(without_f.problem).status == "sat"

    def test_plan_respects_event_order(self):
        t = merge_traffic()
        _, best = solved(t)
        events = extract_events(best.trace, t)
        plan = solve_refinement(
            best.trace, RefinementSpec(steps=1, **UNIT_SPEC), t,
            initial_speeds={1: F(0), 2: F(0)},
        )
        assert plan is not None
        pos = {c: plan.positions(c) for c in plan.speeds}
        cars = {c.index: c for c in t.cars}

        def crossing(car, offset):
            rel = offset - cars[car].initial_offset
            return next(k for k, p in enumerate(pos[car]) if p >= rel)

        for e1, e2 in order_components(events):
            p1 = e1.path_offset - cars[e1.car].initial_offset
            if p1 <= 0:
                continue
            assert crossing(e1.car, e1.path_offset) <= crossing(e2.car, e2.path_offset)

    def test_monotone_in_slack(self):
        t = merge_traffic()
        _, best = solved(t)
        events = extract_events(best.trace, t)
        base = RefinementSpec(steps=1, **UNIT_SPEC)
        plan = solve_refinement(best.trace, base, t, initial_speeds={1: F(0), 2: F(0)})
        assert plan is not None
        from roadsynth.smt import solve_problem
        for extra in (1, 3):
            looser = replace(plan.spec, timing_slack=base.timing_slack + extra)
            cs = build_constraints(events, looser, t, {1: F(0), 2: F(0)})
            assert solve_problem(cs.problem).status == "sat"

    def test_subprocess_solver_matches_builtin(self):
        t = single_car((10,))
        _, best = solved(t)
        spec = RefinementSpec(steps=1, **UNIT_SPEC)
        ext = SubprocessSolver([sys.executable, "-m", "roadsynth.smt.server"])
        a = solve_refinement(best.trace, spec, t, solver=ext, initial_speeds={1: F(0)})
        b = solve_refinement(best.trace, spec, t, solver=BuiltinSolver(),
                             initial_speeds={1: F(0)})
        assert a is not None and b is not None and a.steps == b.steps

    def test_cap_short_circuits(self):
        t = single_car((30, 30))
        _, best = solved(t)
        spec = RefinementSpec(steps=1, **{**UNIT_SPEC, "horizon_cap": 10})
        assert solve_refinement(best.trace, spec, t, initial_speeds={1: F(0)}) is None


class TestValidatePlan:
    def make_plan(self):
        t = merge_traffic()
        _, best = solved(t)
        events = extract_events(best.trace, t)
        plan = solve_refinement(
            best.trace, RefinementSpec(steps=1, **UNIT_SPEC), t,
            initial_speeds={1: F(0), 2: F(0)},
        )
        return t, events, plan

    def test_valid_plan_passes(self):
        t, events, plan = self.make_plan()
        assert validate_plan(plan, events, plan.spec, t, {1: F(0), 2: F(0)})

    def test_speed_above_cap_fails(self):
        t, events, plan = self.make_plan()
        plan.speeds[1][5] = plan.spec.max_speed * 2
        res = validate_plan(plan, events, plan.spec, t, {1: F(0), 2: F(0)})
        assert not res and ("speed" in res.reason or "acceleration" in res.reason)

    def test_swapped_cars_fail_gap_or_order(self):
        t, events, plan = self.make_plan()
        plan.speeds = {1: list(plan.speeds[2]), 2: list(plan.speeds[1])}
        res = validate_plan(plan, events, plan.spec, t, {1: F(0), 2: F(0)})
        assert not res

    def test_goal_shortfall_fails(self):
        t, events, plan = self.make_plan()
        plan.speeds = {c: [v * F(9, 10) for v in row] for c, row in plan.speeds.items()}
        res = validate_plan(plan, events, plan.spec, t, {1: F(0), 2: F(0)})
        assert not res


class TestLatticeOracle:
    def test_minimal_horizon_agreement(self):
        checked = 0
        for seed in range(0, 40):
            traffic = small_instance(seed, lattice_friendly=True)
            system = SwaSystem(traffic)
            best = solve_time_optimal(system, SearchBudget(max_nodes=300000,
                                                           max_seconds=10))
            if not best.found:
                continue
            spec = RefinementSpec(
                steps=1, max_speed=F(1), max_accel=F(1), max_decel=F(1),
                timing_slack=4, safety_gap=F(2), horizon_cap=25,
            )
            speeds0 = {c.index: F(0) for c in traffic.cars}
            events = extract_events(best.trace, traffic)
            plan = solve_refinement(best.trace, spec, traffic, initial_speeds=speeds0)
            oracle = lattice_min_horizon(events, spec, traffic, speeds0, n_max=25)
            n_solver = plan.steps if plan else None
            n_oracle = oracle[0] if oracle else None
            assert n_solver == n_oracle, f"seed {seed}"
            if oracle is not None:
                ok = validate_plan(oracle[1], events, oracle[1].spec, traffic, speeds0)
                assert ok, f"oracle plan invalid on seed {seed}: {ok.reason}"
            checked += 1
        assert checked >= 15


class TestPlanFiles:
    def test_round_trip(self, tmp_path):
        t, events, plan = TestValidatePlan().make_plan()
        _, best = solved(t)
        f = tmp_path / "plan.json"
        save_plan(f, plan, t, trace_sha=trace_digest(best.trace))
        again = load_plan(f, t)
        assert again.speeds == plan.speeds
        assert again.spec == plan.spec

    def test_foreign_instance_rejected(self, tmp_path):
        t, events, plan = TestValidatePlan().make_plan()
        f = tmp_path / "plan.json"
        save_plan(f, plan, t)
        other = single_car()
        with pytest.raises(ValueError):
            load_plan(f, other)


class TestLowerBound:
    def test_never_exceeds_minimum(self):
        for seed in range(0, 30):
            traffic = small_instance(seed, lattice_friendly=True)
            best = solve_time_optimal(SwaSystem(traffic),
                                      SearchBudget(max_nodes=300000, max_seconds=10))
            if not best.found:
                continue
            spec = RefinementSpec(
                steps=1, max_speed=F(1), max_accel=F(1), max_decel=F(1),
                timing_slack=4, safety_gap=F(2), horizon_cap=25,
            )
            speeds0 = {c.index: F(0) for c in traffic.cars}
            events = extract_events(best.trace, traffic)
            lb = horizon_lower_bound(events, spec, traffic, speeds0)
            plan = solve_refinement(best.trace, spec, traffic, initial_speeds=speeds0)
            if plan is not None:
                assert lb <= plan.steps
