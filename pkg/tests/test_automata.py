"""Construction of car and intersection automata; the initialized condition."""

from fractions import Fraction as F

import pytest

from roadsynth.automata import (
    Clock,
    ClockKind,
    Guard,
    GuardAtom,
    Location,
    SwaAutomaton,
    Transition,
    build_car_automaton,
    build_channels,
    build_intersection_automaton,
    is_initialized,
    traversal,
)
from roadsynth.network import (
    Car,
    CarTraffic,
    Direction,
    DirectedSection,
    Path,
    Section,
    intersections,
    running_example,
)


def up(sec):
    return DirectedSection(sec, Direction.UP)


def down(sec):
    return DirectedSection(sec, Direction.DOWN)


class TestCarAutomaton:
    def test_single_section_path(self):
        s = Section("a", "b", F(30))
        t = CarTraffic([Car(1, Path((up(s),)), F(0), F(30))])
        a = build_car_automaton(t.car(1), t)
        # Boundary start: wait, driving, arrived for the only section.
        assert set(a.locations) == {"wait[a>b]", "driving[a>b]", "arrived[a>b]"}
        assert a.initial == "wait[a>b]"
        assert a.goal == "arrived[a>b]"

    def test_mid_section_start_begins_driving(self):
        s = Section("a", "b", F(30))
        t = CarTraffic([Car(1, Path((up(s),)), F(10), F(30))])
        a = build_car_automaton(t.car(1), t)
        assert a.initial == "driving[a>b]"
        assert "wait[a>b]" not in a.locations

    def test_guard_constants_are_cumulative_offsets(self):
        t = running_example()
        a = build_car_automaton(t.car(2), t)
        # Car 2 starts at offset 10; its driving guards must be the cumulative
        # path offsets of each traversed section end.
        ends = [st.end for st in traversal(t.car(2))]
        got = [
            tr.guard.atoms[0].value
            for tr in a.transitions
            if tr.id.startswith("driving[")
        ]
        assert got == ends
        assert got[0] == F(20) and got[-1] == t.car(2).goal_offset

    def test_wait_locations_freeze_the_progress_clock(self):
        t = running_example()
        a = build_car_automaton(t.car(1), t)
        clock = next(c for c in a.clocks.values() if c.kind == ClockKind.CAR)
        for loc in a.locations.values():
            if loc.id.startswith("wait["):
                assert clock.id in loc.stopped
            else:
                assert loc.stopped == frozenset()

    def test_pushes_target_successor_channel(self):
        t = running_example()
        a = build_car_automaton(t.car(1), t)
        steps = traversal(t.car(1))
        for k, st in enumerate(steps[:-1]):
            edge = a.transition(f"driving[{st.dsec.key}]->arrived[{st.dsec.key}]")
            assert edge.chan_op.kind == "push"
            assert edge.chan_op.channel == steps[k + 1].dsec.key

    def test_sync_only_at_intersections(self):
        t = running_example()
        inter = {s.key for s in intersections(t)}
        for car in t.cars:
            a = build_car_automaton(car, t)
            for tr in a.transitions:
                if tr.sync is not None:
                    target = tr.target[len("wait["):-1]
                    base = target.split(">")
                    assert any(
                        sec_key in inter
                        for sec_key in (f"{base[0]}-{base[1]}", f"{base[1]}-{base[0]}")
                    )

    def test_all_running_example_cars_initialized(self):
        t = running_example()
        for car in t.cars:
            assert is_initialized(build_car_automaton(car, t))

    def test_foreign_car_rejected(self):
        t = running_example()
        s = Section("z1", "z2", F(5))
        stranger = Car(99, Path((up(s),)), F(0), F(5))
        with pytest.raises(ValueError):
            build_car_automaton(stranger, t)


class TestIntersectionAutomaton:
    def make_merge(self):
        s_ab = Section("a", "b", F(30))
        s_eb = Section("e", "b", F(30))
        s_bc = Section("b", "c", F(30))
        p1 = Path((up(s_ab), up(s_bc)))
        p2 = Path((up(s_eb), up(s_bc)))
        t = CarTraffic([Car(1, p1, F(0), F(60)), Car(2, p2, F(0), F(60))])
        return t, s_bc

    def test_one_direction_shape(self):
        # Two same-direction cars: free/blocked/semifree and six transitions.
        t, sec = self.make_merge()
        a = build_intersection_automaton(sec, t)
        assert len(a.locations) == 3
        assert len(a.transitions) == 6
        assert is_initialized(a)

    def test_two_direction_shape(self):
        t = running_example()
        sec = next(s for s in intersections(t) if s.key == "n4-n6")
        a = build_intersection_automaton(sec, t)
        assert len(a.locations) == 5

    def test_entry_resets_timer(self):
        t, sec = self.make_merge()
        a = build_intersection_automaton(sec, t)
        clock = next(c for c in a.clocks.values() if c.kind == ClockKind.INTERSECTION)
        for tr in a.transitions:
            if tr.sync is not None:
                assert clock.id in tr.resets

    def test_timer_guards(self):
        t, sec = self.make_merge()
        a = build_intersection_automaton(sec, t)
        eps = t.epsilon
        opens = [tr for tr in a.transitions if tr.id.startswith("blocked")]
        clears = [tr for tr in a.transitions if tr.id.startswith("semifree") and
                  tr.target == "free"]
        assert opens[0].guard.atoms[0].value == eps
        assert clears[0].guard.atoms[0].value == sec.length + eps

    def test_non_intersection_rejected(self):
        t, _ = self.make_merge()
        lonely = next(s for s in t.sections() if s.key == "a-b")
        with pytest.raises(ValueError):
            build_intersection_automaton(lonely, t)

    def test_all_running_example_intersections_initialized(self):
        t = running_example()
        for sec in intersections(t):
            assert is_initialized(build_intersection_automaton(sec, t))


class TestIsInitialized:
    def test_detects_unreset_stopwatch_change(self):
        clock = "x"
        locs = {
            "p": Location("p", "m", frozenset({clock})),
            "q": Location("q", "m"),
        }
        bad = SwaAutomaton(
            name="m",
            locations=locs,
            initial="p",
            clocks={clock: Clock(clock, ClockKind.CAR)},
            transitions=[Transition("p->q", "p", Guard(), "go", "q")],
        )
        assert not is_initialized(bad)

    def test_accepts_equality_pin(self):
        clock = "x"
        locs = {
            "p": Location("p", "m", frozenset({clock})),
            "q": Location("q", "m"),
        }
        pinned = SwaAutomaton(
            name="m",
            locations=locs,
            initial="p",
            clocks={clock: Clock(clock, ClockKind.CAR)},
            transitions=[
                Transition("p->q", "p", Guard((GuardAtom(clock, "=", F(3)),)), "go", "q")
            ],
        )
        assert is_initialized(pinned)

    def test_accepts_explicit_reset(self):
        clock = "x"
        locs = {
            "p": Location("p", "m", frozenset({clock})),
            "q": Location("q", "m"),
        }
        reset = SwaAutomaton(
            name="m",
            locations=locs,
            initial="p",
            clocks={clock: Clock(clock, ClockKind.CAR)},
            transitions=[
                Transition("p->q", "p", Guard(), "go", "q", resets=frozenset({clock}))
            ],
        )
        assert is_initialized(reset)


class TestChannels:
    def test_capacity_counts_routed_cars(self):
        t = running_example()
        chans = build_channels(t)
        # All six cars of paths P0/P1 announce on the shared n1>n3 section.
        assert chans["n1>n3"].capacity == 6
        # Only the first car of P0 traverses the initial stub.
        assert chans["n0>n0'"].capacity == 1

    def test_opposite_directions_have_distinct_channels(self):
        t = running_example()
        chans = build_channels(t)
        assert "n4>n6" in chans and "n6>n4" in chans

    def test_global_clock_never_stopped(self):
        with pytest.raises(ValueError):
            Location("w", "m", frozenset({"t"}))
