"""Product semantics: successors, delays, channels, replay validation."""

from fractions import Fraction as F

import pytest

from roadsynth.network import (
    Car,
    CarTraffic,
    Direction,
    DirectedSection,
    Path,
    Section,
    running_example,
    random_instance,
)
from roadsynth.search import SearchBudget, solve_time_optimal
from roadsynth.system import (
    SwaSystem,
    TraceEdge,
    TraceEvent,
    load_trace,
    min_glob_time,
    save_trace,
    subsumes,
)


def up(sec):
    return DirectedSection(sec, Direction.UP)


def down(sec):
    return DirectedSection(sec, Direction.DOWN)


def single_car_system(length=30, sections=1):
    secs = [Section(f"n{i}", f"n{i+1}", F(length)) for i in range(sections)]
    path = Path(tuple(up(s) for s in secs))
    t = CarTraffic([Car(1, path, F(0), path.length)])
    return SwaSystem(t)


def merge_system(eps=F(5)):
    """Two cars joining the same 30-section through node b."""
    s_ab = Section("a", "b", F(30))
    s_eb = Section("e", "b", F(30))
    s_bc = Section("b", "c", F(30))
    p1 = Path((up(s_ab), up(s_bc)))
    p2 = Path((up(s_eb), up(s_bc)))
    t = CarTraffic(
        [Car(1, p1, F(0), F(60)), Car(2, p2, F(0), F(60))], security_distance=eps
    )
    return SwaSystem(t)


def drain(system, state):
    out = []
    probe = system.succ(state, None)
    while probe is not None:
        (child, event), cursor = probe
        out.append((child, event))
        probe = system.succ(state, cursor)
    return out


class TestSucc:
    def test_single_car_unique_successor_chain(self):
        sys_ = single_car_system()
        succs = drain(sys_, sys_.initial)
        assert len(succs) == 1  # only the initial pop
        state, _ = succs[0]
        succs2 = drain(sys_, state)
        assert len(succs2) == 1  # the arrival, after delay 30
        arrived, _ = succs2[0]
        assert min_glob_time(sys_, arrived) == F(30)
        assert sys_.is_final(arrived)

    def test_two_car_initial_successors(self):
        # Hand count: both cars may pop now; nothing else is pending.
        sys_ = merge_system()
        succs = drain(sys_, sys_.initial)
        assert len(succs) == 2

    def test_anticipatory_pop_appears_after_departure(self):
        # Once car 1 rolls toward the shared entry, car 2 gains the pop timed
        # to arrive exactly eps behind it (delay 5 here), besides popping now.
        sys_ = merge_system()
        first = next(
            child for child, ev in drain(sys_, sys_.initial)
            if ev.edges[0].automaton == "car1"
        )
        succs = drain(sys_, first)
        car2_pops = [
            (min_glob_time(sys_, child))
            for child, ev in succs
            if ev.edges[0].automaton == "car2"
        ]
        assert car2_pops == [F(0), F(5)]

    def test_enumeration_is_deterministic(self):
        sys_ = merge_system()
        a = [e.edges for _, e in drain(sys_, sys_.initial)]
        b = [e.edges for _, e in drain(sys_, sys_.initial)]
        assert a == b

    def test_dead_state_has_no_successors(self):
        # A mid-section car arriving at a blocked intersection is stuck.
        s_ab = Section("a", "b", F(30))
        s_eb = Section("e", "b", F(30))
        s_bc = Section("b", "c", F(30))
        p1 = Path((up(s_ab), up(s_bc)))
        p2 = Path((up(s_eb), up(s_bc)))
        # Both cars mid-section, arriving at b 1 apart with eps=5: doomed.
        t = CarTraffic(
            [Car(1, p1, F(10), F(60)), Car(2, p2, F(9), F(60))],
            security_distance=F(5),
        )
        sys_ = SwaSystem(t)
        assert sys_.is_doomed(sys_.initial)

    def test_delays_freeze_waiting_clocks(self):
        sys_ = merge_system()
        # Pop car 1, then let it arrive: car 2 waited throughout, its clock
        # (progress) must still equal its initial offset.
        state = sys_.initial
        state = next(c for c, e in drain(sys_, state) if e.edges[0].automaton == "car1")
        state = next(
            c for c, e in drain(sys_, state)
            if e.edges[0].transition_id.startswith("driving")
        )
        vals = sys_.valuation_of(state)
        assert vals["x_car2"] == F(0)
        assert vals["x_car1"] == F(30)
        assert vals["t"] == F(30)


class TestSubsumes:
    def test_reflexive(self):
        sys_ = merge_system()
        assert subsumes(sys_.initial, sys_.initial)

    def test_slower_subsumed_by_faster(self):
        sys_ = merge_system()
        slow = sys_.initial._replace(time=12)
        fast = sys_.initial._replace(time=10)
        assert subsumes(slow, fast)
        assert not subsumes(fast, slow)

    def test_channel_difference_blocks(self):
        sys_ = merge_system()
        a = sys_.initial
        chans = list(a.channels)
        chans[0] = chans[0] + (2,)
        b = a._replace(channels=tuple(chans))
        assert not subsumes(a, b) and not subsumes(b, a)


class TestValidateTrace:
    def test_solver_trace_validates(self):
        sys_ = merge_system()
        best = solve_time_optimal(sys_)
        assert best.found
        assert sys_.validate_trace(best.trace)

    def test_proper_prefix_rejected(self):
        sys_ = merge_system()
        best = solve_time_optimal(sys_)
        res = sys_.validate_trace(best.trace[:-1])
        assert not res
        assert "before all cars reach" in res.reason

    def test_swapped_pop_order_gets_fifo_diagnostic(self):
        sys_ = merge_system()
        best = solve_time_optimal(sys_)
        trace = list(best.trace)
        pops = [
            n for n, ev in enumerate(trace)
            if ev.edges[0].chan_op and ev.edges[0].chan_op.startswith("pop n1")
            or (ev.edges[0].chan_op and "pop b>c" in ev.edges[0].chan_op)
        ]
        assert len(pops) == 2
        a, b = pops
        trace[a], trace[b] = (
            TraceEvent(trace[a].time, trace[b].edges),
            TraceEvent(trace[b].time, trace[a].edges),
        )
        res = sys_.validate_trace(trace)
        assert not res
        assert "FIFO" in res.reason or "not enabled" in res.reason

    def test_offgrid_timestamp_rejected(self):
        sys_ = merge_system()
        best = solve_time_optimal(sys_)
        trace = list(best.trace)
        trace[0] = TraceEvent(trace[0].time + F(1, 7), trace[0].edges)
        res = sys_.validate_trace(trace)
        assert not res

    def test_time_regression_rejected(self):
        sys_ = merge_system()
        best = solve_time_optimal(sys_)
        trace = list(best.trace)
        trace[-1] = TraceEvent(F(0), trace[-1].edges)
        res = sys_.validate_trace(trace)
        assert not res


class TestTraceProperties:
    def golden(self):
        sys_ = SwaSystem(running_example())
        best = solve_time_optimal(sys_, SearchBudget(max_nodes=300000, max_seconds=60))
        assert best.found and best.optimal
        return sys_, best

    def test_running_example_optimum_and_validity(self):
        sys_, best = self.golden()
        assert best.time == F(295, 2)
        assert sys_.validate_trace(best.trace)

    def test_timestamps_monotone(self):
        _, best = self.golden()
        times = [ev.time for ev in best.trace]
        assert all(a <= b for a, b in zip(times, times[1:]))

    def test_intersection_spacing(self):
        sys_, best = self.golden()
        eps = sys_.traffic.epsilon
        for sec in sys_.inter_sections:
            entries = sys_.entry_events(best.trace)[sec.key]
            for (t1, d1, _), (t2, d2, _) in zip(entries, entries[1:]):
                if d1 == d2:
                    assert t2 - t1 >= eps
                else:
                    assert t2 - t1 >= sec.length + eps

    def test_fifo_no_overtake(self):
        sys_, best = self.golden()
        pushes: dict[str, list[int]] = {}
        pops: dict[str, list[int]] = {}
        for i, chan in enumerate(sys_.chan_names):
            content = sys_.initial.channels[i]
            if content:
                pushes[chan] = list(content)
        for ev in best.trace:
            for edge in ev.edges:
                if edge.chan_op:
                    op, chan, sym = edge.chan_op.split()
                    if op == "push":
                        pushes.setdefault(chan, []).append(int(sym))
                    else:
                        pops.setdefault(chan, []).append(int(sym))
        for chan, popped in pops.items():
            assert popped == pushes[chan][: len(popped)]

    def test_trace_file_round_trip(self, tmp_path):
        sys_, best = self.golden()
        f = tmp_path / "trace.jsonl"
        save_trace(f, sys_, best.trace, {"optimal_time": str(best.time)})
        header, loaded = load_trace(f, sys_)
        assert header["optimal_time"] == str(best.time)
        assert loaded == best.trace
        assert sys_.validate_trace(loaded)

    def test_trace_file_rejects_foreign_instance(self, tmp_path):
        sys_, best = self.golden()
        f = tmp_path / "trace.jsonl"
        save_trace(f, sys_, best.trace)
        other = SwaSystem(random_instance(3)[0])
        with pytest.raises(ValueError):
            load_trace(f, other)


class TestInitialState:
    def test_mid_section_car_occupies_intersection(self):
        s_ab = Section("a", "b", F(30))
        s_eb = Section("e", "b", F(30))
        s_bc = Section("b", "c", F(30))
        p1 = Path((up(s_ab), up(s_bc)))
        p2 = Path((up(s_eb), up(s_bc)))
        t = CarTraffic(
            [Car(1, p1, F(32), F(60)), Car(2, p2, F(0), F(60))],
            security_distance=F(5),
        )
        sys_ = SwaSystem(t)
        locs = sys_.locations_of(sys_.initial)
        # Car 1 is 2 into the shared section: blocked (2 < eps), timer at 2.
        assert locs["inter[b-c]"] == "blocked[up]"
        assert sys_.valuation_of(sys_.initial)["x_b-c"] == F(2)

    def test_both_directions_inside_rejected(self):
        s_ab = Section("a", "b", F(30))
        s_bc = Section("b", "c", F(30))
        s_dc = Section("d", "c", F(30))
        p1 = Path((up(s_ab), up(s_bc)))
        p2 = Path((up(s_dc), down(s_bc)))
        t = CarTraffic([Car(1, p1, F(40), F(60)), Car(2, p2, F(40), F(60))])
        with pytest.raises(ValueError):
            SwaSystem(t)

    def test_boundary_cars_wait_with_seeded_tokens(self):
        sys_ = merge_system()
        locs = sys_.locations_of(sys_.initial)
        assert locs["car1"] == "wait[a>b]"
        chan = sys_.chan_pos["a>b"]
        assert sys_.initial.channels[chan] == (1,)
