"""Synchronized product of the car and intersection automata with FIFO channels.

States are point valuations (all guards are equalities, so zones collapse to
single points); clock values and the global time are kept as integers in a
common scale so every comparison is exact.  Successor enumeration is lazy,
deterministic, and restricted to the event grid: a delay candidate never jumps
past a pending equality deadline, because doing so strands that automaton
forever (there are no invariants to force progress, so an overshot guard is
simply dead).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Iterator, NamedTuple

from .automata import (
    Channel,
    SwaAutomaton,
    TraversalStep,
    arrived_loc,
    blocked_loc,
    build_car_automaton,
    build_channels,
    build_intersection_automaton,
    car_clock_id,
    channel_id,
    driving_loc,
    entry_sync_label,
    intersection_clock_id,
    semifree_loc,
    traversal,
    wait_loc,
    FREE,
)
from .network import CarTraffic, Direction, intersections

WAIT, DRIVING, ARRIVED = 0, 1, 2


def _replace(tup: tuple, index: int, value) -> tuple:
    return tup[:index] + (value,) + tup[index + 1:]

# Intersection location codes.
I_FREE = 0
I_BLOCKED = {Direction.UP: 1, Direction.DOWN: 3}
I_SEMIFREE = {Direction.UP: 2, Direction.DOWN: 4}


class SystemState(NamedTuple):
    """One configuration: a location per automaton, all clocks, channels, time.

    ``car_locs[i]`` is ``3*k + phase`` for traversal step k; clocks and time
    are integers in the system's common scale.
    """

    car_locs: tuple[int, ...]
    car_clocks: tuple[int, ...]
    inter_locs: tuple[int, ...]
    inter_clocks: tuple[int, ...]
    channels: tuple[tuple[int, ...], ...]
    time: int

    def config_key(self):
        """Everything except the global time; the subsumption index key."""
        return (self.car_locs, self.car_clocks, self.inter_locs,
                self.inter_clocks, self.channels)


@dataclass(frozen=True)
class TraceEdge:
    automaton: str
    transition_id: str
    chan_op: str | None = None


@dataclass(frozen=True)
class TraceEvent:
    time: Fraction
    edges: tuple[TraceEdge, ...]


Trace = list  # list[TraceEvent]


@dataclass
class ValidationResult:
    ok: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class _CarStep:
    dsec_key: str
    start: int              # scaled time guard for entering the section
    end: int                # scaled time guard for reaching its far end / goal
    chan: int               # channel index of this directed section (-1 if none)
    next_chan: int          # channel pushed when arriving (-1 on the last step)
    next_inter: int         # intersection index synced when advancing (-1 if none)
    next_dir: Direction | None


class SwaSystem:
    """Compiled product system for one traffic instance."""

    def __init__(self, traffic: CarTraffic):
        self.traffic = traffic
        self.cars = list(traffic.cars)
        self.car_index = {c.index: i for i, c in enumerate(self.cars)}
        self.inter_sections = sorted(intersections(traffic), key=lambda s: s.key)
        self.inter_pos = {s: i for i, s in enumerate(self.inter_sections)}

        self.car_automata = {c.index: build_car_automaton(c, traffic) for c in self.cars}
        self.inter_automata = {
            s.key: build_intersection_automaton(s, traffic) for s in self.inter_sections
        }
        self.channels: dict[str, Channel] = build_channels(traffic)
        self.chan_names = sorted(self.channels)
        self.chan_pos = {name: i for i, name in enumerate(self.chan_names)}

        v = traffic.nominal_speed
        constants: list[Fraction] = [traffic.epsilon]
        traversals = {c.index: traversal(c) for c in self.cars}
        for c in self.cars:
            for st in traversals[c.index]:
                constants += [st.start / v, st.end / v]
        for s in self.inter_sections:
            constants += [traffic.epsilon, s.length + traffic.epsilon]
        self.scale = lcm(*[f.denominator for f in constants], 1)

        self._car_steps: list[list[_CarStep]] = []
        for c in self.cars:
            steps = []
            trav = traversals[c.index]
            for k, st in enumerate(trav):
                nxt = trav[k + 1] if k + 1 < len(trav) else None
                next_inter = -1
                if nxt is not None and nxt.dsec.section in self.inter_pos:
                    next_inter = self.inter_pos[nxt.dsec.section]
                steps.append(_CarStep(
                    dsec_key=st.dsec.key,
                    start=self._scaled(st.start / v),
                    end=self._scaled(st.end / v),
                    chan=self.chan_pos.get(channel_id(st.dsec), -1),
                    next_chan=self.chan_pos.get(channel_id(nxt.dsec), -1) if nxt else -1,
                    next_inter=next_inter,
                    next_dir=nxt.dsec.direction if nxt else None,
                ))
            self._car_steps.append(steps)

        eps = traffic.epsilon
        self._inter_eps = self._scaled(eps)
        self._inter_clear = [self._scaled(s.length + eps) for s in self.inter_sections]

        self.initial = self._initial_state()

    # -- scaling helpers ---------------------------------------------------

    def _scaled(self, value: Fraction) -> int:
        out = value * self.scale
        assert out.denominator == 1
        return int(out)

    def to_time(self, scaled: int) -> Fraction:
        return Fraction(scaled, self.scale)

    # -- initial state -----------------------------------------------------

    def _initial_state(self) -> SystemState:
        v = self.traffic.nominal_speed
        car_locs, car_clocks = [], []
        seeded: dict[int, tuple[int, ...]] = {}
        occupants: dict[int, list[tuple[Fraction, Direction]]] = {}
        for i, car in enumerate(self.cars):
            k, rel = car.path.locate(car.initial_offset)
            if rel == 0:
                # At rest on the section boundary: waiting, token pre-seeded.
                car_locs.append(0 * 3 + WAIT)
                chan = self._car_steps[i][0].chan
                seeded[chan] = seeded.get(chan, ()) + (car.index,)
            else:
                car_locs.append(0 * 3 + DRIVING)
            car_clocks.append(self._scaled(car.initial_offset / v))
            sec = car.path.steps[k].section
            if sec in self.inter_pos:
                occupants.setdefault(self.inter_pos[sec], []).append(
                    (rel / v, car.path.steps[k].direction)
                )
        inter_locs, inter_clocks = [], []
        for idx, sec in enumerate(self.inter_sections):
            inside = occupants.get(idx, [])
            if not inside:
                inter_locs.append(I_FREE)
                inter_clocks.append(0)
                continue
            directions = {d for _, d in inside}
            if len(directions) > 1:
                raise ValueError(
                    f"intersection {sec.key} initially occupied in both directions"
                )
            direction = directions.pop()
            last_entry_age = min(pen for pen, _ in inside)
            scaled_age = self._scaled(last_entry_age)
            if scaled_age < self._inter_eps:
                inter_locs.append(I_BLOCKED[direction])
            else:
                inter_locs.append(I_SEMIFREE[direction])
            inter_clocks.append(scaled_age)
        return SystemState(
            tuple(car_locs), tuple(car_clocks),
            tuple(inter_locs), tuple(inter_clocks),
            tuple(seeded.get(c, ()) for c in range(len(self.chan_names))), 0,
        )

    # -- inspection helpers ------------------------------------------------

    def car_phase(self, state: SystemState, i: int) -> tuple[int, int]:
        code = state.car_locs[i]
        return code // 3, code % 3

    def car_done(self, state: SystemState, i: int) -> bool:
        k, phase = self.car_phase(state, i)
        return phase == ARRIVED and k == len(self._car_steps[i]) - 1

    def is_final(self, state: SystemState) -> bool:
        return all(self.car_done(state, i) for i in range(len(self.cars)))

    def locations_of(self, state: SystemState) -> dict[str, str]:
        out = {}
        for i, car in enumerate(self.cars):
            k, phase = self.car_phase(state, i)
            key = self._car_steps[i][k].dsec_key
            name = {WAIT: f"wait[{key}]", DRIVING: f"driving[{key}]",
                    ARRIVED: f"arrived[{key}]"}[phase]
            out[f"car{car.index}"] = name
        for idx, sec in enumerate(self.inter_sections):
            code = state.inter_locs[idx]
            if code == I_FREE:
                name = FREE
            else:
                for d in (Direction.UP, Direction.DOWN):
                    if code == I_BLOCKED[d]:
                        name = blocked_loc(d)
                    elif code == I_SEMIFREE[d]:
                        name = semifree_loc(d)
            out[f"inter[{sec.key}]"] = name
        return out

    def valuation_of(self, state: SystemState) -> dict[str, Fraction]:
        out = {"t": self.to_time(state.time)}
        for i, car in enumerate(self.cars):
            out[car_clock_id(car.index)] = self.to_time(state.car_clocks[i])
        for idx, sec in enumerate(self.inter_sections):
            out[intersection_clock_id(sec)] = self.to_time(state.inter_clocks[idx])
        return out

    def progress_of(self, state: SystemState, i: int) -> Fraction:
        """Absolute path offset of car number i (list position, not car index)."""
        return self.to_time(state.car_clocks[i]) * self.traffic.nominal_speed

    # -- successor enumeration ----------------------------------------------

    def _admission_wait(self, state: SystemState, idx: int, direction) -> int:
        """Scaled delay until intersection idx could next admit *direction*,
        judging from its current state alone (further entries only delay it)."""
        code = state.inter_locs[idx]
        if code == I_FREE or code == I_SEMIFREE[direction]:
            return 0
        if code == I_BLOCKED[direction]:
            return self._inter_eps - state.inter_clocks[idx]
        return self._inter_clear[idx] - state.inter_clocks[idx]

    def _candidates(self, state: SystemState):
        """Ordered viable moves: (delay, kind, actor) triples.

        kinds: 0 pop, 1 arrive, 2 advance (car, ascending index), then
        3 open, 4 clear (intersection timers, ascending section key).
        A move's delay never exceeds the smallest pending equality deadline:
        delaying past one strands that automaton forever.  A car stuck in a
        transient arrival (entry currently refused) dies unless its target
        intersection changes at this very instant, so such states only offer
        the zero-delay timer events that could admit it.

        Waiting cars offer, besides the immediate pop, anticipatory pops that
        time their (transient) entry into the next intersection to land
        exactly on an admission boundary: the intersection's own spacing
        timer, or the mandatory gap behind a car already rolling toward it.
        Optimal schedules only ever need those instants or other events'
        instants, both of which are enumerated here.
        """
        deadlines = []
        stuck_inters: set[int] = set()
        for i in range(len(self.cars)):
            k, phase = self.car_phase(state, i)
            if phase == DRIVING:
                deadlines.append(self._car_steps[i][k].end - state.car_clocks[i])
            elif phase == ARRIVED and k < len(self._car_steps[i]) - 1:
                deadlines.append(0)
                step = self._car_steps[i][k]
                if step.next_inter >= 0:
                    code = state.inter_locs[step.next_inter]
                    if not (code == I_FREE or code == I_SEMIFREE[step.next_dir]):
                        stuck_inters.add(step.next_inter)
        timer_delay: dict[int, tuple[int, int]] = {}
        for idx in range(len(self.inter_sections)):
            code = state.inter_locs[idx]
            if code == I_FREE:
                continue
            if code in (I_BLOCKED[Direction.UP], I_BLOCKED[Direction.DOWN]):
                delay, kind = self._inter_eps - state.inter_clocks[idx], 3
            else:
                delay, kind = self._inter_clear[idx] - state.inter_clocks[idx], 4
            timer_delay[idx] = (delay, kind)
            deadlines.append(delay)
        horizon = min(deadlines) if deadlines else None

        if stuck_inters:
            # Dead unless a stuck car's intersection opens right now.
            return [
                (0, kind, idx)
                for idx, (delay, kind) in sorted(timer_delay.items())
                if idx in stuck_inters and delay == 0
            ]

        rolling: dict[int, list[tuple[int, Direction]]] = {}
        for i in range(len(self.cars)):
            k, phase = self.car_phase(state, i)
            if phase == DRIVING:
                step = self._car_steps[i][k]
                if step.next_inter >= 0:
                    rolling.setdefault(step.next_inter, []).append(
                        (step.end - state.car_clocks[i], step.next_dir))

        advances, pops, arrivals = [], [], []
        for i in range(len(self.cars)):
            k, phase = self.car_phase(state, i)
            step = self._car_steps[i][k]
            if phase == WAIT:
                chan = state.channels[step.chan]
                if not chan or chan[0] != self.cars[i].index:
                    continue
                remaining = self._car_steps[i][-1].end - state.car_clocks[i]
                delays = {0}
                if step.next_inter >= 0 and horizon is not None:
                    travel = step.end - step.start
                    bounds = [self._admission_wait(state, step.next_inter, step.next_dir)]
                    for arr, direction in rolling.get(step.next_inter, ()):
                        gap = (self._inter_eps if direction == step.next_dir
                               else self._inter_clear[step.next_inter])
                        bounds.append(arr + gap)
                    for b in bounds:
                        if 0 < b - travel <= horizon:
                            delays.add(b - travel)
                for d in sorted(delays):
                    pops.append((-remaining, d, i))
            elif phase == DRIVING:
                delay = step.end - state.car_clocks[i]
                if delay == horizon:
                    arrivals.append((delay, 1, i))
            elif k < len(self._car_steps[i]) - 1:
                # Transient arrival with an admitting intersection (or none).
                advances.append((0, 2, i))
        # Forced zero-delay entries first, then departures with the most
        # distance left to cover, then timed events.
        moves = advances + [(d, 0, i) for _, d, i in sorted(pops)] + arrivals
        for idx, (delay, kind) in sorted(timer_delay.items()):
            if delay == horizon:
                moves.append((delay, kind, idx))
        return moves

    def apply_move(self, state: SystemState, move) -> SystemState:
        """Elapse the move's delay, then fire it.  No trace materialization."""
        delay, kind, actor = move
        if delay:
            car_clocks = tuple(
                c + delay if state.car_locs[i] % 3 != WAIT else c
                for i, c in enumerate(state.car_clocks)
            )
            inter_clocks = tuple(c + delay for c in state.inter_clocks)
        else:
            car_clocks = state.car_clocks
            inter_clocks = state.inter_clocks
        time = state.time + delay
        car_locs = state.car_locs
        inter_locs = state.inter_locs
        channels = state.channels

        if kind in (0, 1, 2):
            i = actor
            k = state.car_locs[i] // 3
            step = self._car_steps[i][k]
            if kind == 0:
                channels = _replace(channels, step.chan, channels[step.chan][1:])
                car_locs = _replace(car_locs, i, 3 * k + DRIVING)
            elif kind == 1:
                car_locs = _replace(car_locs, i, 3 * k + ARRIVED)
                if step.next_chan >= 0:
                    channels = _replace(
                        channels, step.next_chan,
                        channels[step.next_chan] + (self.cars[i].index,),
                    )
            else:
                car_locs = _replace(car_locs, i, 3 * (k + 1) + WAIT)
                if step.next_inter >= 0:
                    inter_locs = _replace(inter_locs, step.next_inter,
                                          I_BLOCKED[step.next_dir])
                    inter_clocks = _replace(inter_clocks, step.next_inter, 0)
        else:
            idx = actor
            code = state.inter_locs[idx]
            if kind == 3:
                direction = Direction.UP if code == I_BLOCKED[Direction.UP] else Direction.DOWN
                inter_locs = _replace(inter_locs, idx, I_SEMIFREE[direction])
            else:
                inter_locs = _replace(inter_locs, idx, I_FREE)

        return SystemState(car_locs, car_clocks, inter_locs, inter_clocks, channels, time)

    def event_of(self, state: SystemState, move) -> TraceEvent:
        """The trace record for firing *move* from *state*."""
        delay, kind, actor = move
        now = self.to_time(state.time + delay)
        if kind in (0, 1, 2):
            i = actor
            car = self.cars[i]
            k = state.car_locs[i] // 3
            step = self._car_steps[i][k]
            auto = f"car{car.index}"
            d = step.dsec_key
            if kind == 0:
                edge = TraceEdge(auto, f"wait[{d}]->driving[{d}]",
                                 f"pop {self.chan_names[step.chan]} {car.index}")
                return TraceEvent(now, (edge,))
            if kind == 1:
                note = (f"push {self.chan_names[step.next_chan]} {car.index}"
                        if step.next_chan >= 0 else None)
                return TraceEvent(now, (TraceEdge(auto, f"driving[{d}]->arrived[{d}]", note),))
            nxt = self._car_steps[i][k + 1].dsec_key
            edges = [TraceEdge(auto, f"arrived[{d}]->wait[{nxt}]")]
            if step.next_inter >= 0:
                idx = step.next_inter
                sec = self.inter_sections[idx]
                src = FREE if state.inter_locs[idx] == I_FREE else semifree_loc(step.next_dir)
                edges.append(TraceEdge(
                    f"inter[{sec.key}]",
                    f"{src}->{blocked_loc(step.next_dir)}:car{car.index}",
                ))
            return TraceEvent(now, tuple(edges))
        idx = actor
        sec = self.inter_sections[idx]
        code = state.inter_locs[idx]
        direction = Direction.UP if code in (I_BLOCKED[Direction.UP],
                                             I_SEMIFREE[Direction.UP]) else Direction.DOWN
        if kind == 3:
            edge_id = f"{blocked_loc(direction)}->{semifree_loc(direction)}"
        else:
            edge_id = f"{semifree_loc(direction)}->{FREE}"
        return TraceEvent(now, (TraceEdge(f"inter[{sec.key}]", edge_id),))

    def _apply(self, state: SystemState, move) -> tuple[SystemState, TraceEvent]:
        return self.apply_move(state, move), self.event_of(state, move)

    def is_doomed(self, state: SystemState) -> bool:
        """True when some car can provably never proceed.

        A driving car reaches its section end at a fixed instant and must be
        admitted by the next intersection exactly then.  Admission can only
        get later as other cars enter (every entry resets the spacing timer),
        so the car is stranded if the earliest conceivable admission already
        lies beyond its arrival instant, and two cars rolling toward the same
        intersection closer together than the mandatory spacing can never
        both be admitted.
        """
        rolling: dict[int, list[tuple[int, Direction]]] = {}
        for i in range(len(self.cars)):
            k, phase = self.car_phase(state, i)
            if phase != DRIVING:
                continue
            step = self._car_steps[i][k]
            if step.next_inter < 0:
                continue
            arrival = step.end - state.car_clocks[i]
            code = state.inter_locs[step.next_inter]
            if code == I_FREE or code == I_SEMIFREE[step.next_dir]:
                earliest = 0
            elif code == I_BLOCKED[step.next_dir]:
                earliest = self._inter_eps - state.inter_clocks[step.next_inter]
            else:
                earliest = (self._inter_clear[step.next_inter]
                            - state.inter_clocks[step.next_inter])
            if arrival < earliest:
                return True
            rolling.setdefault(step.next_inter, []).append((arrival, step.next_dir))
        for idx, arrivals in rolling.items():
            if len(arrivals) < 2:
                continue
            for x in range(len(arrivals)):
                for y in range(x + 1, len(arrivals)):
                    (ta, da), (tb, db) = arrivals[x], arrivals[y]
                    spacing = self._inter_eps if da == db else self._inter_clear[idx]
                    if abs(ta - tb) < spacing:
                        return True
        return False

    def move_footprint(self, state: SystemState, move) -> tuple:
        """State components a move reads or writes; used for independence."""
        delay, kind, actor = move
        if kind == 0:
            step = self._car_steps[actor][self.car_phase(state, actor)[0]]
            return ("car", actor), ("chan", step.chan)
        if kind == 1:
            step = self._car_steps[actor][self.car_phase(state, actor)[0]]
            if step.next_chan >= 0:
                return ("car", actor), ("chan", step.next_chan)
            return (("car", actor),)
        if kind == 2:
            step = self._car_steps[actor][self.car_phase(state, actor)[0]]
            if step.next_inter >= 0:
                return ("car", actor), ("inter", step.next_inter)
            return (("car", actor),)
        return (("inter", actor),)

    def moves_independent(self, state: SystemState, a, b) -> bool:
        """Zero-delay moves with disjoint footprints commute exactly."""
        if a[0] != 0 or b[0] != 0:
            return False
        fa = self.move_footprint(state, a)
        fb = self.move_footprint(state, b)
        return not set(fa) & set(fb)

    def succ(self, state: SystemState, cursor: int | None = None):
        """Next successor after *cursor*, or None when exhausted.

        Returns ((next_state, trace_event), new_cursor).  Enumeration order is
        fixed, so repeated walks yield identical lists.
        """
        moves = self._candidates(state)
        nxt = 0 if cursor is None else cursor + 1
        if nxt >= len(moves):
            return None
        return self._apply(state, moves[nxt]), nxt

    def successors(self, state: SystemState) -> Iterator[tuple[SystemState, TraceEvent]]:
        for move in self._candidates(state):
            yield self._apply(state, move)

    # -- replay -------------------------------------------------------------

    def validate_trace(self, trace: Trace) -> ValidationResult:
        """Replay a trace from the initial state, checking the full semantics."""
        state = self.initial
        for n, event in enumerate(trace):
            scaled = event.time * self.scale
            if scaled.denominator != 1:
                return ValidationResult(False, f"event {n}: time {event.time} off the grid")
            target_time = int(scaled)
            if target_time < state.time:
                return ValidationResult(
                    False,
                    f"event {n}: time {event.time} precedes {self.to_time(state.time)}",
                )
            found = None
            probe = self.succ(state, None)
            while probe is not None:
                (cand_state, cand_event), cursor = probe
                if cand_state.time == target_time and _same_event(cand_event, event):
                    found = cand_state
                    break
                probe = self.succ(state, cursor)
            if found is None:
                detail = self._diagnose(state, event, target_time)
                return ValidationResult(False, f"event {n}: {detail}")
            state = found
        if not self.is_final(state):
            return ValidationResult(False, "replay ends before all cars reach their goals")
        return ValidationResult(True)

    def _diagnose(self, state: SystemState, event: TraceEvent, target_time: int) -> str:
        edge = event.edges[0]
        if edge.chan_op and edge.chan_op.startswith("pop"):
            _, chan_name, sym = edge.chan_op.split()
            idx = self.chan_pos.get(chan_name)
            if idx is not None:
                content = state.channels[idx]
                if content and str(content[0]) != sym:
                    return (f"FIFO order: channel {chan_name} head is car {content[0]}, "
                            f"not car {sym}")
        return (f"transition {edge.automaton}/{edge.transition_id} not enabled at "
                f"time {self.to_time(target_time)}")

    # -- spacing audit used by tests and the acceptance suite ----------------

    def entry_events(self, trace: Trace) -> dict[str, list[tuple[Fraction, Direction, int]]]:
        """Per intersection: (time, direction, car) of every synchronized entry."""
        out: dict[str, list[tuple[Fraction, Direction, int]]] = {
            s.key: [] for s in self.inter_sections
        }
        for event in trace:
            for edge in event.edges:
                if edge.automaton.startswith("inter[") and ":car" in edge.transition_id:
                    sec_key = edge.automaton[len("inter["):-1]
                    car = int(edge.transition_id.rsplit(":car", 1)[1])
                    direction = (Direction.UP if f"[{Direction.UP.value}]"
                                 in edge.transition_id.split("->")[1]
                                 else Direction.DOWN)
                    out[sec_key].append((event.time, direction, car))
        return out


def _same_event(a: TraceEvent, b: TraceEvent) -> bool:
    if len(a.edges) != len(b.edges):
        return False
    for ea, eb in zip(a.edges, b.edges):
        if ea.automaton != eb.automaton or ea.transition_id != eb.transition_id:
            return False
    return True


def subsumes(a: SystemState, b: SystemState) -> bool:
    """a ⊑ b: b covers a — same configuration, and b is at least as early.

    Any continuation of the slower state is a continuation of the faster one,
    so a can be pruned whenever an explored b subsumes it.
    """
    return a.config_key() == b.config_key() and a.time >= b.time


def min_glob_time(system: SwaSystem, state: SystemState) -> Fraction:
    return system.to_time(state.time)


# ---------------------------------------------------------------------------
# Trace files

TRACE_FORMAT = "roadsynth-trace"
TRACE_VERSION = 1


def save_trace(path, system: SwaSystem, trace: Trace, meta: dict | None = None) -> None:
    header = {
        "format": TRACE_FORMAT,
        "version": TRACE_VERSION,
        "instance_sha": system.traffic.digest(),
        "events": len(trace),
    }
    header.update(meta or {})
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for n, event in enumerate(trace):
            for edge in event.edges:
                rec = {
                    "event": n,
                    "t": str(event.time),
                    "auto": edge.automaton,
                    "edge": edge.transition_id,
                }
                if edge.chan_op:
                    rec["chan"] = edge.chan_op
                fh.write(json.dumps(rec) + "\n")


def load_trace(path, system: SwaSystem | None = None) -> tuple[dict, Trace]:
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("format") != TRACE_FORMAT:
        raise ValueError(f"not a {TRACE_FORMAT} document")
    header, records = lines[0], lines[1:]
    if header.get("version") != TRACE_VERSION:
        raise ValueError(f"unsupported trace version {header.get('version')}")
    if system is not None and header.get("instance_sha") != system.traffic.digest():
        raise ValueError("trace does not belong to this instance (hash mismatch)")
    events: list[TraceEvent] = []
    for rec in records:
        edge = TraceEdge(rec["auto"], rec["edge"], rec.get("chan"))
        n = rec["event"]
        t = Fraction(rec["t"])
        if n == len(events):
            events.append(TraceEvent(t, (edge,)))
        elif n == len(events) - 1:
            last = events[-1]
            if last.time != t:
                raise ValueError(f"event {n}: inconsistent timestamps")
            events[-1] = TraceEvent(t, last.edges + (edge,))
        else:
            raise ValueError(f"event indices out of order at record {rec}")
    return header, events
