"""Stopwatch timed automata with equality guards, synchronization, and channels.

Two automaton families are generated from a traffic instance: one per car
(progress clock frozen while the car waits at a section entrance) and one per
intersection (a timer spacing out entries).  All guards are equalities, and
any clock whose frozen/running status changes across a transition is pinned by
such an equality, which keeps reachability decidable (the initialized
fragment).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .network import Car, CarTraffic, DirectedSection, Section, intersections


class ClockKind(Enum):
    CAR = "car"
    INTERSECTION = "intersection"
    GLOBAL = "global"


@dataclass(frozen=True)
class Clock:
    id: str
    kind: ClockKind


GLOBAL_CLOCK = Clock("t", ClockKind.GLOBAL)


@dataclass(frozen=True)
class GuardAtom:
    clock: str
    op: str            # generated systems only use "="
    value: Fraction


@dataclass(frozen=True)
class Guard:
    atoms: tuple[GuardAtom, ...] = ()

    def __post_init__(self):
        for atom in self.atoms:
            if atom.value < 0:
                raise ValueError(f"guard constant must be nonnegative, got {atom.value}")

    def pins(self, clock: str) -> bool:
        return any(a.clock == clock and a.op == "=" for a in self.atoms)


@dataclass(frozen=True)
class ChannelOp:
    kind: str          # "push" | "pop"
    channel: str
    symbol: int        # car index


@dataclass(frozen=True)
class Location:
    id: str
    automaton: str
    stopped: frozenset[str] = frozenset()   # the stopwatch map at this location
    invariant: Guard = Guard()

    def __post_init__(self):
        if GLOBAL_CLOCK.id in self.stopped:
            raise ValueError("the global-time clock can never be stopped")


@dataclass(frozen=True)
class Transition:
    id: str
    source: str
    guard: Guard
    label: str
    target: str
    resets: frozenset[str] = frozenset()
    sync: str | None = None
    chan_op: ChannelOp | None = None


@dataclass
class SwaAutomaton:
    name: str
    locations: dict[str, Location]
    initial: str
    clocks: dict[str, Clock]
    transitions: list[Transition]
    goal: str | None = None

    def __post_init__(self):
        if self.initial not in self.locations:
            raise ValueError(f"{self.name}: initial location {self.initial!r} missing")
        for tr in self.transitions:
            if tr.source not in self.locations or tr.target not in self.locations:
                raise ValueError(f"{self.name}: transition {tr.id} touches unknown location")
        self._by_id = {tr.id: tr for tr in self.transitions}

    def transition(self, tid: str) -> Transition:
        return self._by_id[tid]

    @property
    def alphabet(self) -> set[str]:
        return {tr.label for tr in self.transitions}


@dataclass
class Channel:
    """Bounded FIFO of car indices, one per directed section."""

    id: str
    capacity: int

    def __post_init__(self):
        if self.capacity < 0:
            raise ValueError("channel capacity must be nonnegative")


def car_clock_id(car_index: int) -> str:
    return f"x_car{car_index}"


def intersection_clock_id(section: Section) -> str:
    return f"x_{section.key}"


def channel_id(d: DirectedSection) -> str:
    return d.key


def entry_sync_label(d: DirectedSection, car_index: int) -> str:
    return f"enter:{d.key}:{car_index}"


@dataclass(frozen=True)
class TraversalStep:
    """One directed section of a car's journey with absolute path offsets."""

    dsec: DirectedSection
    start: Fraction
    end: Fraction


def traversal(car: Car) -> list[TraversalStep]:
    """The sections the car actually covers, clipped to [initial, goal] offsets.

    The first step starts mid-section when the initial offset is interior; the
    last step ends at the goal offset.
    """
    offs = car.path.offsets()
    first, _ = car.path.locate(car.initial_offset)
    steps = []
    for k in range(first, len(car.path)):
        lo, hi = offs[k], offs[k + 1]
        if lo >= car.goal_offset:
            break
        start = max(lo, car.initial_offset)
        steps.append(TraversalStep(car.path.steps[k], start, min(hi, car.goal_offset)))
    return steps


def starts_at_boundary(car: Car) -> bool:
    """True when the car begins exactly at a section entrance (it starts at rest
    there and may hold position); mid-section starts are already rolling."""
    _, rel = car.path.locate(car.initial_offset)
    return rel == 0


def wait_loc(d: DirectedSection) -> str:
    return f"wait[{d.key}]"


def driving_loc(d: DirectedSection) -> str:
    return f"driving[{d.key}]"


def arrived_loc(d: DirectedSection) -> str:
    return f"arrived[{d.key}]"


def build_car_automaton(car: Car, traffic: CarTraffic) -> SwaAutomaton:
    """Wait/driving/arrived chain over the car's traversed sections.

    The clock tracks absolute progress along the car's path, so guard
    constants are the cumulative offsets at which each section ends.  Waiting
    freezes the clock; entering the waiting location of an intersection is the
    synchronized entry event; the FIFO pop gates the start of driving.  A car
    starting at rest on a section boundary begins in that section's waiting
    location (its token pre-seeded in the FIFO); a car starting mid-section is
    already rolling and begins in driving.
    """
    try:
        member = traffic.car(car.index)
    except KeyError:
        member = None
    if member is None or member != car:
        raise ValueError(f"car {car.index} does not belong to this traffic")
    steps = traversal(car)
    clock = Clock(car_clock_id(car.index), ClockKind.CAR)
    name = f"car{car.index}"
    inter = intersections(traffic)
    waits_first = starts_at_boundary(car)

    locations: dict[str, Location] = {}
    transitions: list[Transition] = []

    for k, st in enumerate(steps):
        d = st.dsec
        if k > 0 or waits_first:
            locations[wait_loc(d)] = Location(wait_loc(d), name, frozenset({clock.id}))
        locations[driving_loc(d)] = Location(driving_loc(d), name)
        locations[arrived_loc(d)] = Location(arrived_loc(d), name)

        if k > 0 or waits_first:
            transitions.append(Transition(
                id=f"{wait_loc(d)}->{driving_loc(d)}",
                source=wait_loc(d),
                guard=Guard((GuardAtom(clock.id, "=", st.start),)),
                label=f"{channel_id(d)}?{car.index}",
                target=driving_loc(d),
                chan_op=ChannelOp("pop", channel_id(d), car.index),
            ))
        nxt = steps[k + 1].dsec if k + 1 < len(steps) else None
        transitions.append(Transition(
            id=f"{driving_loc(d)}->{arrived_loc(d)}",
            source=driving_loc(d),
            guard=Guard((GuardAtom(clock.id, "=", st.end),)),
            label=f"{channel_id(nxt)}!{car.index}" if nxt else f"goal:{car.index}",
            target=arrived_loc(d),
            chan_op=ChannelOp("push", channel_id(nxt), car.index) if nxt else None,
        ))
        if nxt is not None:
            is_inter = nxt.section in inter
            transitions.append(Transition(
                id=f"{arrived_loc(d)}->{wait_loc(nxt)}",
                source=arrived_loc(d),
                guard=Guard((GuardAtom(clock.id, "=", st.end),)),
                label=entry_sync_label(nxt, car.index),
                target=wait_loc(nxt),
                sync=entry_sync_label(nxt, car.index) if is_inter else None,
            ))

    return SwaAutomaton(
        name=name,
        locations=locations,
        initial=wait_loc(steps[0].dsec) if waits_first else driving_loc(steps[0].dsec),
        clocks={clock.id: clock, GLOBAL_CLOCK.id: GLOBAL_CLOCK},
        transitions=transitions,
        goal=arrived_loc(steps[-1].dsec),
    )


FREE = "free"


def blocked_loc(direction) -> str:
    return f"blocked[{direction.value}]"


def semifree_loc(direction) -> str:
    return f"semifree[{direction.value}]"


def build_intersection_automaton(section: Section, traffic: CarTraffic) -> SwaAutomaton:
    """Entry spacing for one intersection.

    Any entry resets the timer and blocks the section; after epsilon time
    units it is semi-free (one more same-direction entry allowed); after
    length + epsilon it is free again, which an opposite-direction entry
    requires.  Entries synchronize with the entering car's automaton.
    """
    if section not in intersections(traffic):
        raise ValueError(f"section {section.key} is not an intersection of this traffic")
    eps = traffic.epsilon
    clock = Clock(intersection_clock_id(section), ClockKind.INTERSECTION)
    name = f"inter[{section.key}]"

    # Which cars enter this section in which direction?  A car entering means
    # its traversal reaches the section's waiting location (cars starting
    # inside never synchronize; the initial state accounts for them).
    entries: list[tuple[DirectedSection, int]] = []
    for car in traffic.cars:
        steps = traversal(car)
        for k, st in enumerate(steps):
            if st.dsec.section == section and k > 0:
                entries.append((st.dsec, car.index))
    directions = sorted({d.direction for d, _ in entries}, key=lambda x: x.value)
    if not directions:
        # Intersection no car ever enters mid-run; still a valid (trivial) automaton.
        directions = []

    locations = {FREE: Location(FREE, name)}
    transitions: list[Transition] = []
    for direction in directions:
        b, s = blocked_loc(direction), semifree_loc(direction)
        locations[b] = Location(b, name)
        locations[s] = Location(s, name)
        transitions.append(Transition(
            id=f"{b}->{s}",
            source=b,
            guard=Guard((GuardAtom(clock.id, "=", eps),)),
            label=f"spacing:{section.key}:{direction.value}",
            target=s,
        ))
        transitions.append(Transition(
            id=f"{s}->{FREE}",
            source=s,
            guard=Guard((GuardAtom(clock.id, "=", section.length + eps),)),
            label=f"clear:{section.key}:{direction.value}",
            target=FREE,
        ))
    for dsec, car_index in sorted(entries, key=lambda e: (e[0].direction.value, e[1])):
        label = entry_sync_label(dsec, car_index)
        b = blocked_loc(dsec.direction)
        for src in (FREE, semifree_loc(dsec.direction)):
            transitions.append(Transition(
                id=f"{src}->{b}:car{car_index}",
                source=src,
                guard=Guard(),
                label=label,
                target=b,
                resets=frozenset({clock.id}),
                sync=label,
            ))

    return SwaAutomaton(
        name=name,
        locations=locations,
        initial=FREE,
        clocks={clock.id: clock, GLOBAL_CLOCK.id: GLOBAL_CLOCK},
        transitions=transitions,
    )


def is_initialized(automaton: SwaAutomaton) -> bool:
    """Check the initialized-stopwatch condition.

    A clock that is stopped on one side of a transition and running on the
    other must be reset by it; a guard that pins the clock to a constant
    counts (resetting to the same value would change nothing).
    """
    for tr in automaton.transitions:
        stopped_src = automaton.locations[tr.source].stopped
        stopped_tgt = automaton.locations[tr.target].stopped
        for clock in stopped_src ^ stopped_tgt:
            if clock not in tr.resets and not tr.guard.pins(clock):
                return False
    return True


def build_channels(traffic: CarTraffic) -> dict[str, Channel]:
    """One FIFO per directed section a car announces itself on.

    Capacity is the number of cars routed through the directed section; each
    car pushes at most once, so the bound can never overflow.
    """
    counts: dict[str, int] = {}
    for car in traffic.cars:
        for st in traversal(car):
            key = channel_id(st.dsec)
            counts[key] = counts.get(key, 0) + 1
    return {key: Channel(key, n) for key, n in sorted(counts.items())}
