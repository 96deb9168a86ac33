"""Road network domain model: sections, paths, cars, and the collision rules.

Distances are exact rationals throughout; the collision rules and everything
built on top of them (snapshot checks, refinement constraints, rewards) rely
on exact comparisons.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .config import DEFAULTS, Defaults, frac


class Direction(Enum):
    UP = "up"      # traverse begin -> end
    DOWN = "down"  # traverse end -> begin

    @property
    def opposite(self) -> "Direction":
        return Direction.DOWN if self is Direction.UP else Direction.UP


@dataclass(frozen=True, order=True)
class Section:
    """An undirected road segment between two named nodes."""

    begin: str
    end: str
    length: Fraction

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError(f"section {self.begin}-{self.end}: length must be positive")
        if self.begin == self.end:
            raise ValueError(f"section endpoints must differ, got {self.begin!r} twice")

    @property
    def key(self) -> str:
        return f"{self.begin}-{self.end}"


@dataclass(frozen=True, order=True)
class DirectedSection:
    """A section paired with a traversal direction."""

    section: Section
    direction: Direction = Direction.UP

    @property
    def begin(self) -> str:
        return self.section.begin if self.direction is Direction.UP else self.section.end

    @property
    def end(self) -> str:
        return self.section.end if self.direction is Direction.UP else self.section.begin

    @property
    def length(self) -> Fraction:
        return self.section.length

    @property
    def key(self) -> str:
        return f"{self.begin}>{self.end}"

    @property
    def reversed(self) -> "DirectedSection":
        return DirectedSection(self.section, self.direction.opposite)

    def is_successor_of(self, other: "DirectedSection") -> bool:
        return other.end == self.begin

    def is_predecessor_of(self, other: "DirectedSection") -> bool:
        return self.end == other.begin


@dataclass(frozen=True)
class Path:
    """A successor-chained list of directed sections."""

    steps: tuple[DirectedSection, ...]

    def __post_init__(self):
        if not self.steps:
            raise ValueError("path must contain at least one directed section")
        for k in range(len(self.steps) - 1):
            if not self.steps[k + 1].is_successor_of(self.steps[k]):
                raise ValueError(
                    f"path step {k + 1} ({self.steps[k + 1].key}) does not follow "
                    f"{self.steps[k].key}"
                )
        seen = set()
        for step in self.steps:
            if step.section in seen:
                raise ValueError(f"path visits section {step.section.key} twice")
            seen.add(step.section)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    @property
    def length(self) -> Fraction:
        return sum((s.length for s in self.steps), Fraction(0))

    def offsets(self) -> list[Fraction]:
        """Cumulative offsets: offsets()[k] is where step k begins; last entry is the total."""
        acc = Fraction(0)
        out = [acc]
        for step in self.steps:
            acc += step.length
            out.append(acc)
        return out

    def locate(self, offset: Fraction) -> tuple[int, Fraction]:
        """Map a path offset to (step index, relative position within the step).

        Offsets on interior boundaries belong to the later step; the final
        offset maps to the end of the last step.
        """
        if offset < 0 or offset > self.length:
            raise ValueError(f"offset {offset} outside path of length {self.length}")
        acc = Fraction(0)
        for k, step in enumerate(self.steps):
            nxt = acc + step.length
            if offset < nxt or (k == len(self.steps) - 1 and offset == nxt):
                return k, offset - acc
            acc = nxt
        raise AssertionError("unreachable")


@dataclass(frozen=True)
class Car:
    index: int
    path: Path
    initial_offset: Fraction
    goal_offset: Fraction

    def __post_init__(self):
        if not (0 <= self.initial_offset < self.goal_offset <= self.path.length):
            raise ValueError(
                f"car {self.index}: need 0 <= initial ({self.initial_offset}) < "
                f"goal ({self.goal_offset}) <= path length ({self.path.length})"
            )


@dataclass(frozen=True)
class Violation:
    """One broken collision rule, with the measured gap where the rule has one."""

    rule: int
    car_a: int
    car_b: int
    gap: Fraction | None = None

    def describe(self) -> str:
        names = {1: "same directed section", 2: "neighbouring sections", 3: "opposite directions"}
        extra = "" if self.gap is None else f", gap {self.gap}"
        return f"rule {self.rule} ({names[self.rule]}): cars {self.car_a}/{self.car_b}{extra}"


@dataclass(frozen=True)
class CarState:
    """Where one car is right now: directed section, position within it, speed."""

    step_index: int          # index into the car's path
    rel_pos: Fraction        # position within the directed section, [0, length]
    speed: Fraction


class WorldSnapshot:
    """Positions and speeds of (present) cars at one instant."""

    def __init__(self, states: dict[int, CarState]):
        self.states = dict(states)

    def __contains__(self, car_index: int) -> bool:
        return car_index in self.states

    def cars(self) -> list[int]:
        return sorted(self.states)

    @staticmethod
    def from_offsets(
        traffic: "CarTraffic",
        offsets: dict[int, Fraction],
        speeds: dict[int, Fraction] | None = None,
    ) -> "WorldSnapshot":
        speeds = speeds or {}
        states = {}
        for car in traffic.cars:
            if car.index not in offsets:
                continue
            k, rel = car.path.locate(offsets[car.index])
            states[car.index] = CarState(k, rel, speeds.get(car.index, Fraction(0)))
        return WorldSnapshot(states)


class CarTraffic:
    """A problem instance: the fleet of cars plus the global parameters."""

    def __init__(
        self,
        cars: list[Car] | tuple[Car, ...],
        security_distance: Fraction = DEFAULTS.epsilon,
        nominal_speed: Fraction = DEFAULTS.nominal_speed,
        network: list[Section] | None = None,
    ):
        cars = tuple(sorted(cars, key=lambda c: c.index))
        indices = [c.index for c in cars]
        if len(set(indices)) != len(indices):
            raise ValueError("car indices must be unique")
        self.cars = cars
        self.epsilon = frac(security_distance)
        self.nominal_speed = frac(nominal_speed)
        self._by_index = {c.index: c for c in cars}
        # The road network can outlive its occupants: state encodings and
        # instance files keep every section even when a path has no cars.
        self._network = None
        if network is not None:
            self._network = sorted(network, key=lambda s: s.key)
            derived = {s.key for s in self._derived_sections()}
            if not derived <= {s.key for s in self._network}:
                raise ValueError("cars reference sections outside the network")

    def car(self, index: int) -> Car:
        try:
            return self._by_index[index]
        except KeyError:
            raise KeyError(f"no car with index {index}") from None

    def directed_sections(self) -> list[DirectedSection]:
        seen: dict[str, DirectedSection] = {}
        for car in self.cars:
            for step in car.path:
                seen.setdefault(step.key, step)
        return [seen[k] for k in sorted(seen)]

    def _derived_sections(self) -> list[Section]:
        seen: dict[str, Section] = {}
        for car in self.cars:
            for step in car.path:
                seen.setdefault(step.section.key, step.section)
        return [seen[k] for k in sorted(seen)]

    def sections(self) -> list[Section]:
        if self._network is not None:
            return list(self._network)
        return self._derived_sections()

    def distinct_paths(self) -> list[Path]:
        out: list[Path] = []
        for car in self.cars:
            if not any(car.path is p or car.path == p for p in out):
                out.append(car.path)
        return out

    def canonical_json(self) -> str:
        return json.dumps(traffic_to_dict(self), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Topology queries


def neighbours(d: DirectedSection, traffic: CarTraffic) -> list[DirectedSection]:
    """All directed sections of the traffic that are successors or predecessors of d."""
    known = traffic.directed_sections()
    if not any(d == other for other in known):
        raise ValueError(f"directed section {d.key} does not occur in any path")
    out = []
    for other in known:
        if other == d:
            continue
        if other.is_successor_of(d) or other.is_predecessor_of(d):
            out.append(other)
    return out


def intersections(traffic: CarTraffic) -> set[Section]:
    """Sections traversed (in either direction) by at least two distinct paths."""
    paths = traffic.distinct_paths()
    found: set[Section] = set()
    for i in range(len(paths)):
        for j in range(i + 1, len(paths)):
            in_i = {s.section for s in paths[i]}
            in_j = {s.section for s in paths[j]}
            found |= in_i & in_j
    return found


# ---------------------------------------------------------------------------
# Collision rules


def check_collision_rules(snapshot: WorldSnapshot, traffic: CarTraffic) -> list[Violation]:
    """Evaluate the three collision rules on a snapshot.

    Rule 1: cars on the same directed section keep a gap >= epsilon.
    Rule 2: a gap >= epsilon is kept across a shared node, either trailing a
            car into its next section (same direction) or approaching head-on.
    Rule 3: a section is never occupied in both directions at once.
    """
    eps = traffic.epsilon
    out: list[Violation] = []
    present = snapshot.cars()
    for ai in range(len(present)):
        for bi in range(ai + 1, len(present)):
            a, b = present[ai], present[bi]
            out.extend(_pair_violations(a, b, snapshot, traffic, eps))
    return out


def _pair_violations(a: int, b: int, snap: WorldSnapshot, traffic: CarTraffic, eps: Fraction):
    car_a, car_b = traffic.car(a), traffic.car(b)
    st_a, st_b = snap.states[a], snap.states[b]
    d_a = car_a.path.steps[st_a.step_index]
    d_b = car_b.path.steps[st_b.step_index]

    # Rule 3: same section, opposite traversal directions.
    if d_a.section == d_b.section and d_a.direction != d_b.direction:
        yield Violation(3, a, b)
        return

    # Rule 1: same directed section.
    if d_a == d_b:
        gap = abs(st_a.rel_pos - st_b.rel_pos)
        if gap < eps:
            yield Violation(1, a, b, gap)
        return

    # Rule 2, both orientations of the pair.
    for (i, car_i, st_i, d_i), (j, car_j, st_j, d_j) in (
        ((a, car_a, st_a, d_a), (b, car_b, st_b, d_b)),
        ((b, car_b, st_b, d_b), (a, car_a, st_a, d_a)),
    ):
        # Same direction: j just left the section i is in, through i's far node.
        if st_j.step_index > 0 and car_j.path.steps[st_j.step_index - 1] == d_i:
            gap = (d_i.length - st_i.rel_pos) + st_j.rel_pos
            if gap < eps:
                yield Violation(2, i, j, gap)
        # Opposite direction: j is one section away from entering i's section head-on.
        if st_j.step_index + 1 < len(car_j.path):
            nxt = car_j.path.steps[st_j.step_index + 1]
            if nxt.section == d_i.section and nxt.direction != d_i.direction:
                gap = (d_i.length - st_i.rel_pos) + (d_j.length - st_j.rel_pos)
                if gap < eps:
                    yield Violation(2, i, j, gap)


# ---------------------------------------------------------------------------
# Shared geometry between two cars (used by refinement and the MDP reward)


@dataclass(frozen=True)
class SharedStretch:
    """A maximal run of sections two cars traverse identically (same direction).

    Offsets are absolute along each car's own path; ``a_pos - a_start`` and
    ``b_pos - b_start`` live on a common axis.  ``prev_len``/``next_len`` are
    the section lengths adjoining the stretch on each car's path (None at the
    path ends).
    """

    a: int
    b: int
    a_start: Fraction
    a_end: Fraction
    b_start: Fraction
    b_end: Fraction
    a_prev_len: Fraction | None
    a_next_len: Fraction | None
    b_prev_len: Fraction | None
    b_next_len: Fraction | None
    same_path: bool

    @property
    def length(self) -> Fraction:
        return self.a_end - self.a_start


@dataclass(frozen=True)
class HeadOnShare:
    """A section two cars traverse in opposite directions.

    The contested node is where ``b`` enters and ``a`` exits (a's far end).
    """

    a: int
    b: int
    section: Section
    a_enter: Fraction  # absolute offsets of the section along a's path
    a_leave: Fraction
    b_enter: Fraction
    b_leave: Fraction
    b_prev_len: Fraction | None


def shared_stretches(car_a: Car, car_b: Car) -> list[SharedStretch]:
    """Maximal same-direction shared stretches between two cars' paths."""
    offs_a = car_a.path.offsets()
    offs_b = car_b.path.offsets()
    if car_a.path == car_b.path:
        n = len(car_a.path)
        return [
            SharedStretch(
                car_a.index, car_b.index,
                Fraction(0), offs_a[n], Fraction(0), offs_b[n],
                None, None, None, None, same_path=True,
            )
        ]
    steps_a, steps_b = car_a.path.steps, car_b.path.steps
    matched = set()
    out = []
    for ka in range(len(steps_a)):
        for kb in range(len(steps_b)):
            if (ka, kb) in matched or steps_a[ka] != steps_b[kb]:
                continue
            m = 0
            while (
                ka + m < len(steps_a)
                and kb + m < len(steps_b)
                and steps_a[ka + m] == steps_b[kb + m]
            ):
                matched.add((ka + m, kb + m))
                m += 1
            out.append(
                SharedStretch(
                    car_a.index, car_b.index,
                    offs_a[ka], offs_a[ka + m],
                    offs_b[kb], offs_b[kb + m],
                    steps_a[ka - 1].length if ka > 0 else None,
                    steps_a[ka + m].length if ka + m < len(steps_a) else None,
                    steps_b[kb - 1].length if kb > 0 else None,
                    steps_b[kb + m].length if kb + m < len(steps_b) else None,
                    same_path=False,
                )
            )
    return out


def head_on_shares(car_a: Car, car_b: Car) -> list[HeadOnShare]:
    """Sections shared in opposite directions, oriented as (a first per its own path)."""
    if car_a.path == car_b.path:
        return []
    offs_a = car_a.path.offsets()
    offs_b = car_b.path.offsets()
    out = []
    for ka, sa in enumerate(car_a.path.steps):
        for kb, sb in enumerate(car_b.path.steps):
            if sa.section == sb.section and sa.direction != sb.direction:
                out.append(
                    HeadOnShare(
                        car_a.index, car_b.index, sa.section,
                        offs_a[ka], offs_a[ka + 1],
                        offs_b[kb], offs_b[kb + 1],
                        car_b.path.steps[kb - 1].length if kb > 0 else None,
                    )
                )
    return out


def pairwise_distance(snapshot: WorldSnapshot, traffic: CarTraffic) -> Fraction | None:
    """Minimum structural distance between any two present cars.

    Distance is measured along shared stretches (aligned coordinates) and
    across head-on approaches; pairs with no shared geometry nearby contribute
    nothing.  Returns None when no pair is comparable.
    """
    best: Fraction | None = None

    def consider(value: Fraction):
        nonlocal best
        if best is None or value < best:
            best = value

    present = snapshot.cars()
    for ai in range(len(present)):
        for bi in range(ai + 1, len(present)):
            a, b = present[ai], present[bi]
            car_a, car_b = traffic.car(a), traffic.car(b)
            pos_a = car_a.path.offsets()[snapshot.states[a].step_index] + snapshot.states[a].rel_pos
            pos_b = car_b.path.offsets()[snapshot.states[b].step_index] + snapshot.states[b].rel_pos
            for st in shared_stretches(car_a, car_b):
                rel_a = pos_a - st.a_start
                rel_b = pos_b - st.b_start
                lo_a = -(st.a_prev_len or 0)
                hi_a = st.length + (st.a_next_len or 0)
                lo_b = -(st.b_prev_len or 0)
                hi_b = st.length + (st.b_next_len or 0)
                if lo_a <= rel_a <= hi_a and lo_b <= rel_b <= hi_b:
                    consider(abs(rel_a - rel_b))
            for ho in head_on_shares(car_a, car_b) + head_on_shares(car_b, car_a):
                p_first = pos_a if ho.a == a else pos_b
                p_second = pos_b if ho.a == a else pos_a
                inside_first = ho.a_enter <= p_first <= ho.a_leave
                approach_lo = ho.b_enter - (ho.b_prev_len or 0)
                approaching_second = approach_lo <= p_second <= ho.b_enter
                if inside_first and approaching_second:
                    consider((ho.a_leave - p_first) + (ho.b_enter - p_second))
    return best


# ---------------------------------------------------------------------------
# Instance builders


def _subdivide(
    begin: str, end: str, length: Fraction, cuts: list[Fraction], taken: set[str]
) -> list[Section]:
    """Split one section at the given relative cuts, inventing boundary nodes."""
    base = begin if f"{begin}'" not in taken else f"{begin}_{end}"
    names = [f"{base}'", f"{base}''"]
    taken.update(names)
    bounds = [Fraction(0)] + list(cuts) + [length]
    nodes = [begin] + names[: len(cuts)] + [end]
    return [
        Section(nodes[i], nodes[i + 1], bounds[i + 1] - bounds[i])
        for i in range(len(nodes) - 1)
    ]


def _base_paths(defaults: Defaults) -> list[Path]:
    """The three subdivided paths of the bundled road network (24 sections)."""
    L = defaults.section_length
    diag = defaults.diagonal_length
    eps = defaults.epsilon
    taken: set[str] = set()

    def up(sec: Section) -> DirectedSection:
        return DirectedSection(sec, Direction.UP)

    first_cuts = [2 * eps, 4 * eps]
    last_cuts = [L - 4 * eps, L - 2 * eps]

    # Plain shared sections.
    n1_n3 = Section("n1", "n3", L)
    n3_n4 = Section("n3", "n4", diag)
    n3_n5 = Section("n3", "n5", diag)
    n4_n6 = Section("n4", "n6", L)
    n4_n5 = Section("n4", "n5", L)
    n5_n8 = Section("n5", "n8", L)

    p0 = Path(tuple(
        [up(s) for s in _subdivide("n0", "n1", L, first_cuts, taken)]
        + [up(n1_n3), up(n3_n4), up(n4_n6)]
        + [up(s) for s in _subdivide("n6", "n11", L, last_cuts, taken)]
    ))
    p1 = Path(tuple(
        [up(s) for s in _subdivide("n2", "n1", L, first_cuts, taken)]
        + [up(n1_n3), up(n3_n5), up(n5_n8)]
        + [up(s) for s in _subdivide("n8", "n10", L, last_cuts, taken)]
    ))
    p2 = Path(tuple(
        [up(s) for s in _subdivide("n7", "n6", L, first_cuts, taken)]
        + [DirectedSection(n4_n6, Direction.DOWN), up(n4_n5), up(n5_n8)]
        + [up(s) for s in _subdivide("n8", "n9", L, last_cuts, taken)]
    ))
    return [p0, p1, p2]


def _network_of(paths: list[Path]) -> list[Section]:
    seen: dict[str, Section] = {}
    for path in paths:
        for step in path:
            seen.setdefault(step.section.key, step.section)
    return [seen[k] for k in sorted(seen)]


def running_example(defaults: Defaults = DEFAULTS) -> CarTraffic:
    """Nine cars, three per path, spaced 2*eps at both ends of their journeys."""
    paths = _base_paths(defaults)
    eps = defaults.epsilon
    L = defaults.section_length
    cars = []
    for p_idx, path in enumerate(paths):
        total = path.length
        for slot in range(3):
            index = 3 * p_idx + slot + 1
            init = 2 * eps * slot
            goal = total - L + (L - 4 * eps) + 2 * eps * slot
            cars.append(Car(index, path, init, goal))
    return CarTraffic(cars, security_distance=eps,
                      nominal_speed=defaults.nominal_speed,
                      network=_network_of(paths))


def _quantize(value: Fraction, quantum: Fraction) -> Fraction:
    return (value / quantum).__floor__() * quantum


def random_instance(
    seed: int, defaults: Defaults = DEFAULTS
) -> tuple[CarTraffic, WorldSnapshot]:
    """Random initial condition on the bundled network, deterministic per seed.

    Each of the nine candidate cars is present with probability 0.8; positions
    are uniform in the leading two thirds of each path (goal = path end) and
    speeds uniform in [0, V], both snapped to the configured quantum.  The
    snapshot is resampled until every pairwise structural gap strictly clears
    epsilon, so the collision rules hold at t=0 (later steps carry no
    guarantee: speeds are arbitrary).
    """
    rng = random.Random(seed)
    paths = _base_paths(defaults)
    eps = defaults.epsilon
    q = defaults.random_quantum
    present: list[tuple[int, Path]] = []
    for p_idx, path in enumerate(paths):
        for slot in range(3):
            index = 3 * p_idx + slot + 1
            if rng.random() < defaults.car_presence_prob:
                present.append((index, path))

    while True:
        cars, offsets, speeds = [], {}, {}
        for index, path in present:
            cutoff = path.length * defaults.position_fraction
            pos = _quantize(frac(rng.random()) * cutoff, q)
            spd = _quantize(frac(rng.random()) * defaults.max_speed, q)
            cars.append(Car(index, path, pos, path.length))
            offsets[index] = pos
            speeds[index] = spd
        traffic = CarTraffic(cars, security_distance=eps,
                             nominal_speed=defaults.nominal_speed,
                             network=_network_of(paths))
        snapshot = WorldSnapshot.from_offsets(traffic, offsets, speeds)
        if check_collision_rules(snapshot, traffic):
            continue
        gap = pairwise_distance(snapshot, traffic)
        if gap is not None and gap <= eps:
            continue
        return traffic, snapshot


# ---------------------------------------------------------------------------
# Instance files

FORMAT_NAME = "roadsynth-instance"
FORMAT_VERSION = 1


def _fr(x: Fraction) -> str:
    return str(x)


def traffic_to_dict(
    traffic: CarTraffic, snapshot: WorldSnapshot | None = None, seed: int | None = None
) -> dict:
    sections = traffic.sections()
    paths = traffic.distinct_paths()
    path_of = {}
    for car in traffic.cars:
        for k, p in enumerate(paths):
            if car.path == p:
                path_of[car.index] = k
                break
    nodes = sorted({n for s in sections for n in (s.begin, s.end)})
    cars = []
    for car in traffic.cars:
        rec = {
            "index": car.index,
            "path": path_of[car.index],
            "initial_offset": _fr(car.initial_offset),
            "goal_offset": _fr(car.goal_offset),
        }
        if snapshot is not None and car.index in snapshot:
            rec["initial_speed"] = _fr(snapshot.states[car.index].speed)
        cars.append(rec)
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "nodes": nodes,
        "sections": [
            {"begin": s.begin, "end": s.end, "length": _fr(s.length)} for s in sections
        ],
        "paths": [
            [[d.begin, d.end] for d in p.steps] for p in paths
        ],
        "cars": cars,
        "epsilon": _fr(traffic.epsilon),
        "nominal_speed": _fr(traffic.nominal_speed),
        "seed": seed,
    }


def traffic_from_dict(data: dict) -> tuple[CarTraffic, WorldSnapshot]:
    if data.get("format") != FORMAT_NAME:
        raise ValueError(f"not a {FORMAT_NAME} document")
    if data.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported instance version {data.get('version')}")
    by_pair: dict[tuple[str, str], Section] = {}
    for rec in data["sections"]:
        sec = Section(rec["begin"], rec["end"], frac(rec["length"]))
        by_pair[(sec.begin, sec.end)] = sec
    paths = []
    for steps in data["paths"]:
        dsecs = []
        for begin, end in steps:
            if (begin, end) in by_pair:
                dsecs.append(DirectedSection(by_pair[(begin, end)], Direction.UP))
            elif (end, begin) in by_pair:
                dsecs.append(DirectedSection(by_pair[(end, begin)], Direction.DOWN))
            else:
                raise ValueError(f"path references unknown section {begin}>{end}")
        paths.append(Path(tuple(dsecs)))
    cars, offsets, speeds = [], {}, {}
    for rec in data["cars"]:
        car = Car(
            rec["index"], paths[rec["path"]],
            frac(rec["initial_offset"]), frac(rec["goal_offset"]),
        )
        cars.append(car)
        offsets[car.index] = car.initial_offset
        speeds[car.index] = frac(rec.get("initial_speed", "0"))
    traffic = CarTraffic(
        cars,
        security_distance=frac(data["epsilon"]),
        nominal_speed=frac(data["nominal_speed"]),
        network=list(by_pair.values()),
    )
    return traffic, WorldSnapshot.from_offsets(traffic, offsets, speeds)


def save_instance(path, traffic: CarTraffic, snapshot: WorldSnapshot | None = None,
                  seed: int | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(traffic_to_dict(traffic, snapshot, seed), fh, indent=2)
        fh.write("\n")


def load_instance(path) -> tuple[CarTraffic, WorldSnapshot]:
    with open(path) as fh:
        return traffic_from_dict(json.load(fh))
