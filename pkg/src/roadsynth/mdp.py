"""Markov decision process over the road network, and episode machinery.

States are flat float vectors: per section, six slots of (position within the
section, velocity / V, identifier pair, presence flag).  The transition is
deterministic: positions advance by the current speeds, then speeds take the
commanded accelerations (clamped to [0, V]).  Cars whose position passes
their goal leave the world; reaching all goals pays the success reward, any
broken collision rule ends the episode with a penalty, and otherwise a small
shaping reward favours speed and spacing.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .config import DEFAULTS, Defaults
from .network import (
    CarTraffic,
    CarState,
    WorldSnapshot,
    check_collision_rules,
    pairwise_distance,
    random_instance,
    running_example,
    traffic_from_dict,
    traffic_to_dict,
)

SLOTS_PER_SECTION = 6
SLOT_WIDTH = 5  # position, normalized velocity, id pair (2), presence
GOAL_TOLERANCE = 1e-9  # absorbs float drift when a plan lands exactly on goal

IDENTIFIER_CODES = [(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)]


class EncodingError(ValueError):
    pass


def state_dim(traffic: CarTraffic) -> int:
    return len(traffic.sections()) * SLOTS_PER_SECTION * SLOT_WIDTH


def car_codes(traffic: CarTraffic) -> dict[int, tuple[int, int]]:
    """Fixed identifier pair per car, assigned in car-index order."""
    indices = sorted(c.index for c in traffic.cars)
    if len(indices) > len(IDENTIFIER_CODES):
        raise EncodingError("more cars than identifier codes")
    return {idx: IDENTIFIER_CODES[n] for n, idx in enumerate(indices)}


def encode_state(snapshot: WorldSnapshot, traffic: CarTraffic,
                 defaults: Defaults = DEFAULTS) -> np.ndarray:
    """Section-slot encoding; absent slots stay all-zero.

    Cars in one section occupy the leading slots ordered by position within
    the section, descending, so nearby cars sit in the same or neighbouring
    sections' slots.
    """
    sections = traffic.sections()
    order = {sec.key: i for i, sec in enumerate(sections)}
    codes = car_codes(traffic)
    vec = np.zeros(len(sections) * SLOTS_PER_SECTION * SLOT_WIDTH, dtype=np.float64)
    per_section: dict[int, list[tuple[float, int, float]]] = {}
    for idx, st in snapshot.states.items():
        car = traffic.car(idx)
        dsec = car.path.steps[st.step_index]
        per_section.setdefault(order[dsec.section.key], []).append(
            (float(st.rel_pos), idx, float(st.speed))
        )
    v_cap = float(defaults.max_speed)
    for s_idx, entries in per_section.items():
        if len(entries) > SLOTS_PER_SECTION:
            raise EncodingError(
                f"section {sections[s_idx].key} holds {len(entries)} cars"
            )
        entries.sort(key=lambda e: (-e[0], e[1]))
        for slot, (pos, idx, speed) in enumerate(entries):
            base = (s_idx * SLOTS_PER_SECTION + slot) * SLOT_WIDTH
            code = codes[idx]
            vec[base:base + SLOT_WIDTH] = (
                pos, speed / v_cap, float(code[0]), float(code[1]), 1.0
            )
    return vec


def decode_state(vec: np.ndarray, traffic: CarTraffic,
                 defaults: Defaults = DEFAULTS) -> WorldSnapshot:
    """Inverse of encode_state for cars present in the vector."""
    sections = traffic.sections()
    codes = {v: k for k, v in car_codes(traffic).items()}
    states: dict[int, CarState] = {}
    v_cap = float(defaults.max_speed)
    for s_idx, sec in enumerate(sections):
        for slot in range(SLOTS_PER_SECTION):
            base = (s_idx * SLOTS_PER_SECTION + slot) * SLOT_WIDTH
            if vec[base + 4] != 1.0:
                continue
            code = (int(vec[base + 2]), int(vec[base + 3]))
            idx = codes.get(code)
            if idx is None:
                raise EncodingError(f"unknown car identifier {code}")
            car = traffic.car(idx)
            step_index = next(
                k for k, d in enumerate(car.path.steps) if d.section == sec
            )
            states[idx] = CarState(
                step_index,
                Fraction(float(vec[base])),
                Fraction(float(vec[base + 1]) * v_cap),
            )
    return WorldSnapshot(states)


@dataclass
class StepOutcome:
    state: np.ndarray
    reward: float
    terminated: bool
    cause: str = "none"   # success | collision | opposite-direction | none


def _offsets_of(snapshot: WorldSnapshot, traffic: CarTraffic) -> dict[int, float]:
    out = {}
    for idx, st in snapshot.states.items():
        car = traffic.car(idx)
        out[idx] = float(car.path.offsets()[st.step_index]) + float(st.rel_pos)
    return out


def _snapshot_from_floats(
    traffic: CarTraffic, offsets: dict[int, float], speeds: dict[int, float]
) -> WorldSnapshot:
    exact_offsets = {i: Fraction(v) for i, v in offsets.items()}
    exact_speeds = {i: Fraction(v) for i, v in speeds.items()}
    return WorldSnapshot.from_offsets(traffic, exact_offsets, exact_speeds)


def step(state: np.ndarray, action, traffic: CarTraffic,
         defaults: Defaults = DEFAULTS) -> StepOutcome:
    """One deterministic transition.

    Action components map to cars in index order; entries for absent cars are
    ignored.  Episode-step accounting (the 85-step cap) belongs to the caller.
    """
    action = np.asarray(action, dtype=np.float64)
    snapshot = decode_state(state, traffic, defaults)
    v_cap = float(defaults.max_speed)

    offsets = _offsets_of(snapshot, traffic)
    new_offsets: dict[int, float] = {}
    new_speeds: dict[int, float] = {}
    for idx in snapshot.states:
        speed = float(snapshot.states[idx].speed)
        # Component i-1 always belongs to car i; entries for absent cars are
        # ignored, so partial fleets keep their canonical slots.
        comp = idx - 1
        accel = float(action[comp]) if 0 <= comp < len(action) else 0.0
        pos = offsets[idx] + speed
        if pos >= float(traffic.car(idx).goal_offset) - GOAL_TOLERANCE:
            continue  # crossed the end: the car leaves the world
        new_offsets[idx] = pos
        new_speeds[idx] = min(max(speed + accel, 0.0), v_cap)

    if not new_offsets:
        return StepOutcome(
            encode_state(WorldSnapshot({}), traffic, defaults),
            float(defaults.success_reward), True, "success",
        )

    nxt = _snapshot_from_floats(traffic, new_offsets, new_speeds)
    violations = check_collision_rules(nxt, traffic)
    next_state = encode_state(nxt, traffic, defaults)
    if violations:
        cause = "opposite-direction" if violations[0].rule == 3 else "collision"
        return StepOutcome(next_state, float(defaults.collision_reward), True, cause)

    mean_speed = sum(new_speeds.values()) / len(new_speeds)
    clamp = float(defaults.distance_clamp)
    dist = pairwise_distance(nxt, traffic)
    dist_term = clamp if dist is None else min(float(dist), clamp)
    reward = (float(defaults.speed_reward_coef) * mean_speed
              + float(defaults.distance_reward_coef) * dist_term)
    return StepOutcome(next_state, reward, False, "none")


def reset(seed: int, defaults: Defaults = DEFAULTS):
    """Random initial condition; returns (traffic, snapshot, state vector)."""
    traffic, snapshot = random_instance(seed, defaults)
    return traffic, snapshot, encode_state(snapshot, traffic, defaults)


# ---------------------------------------------------------------------------
# Episodes


@dataclass
class TransitionRecord:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    terminated: bool


@dataclass
class Episode:
    records: list[TransitionRecord]
    seed: int | None = None
    source: str = "swa-smt"

    @property
    def cumulative_reward(self) -> float:
        return float(sum(r.reward for r in self.records))

    def __len__(self) -> int:
        return len(self.records)

    def digest(self) -> str:
        h = hashlib.sha256()
        for r in self.records:
            h.update(r.state.tobytes())
            h.update(r.action.tobytes())
            h.update(np.float64(r.reward).tobytes())
            h.update(b"1" if r.terminated else b"0")
        return h.hexdigest()[:16]


class EpisodeError(ValueError):
    pass


def plan_to_episode(
    plan, traffic: CarTraffic,
    seed: int | None = None, source: str = "swa-smt",
    defaults: Defaults = DEFAULTS,
) -> Episode:
    """Drive the environment with the plan's speed schedule.

    The plan's first speeds are the instance's measured speeds, so the first
    recorded state is exactly the reset state; actions are the speed
    differences, and rewards come from the step function itself.
    """
    n = plan.steps
    if n > defaults.max_episode_steps:
        raise EpisodeError(
            f"plan spans {n} steps, episode cap is {defaults.max_episode_steps}"
        )
    width = max(len(IDENTIFIER_CODES), max(c.index for c in traffic.cars))
    speeds = {c: [float(v) for v in plan.speeds[c]] for c in plan.speeds}
    offsets = {c.index: c.initial_offset for c in traffic.cars}
    first = WorldSnapshot.from_offsets(
        traffic, offsets, {c: Fraction(plan.speeds[c][0]) for c in plan.speeds}
    )
    state = encode_state(first, traffic, defaults)

    records: list[TransitionRecord] = []
    for k in range(n):
        action = np.zeros(width, dtype=np.float64)
        for idx in speeds:
            if k + 1 < n:
                action[idx - 1] = speeds[idx][k + 1] - speeds[idx][k]
        outcome = step(state, action, traffic, defaults)
        records.append(TransitionRecord(
            state, action, outcome.reward, outcome.state, outcome.terminated
        ))
        state = outcome.state
        if outcome.terminated:
            if outcome.cause != "success":
                raise EpisodeError(f"plan replay ended in {outcome.cause} at step {k}")
            return Episode(records, seed=seed, source=source)
    raise EpisodeError("plan replay never reached the success terminal")


def replay_episode(episode: Episode, traffic: CarTraffic,
                   defaults: Defaults = DEFAULTS) -> bool:
    """Deterministically re-run the actions; episodes must reproduce exactly."""
    state = episode.records[0].state
    for r in episode.records:
        if not np.array_equal(state, r.state):
            return False
        outcome = step(state, r.action, traffic, defaults)
        if outcome.reward != r.reward or outcome.terminated != r.terminated:
            return False
        if not np.array_equal(outcome.state, r.next_state):
            return False
        state = outcome.state
    return True


# ---------------------------------------------------------------------------
# Dataset files

DATASET_FORMAT = "roadsynth-episodes"
DATASET_VERSION = 1


def export_dataset(path, episodes: list[Episode], defaults: Defaults = DEFAULTS,
                   extra_meta: dict | None = None) -> None:
    """Episodes as JSON lines: a header, then one record per episode.

    Episodes from seeded instances store the seed and the action tape; the
    states are reproduced exactly on import by replaying the deterministic
    step function.  Unseeded episodes embed their instance.
    """
    header = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "network_sha": running_example(defaults).digest(),
        "episodes": len(episodes),
        "transitions": sum(len(e) for e in episodes),
    }
    header.update(extra_meta or {})
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for ep in episodes:
            rec = {
                "seed": ep.seed,
                "source": ep.source,
                "reward": ep.cumulative_reward,
                "len": len(ep),
                "sha": ep.digest(),
                "actions": [[float(x) for x in r.action] for r in ep.records],
                "rewards": [r.reward for r in ep.records],
            }
            if ep.seed is None:
                rec["instance"] = traffic_to_dict(*_episode_instance(ep))
            fh.write(json.dumps(rec) + "\n")


class DatasetError(ValueError):
    pass


def _episode_instance(episode: Episode):
    raise DatasetError("unseeded episodes need an embedded instance")


def import_dataset(path, defaults: Defaults = DEFAULTS) -> tuple[dict, list[Episode]]:
    """Rebuild episodes by replaying their action tapes; hashes must match."""
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("format") != DATASET_FORMAT:
        raise DatasetError(f"not a {DATASET_FORMAT} file")
    header = lines[0]
    if header.get("version") != DATASET_VERSION:
        raise DatasetError(f"unsupported dataset version {header.get('version')}")
    episodes = []
    for rec in lines[1:]:
        if rec.get("seed") is None:
            traffic, snapshot = traffic_from_dict(rec["instance"])
        else:
            traffic, snapshot = random_instance(rec["seed"], defaults)
        state = encode_state(snapshot, traffic, defaults)
        records = []
        for k, action in enumerate(rec["actions"]):
            outcome = step(state, np.asarray(action), traffic, defaults)
            if outcome.reward != rec["rewards"][k]:
                raise DatasetError(
                    f"episode seed={rec.get('seed')}: reward mismatch at step {k}"
                )
            records.append(TransitionRecord(
                state, np.asarray(action, dtype=np.float64),
                outcome.reward, outcome.state, outcome.terminated,
            ))
            state = outcome.state
        ep = Episode(records, seed=rec.get("seed"), source=rec.get("source", "swa-smt"))
        if ep.digest() != rec["sha"]:
            raise DatasetError(f"episode seed={rec.get('seed')}: hash mismatch")
        episodes.append(ep)
    if header["transitions"] != sum(len(e) for e in episodes):
        raise DatasetError("header transition count disagrees with contents")
    return header, episodes
