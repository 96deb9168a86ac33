"""Environment semantics: encoding, transitions, rewards, episodes, datasets."""

from fractions import Fraction as F

import numpy as np
import pytest

from roadsynth.config import DEFAULTS
from roadsynth.mdp import (
    EncodingError,
    Episode,
    EpisodeError,
    decode_state,
    encode_state,
    export_dataset,
    import_dataset,
    plan_to_episode,
    replay_episode,
    reset,
    state_dim,
    step,
)
from roadsynth.network import (
    Car,
    CarTraffic,
    Direction,
    DirectedSection,
    Path,
    Section,
    WorldSnapshot,
    random_instance,
    running_example,
)
from roadsynth.refine import RefinementSpec, solve_refinement
from roadsynth.search import SearchBudget, solve_time_optimal
from roadsynth.system import SwaSystem


def up(sec):
    return DirectedSection(sec, Direction.UP)


class TestEncoding:
    def test_state_dim_of_bundled_network(self):
        assert state_dim(running_example()) == 720

    def test_empty_world_is_all_zero(self):
        t = running_example()
        vec = encode_state(WorldSnapshot({}), t)
        assert vec.shape == (720,)
        assert not vec.any()

    def test_single_car_slot_contents(self):
        sec = Section("a", "b", F(30))
        path = Path((up(sec),))
        t = CarTraffic([Car(1, path, F(0), F(30))])
        snap = WorldSnapshot.from_offsets(t, {1: F(10)}, {1: DEFAULTS.max_speed})
        vec = encode_state(snap, t)
        # Slot 0 of the only section: position 10, velocity 1 (normalized),
        # identifier (-1,-1), presence 1.
        assert vec[:5].tolist() == [10.0, 1.0, -1.0, -1.0, 1.0]
        assert not vec[5:].any()

    def test_round_trip_over_random_instances(self):
        for seed in range(25):
            t, snap = random_instance(seed)
            back = decode_state(encode_state(snap, t), t)
            assert back.states.keys() == snap.states.keys()
            for i in snap.states:
                assert float(back.states[i].rel_pos) == float(snap.states[i].rel_pos)
                assert float(back.states[i].speed) == float(snap.states[i].speed)

    def test_descending_position_slot_order(self):
        sec = Section("a", "b", F(40))
        path = Path((up(sec),))
        t = CarTraffic([Car(1, path, F(0), F(40)), Car(2, path, F(0), F(40))])
        snap = WorldSnapshot.from_offsets(t, {1: F(5), 2: F(25)})
        vec = encode_state(snap, t)
        assert vec[0] == 25.0    # car 2 leads, slot 0
        assert vec[5] == 5.0     # car 1 behind, slot 1

    def test_nearby_cars_share_or_neighbour_sections(self):
        # The stated point of the sparse layout: cars close on the road are
        # findable through the same or adjacent sections' slots.
        eps = DEFAULTS.epsilon
        for seed in range(15):
            t, snap = random_instance(seed)
            present = snap.cars()
            for i in range(len(present)):
                for j in range(i + 1, len(present)):
                    a, b = present[i], present[j]
                    sec_a = t.car(a).path.steps[snap.states[a].step_index]
                    sec_b = t.car(b).path.steps[snap.states[b].step_index]
                    from roadsynth.network import pairwise_distance

                    pair = WorldSnapshot({a: snap.states[a], b: snap.states[b]})
                    dist = pairwise_distance(pair, t)
                    if dist is None or dist > 2 * eps:
                        continue
                    same = sec_a.section == sec_b.section
                    adjacent = (
                        {sec_a.begin, sec_a.end} & {sec_b.begin, sec_b.end} != set()
                    )
                    assert same or adjacent

    def test_overflow_raises(self):
        sec = Section("a", "b", F(100))
        path = Path((up(sec),))
        cars = [Car(i, path, F(0), F(100)) for i in range(1, 8)]
        t = CarTraffic(cars)
        snap = WorldSnapshot.from_offsets(t, {i: F(10 * i) for i in range(1, 8)})
        with pytest.raises(EncodingError):
            encode_state(snap, t)


class TestStep:
    def test_all_done_pays_success(self):
        t = running_example()
        empty = encode_state(WorldSnapshot({}), t)
        out = step(empty, np.zeros(9), t)
        assert out.terminated and out.cause == "success"
        assert out.reward == float(DEFAULTS.success_reward)

    def test_collision_pays_penalty(self):
        sec = Section("a", "b", F(60))
        path = Path((up(sec),))
        t = CarTraffic([Car(1, path, F(0), F(60)), Car(2, path, F(0), F(60))])
        snap = WorldSnapshot.from_offsets(
            t, {1: F(20), 2: F(10)}, {1: F(0), 2: F(2)}
        )
        # Car 2 closes 2 per step on the parked car 1; the gap drops under
        # epsilon on the third step.
        out = step(encode_state(snap, t), np.zeros(2), t)
        for _ in range(3):
            if out.terminated:
                break
            out = step(out.state, np.zeros(2), t)
        assert out.terminated and out.cause == "collision"
        assert out.reward == float(DEFAULTS.collision_reward)

    def test_opposite_direction_cause(self):
        s_ab = Section("a", "b", F(30))
        s_bc = Section("b", "c", F(30))
        s_dc = Section("d", "c", F(30))
        p1 = Path((up(s_ab), up(s_bc)))
        p2 = Path((up(s_dc), DirectedSection(s_bc, Direction.DOWN)))
        t = CarTraffic([Car(1, p1, F(0), F(60)), Car(2, p2, F(0), F(60))])
        snap = WorldSnapshot.from_offsets(
            t, {1: F(29), 2: F(29)}, {1: F(2), 2: F(2)}
        )
        out = step(encode_state(snap, t), np.zeros(2), t)
        assert out.terminated and out.cause == "opposite-direction"

    def test_zero_speeds_reward_is_distance_term_only(self):
        p1 = Path((up(Section("a", "b", F(30))),))
        p2 = Path((up(Section("x", "y", F(30))),))
        t = CarTraffic([Car(1, p1, F(0), F(30)), Car(2, p2, F(0), F(30))])
        snap = WorldSnapshot.from_offsets(t, {1: F(5), 2: F(5)})
        out = step(encode_state(snap, t), np.zeros(2), t)
        # Unrelated cars: the clamped distance term alone.
        expected = float(DEFAULTS.distance_reward_coef) * float(DEFAULTS.distance_clamp)
        assert not out.terminated
        assert out.reward == expected

    def test_speed_clamped_to_bounds(self):
        path = Path((up(Section("a", "b", F(100))),))
        t = CarTraffic([Car(1, path, F(0), F(100))])
        snap = WorldSnapshot.from_offsets(t, {1: F(10)}, {1: F(2)})
        out = step(encode_state(snap, t), np.array([50.0]), t)
        back = decode_state(out.state, t)
        assert float(back.states[1].speed) == float(DEFAULTS.max_speed)
        out2 = step(out.state, np.array([-50.0]), t)
        back2 = decode_state(out2.state, t)
        assert float(back2.states[1].speed) == 0.0

    def test_determinism(self):
        t, _, state = reset(11)
        a = np.linspace(-0.2, 0.2, 9)
        o1 = step(state, a, t)
        o2 = step(state, a, t)
        assert np.array_equal(o1.state, o2.state) and o1.reward == o2.reward

    def test_reward_ceiling_analytically(self):
        per_step = (float(DEFAULTS.speed_reward_coef) * float(DEFAULTS.max_speed)
                    + float(DEFAULTS.distance_reward_coef) * float(DEFAULTS.distance_clamp))
        assert DEFAULTS.max_episode_steps * per_step < float(DEFAULTS.success_reward)


class TestReset:
    def test_matches_random_instance(self):
        t, snap, state = reset(21)
        t2, snap2 = random_instance(21)
        assert t.canonical_json() == t2.canonical_json()
        assert np.array_equal(state, encode_state(snap2, t2))


def small_plan_episode(seed=4):
    traffic, snap = random_instance(seed)
    best = solve_time_optimal(SwaSystem(traffic),
                              SearchBudget(max_nodes=300000, max_seconds=15))
    assert best.found
    speeds = {i: st.speed for i, st in snap.states.items()}
    plan = solve_refinement(best.trace, RefinementSpec.from_defaults(1),
                            traffic, initial_speeds=speeds)
    assert plan is not None
    return traffic, plan


class TestEpisodes:
    def test_plan_episode_succeeds_with_big_reward(self):
        traffic, plan = small_plan_episode()
        ep = plan_to_episode(plan, traffic, seed=4)
        assert ep.cumulative_reward >= float(DEFAULTS.success_reward)
        assert ep.records[-1].terminated
        assert len(ep) <= DEFAULTS.max_episode_steps

    def test_episode_replays_exactly(self):
        traffic, plan = small_plan_episode()
        ep = plan_to_episode(plan, traffic, seed=4)
        assert replay_episode(ep, traffic)

    def test_first_state_is_reset_state(self):
        traffic, plan = small_plan_episode()
        ep = plan_to_episode(plan, traffic, seed=4)
        _, _, state0 = reset(4)
        assert np.array_equal(ep.records[0].state, state0)

    def test_single_car_trivial_plan(self):
        path = Path((up(Section("a", "b", F(30))),))
        t = CarTraffic([Car(1, path, F(0), F(30))])
        best = solve_time_optimal(SwaSystem(t))
        spec = RefinementSpec(steps=1, max_speed=F(2), max_accel=F(2),
                              max_decel=F(2), timing_slack=4, safety_gap=F(5),
                              horizon_cap=85)
        plan = solve_refinement(best.trace, spec, t, initial_speeds={1: F(0)})
        ep = plan_to_episode(plan, t)
        assert len(ep) == plan.steps
        assert ep.records[-1].terminated

    def test_too_long_plan_rejected(self):
        traffic, plan = small_plan_episode()
        plan.spec = RefinementSpec(
            steps=DEFAULTS.max_episode_steps + 1, max_speed=F(2), max_accel=F(1, 4),
            max_decel=F(1, 4), timing_slack=4, safety_gap=F(5), horizon_cap=120,
        )
        plan.speeds = {c: row + [row[-1]] * (plan.spec.steps - len(row))
                       for c, row in plan.speeds.items()}
        with pytest.raises(EpisodeError):
            plan_to_episode(plan, traffic)


class TestDataset:
    def test_round_trip_identity(self, tmp_path):
        traffic, plan = small_plan_episode()
        ep = plan_to_episode(plan, traffic, seed=4)
        f = tmp_path / "ds.jsonl"
        export_dataset(f, [ep])
        header, episodes = import_dataset(f)
        assert header["episodes"] == 1
        assert header["transitions"] == len(ep)
        assert episodes[0].digest() == ep.digest()

    def test_corrupt_rewards_detected(self, tmp_path):
        traffic, plan = small_plan_episode()
        ep = plan_to_episode(plan, traffic, seed=4)
        f = tmp_path / "ds.jsonl"
        export_dataset(f, [ep])
        lines = f.read_text().splitlines()
        import json as _json
        rec = _json.loads(lines[1])
        rec["rewards"][0] += 1.0
        f.write_text(lines[0] + "\n" + _json.dumps(rec) + "\n")
        with pytest.raises(ValueError):
            import_dataset(f)

    def test_wrong_format_rejected(self, tmp_path):
        f = tmp_path / "ds.jsonl"
        f.write_text('{"format": "other"}\n')
        with pytest.raises(ValueError):
            import_dataset(f)
