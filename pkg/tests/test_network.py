"""Road network model: topology queries, collision rules, instance builders."""

import json
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from roadsynth.config import DEFAULTS
from roadsynth.network import (
    Car,
    CarTraffic,
    Direction,
    DirectedSection,
    Path,
    Section,
    WorldSnapshot,
    check_collision_rules,
    intersections,
    load_instance,
    neighbours,
    pairwise_distance,
    random_instance,
    running_example,
    save_instance,
    traffic_from_dict,
    traffic_to_dict,
)


def up(sec):
    return DirectedSection(sec, Direction.UP)


def down(sec):
    return DirectedSection(sec, Direction.DOWN)


class TestSectionBasics:
    def test_rejects_nonpositive_length(self):
        with pytest.raises(ValueError):
            Section("a", "b", F(0))

    def test_rejects_loop(self):
        with pytest.raises(ValueError):
            Section("a", "a", F(5))

    def test_path_rejects_broken_chain(self):
        s1, s2 = Section("a", "b", F(5)), Section("c", "d", F(5))
        with pytest.raises(ValueError):
            Path((up(s1), up(s2)))

    def test_path_accepts_reversed_link(self):
        s1, s2 = Section("a", "b", F(5)), Section("c", "b", F(5))
        Path((up(s1), down(s2)))  # a>b then b>c via reversal

    def test_car_offset_invariant(self):
        s = Section("a", "b", F(10))
        path = Path((up(s),))
        with pytest.raises(ValueError):
            Car(1, path, F(7), F(7))


class TestNeighbours:
    def test_running_example_neighbour_pair(self):
        # The reversed n4-n6 section and the forward n4-n5 section meet at n4.
        t = running_example()
        n46 = next(s for s in t.sections() if s.key == "n4-n6")
        n45 = next(s for s in t.sections() if s.key == "n4-n5")
        result = neighbours(down(n46), t)
        assert up(n45) in result

    def test_running_example_non_neighbours(self):
        # Forward n4>n6 ends at n6; forward n4>n5 starts at n4: not adjacent.
        t = running_example()
        n46 = next(s for s in t.sections() if s.key == "n4-n6")
        n45 = next(s for s in t.sections() if s.key == "n4-n5")
        assert up(n45) not in neighbours(up(n46), t)

    def test_single_section_traffic_has_none(self):
        s = Section("a", "b", F(10))
        t = CarTraffic([Car(1, Path((up(s),)), F(0), F(10))])
        assert neighbours(up(s), t) == []

    def test_unknown_section_raises(self):
        t = running_example()
        with pytest.raises(ValueError):
            neighbours(up(Section("x", "y", F(1))), t)


class TestIntersections:
    def test_running_example_intersections(self):
        got = {s.key for s in intersections(running_example())}
        assert got == {"n1-n3", "n4-n6", "n5-n8"}

    def test_single_car_none(self):
        s = Section("a", "b", F(10))
        t = CarTraffic([Car(1, Path((up(s),)), F(0), F(10))])
        assert intersections(t) == set()

    def test_identical_paths_share_everything(self):
        s1, s2 = Section("a", "b", F(10)), Section("b", "c", F(10))
        p1 = Path((up(s1), up(s2)))
        p2 = Path((up(s1), up(s2)))
        t = CarTraffic([Car(1, p1, F(0), F(20)), Car(2, p2, F(0), F(20))])
        # Same path contents: a single distinct path, hence no intersections.
        assert intersections(t) == set()

    def test_brute_force_equivalence(self):
        t = running_example()
        paths = t.distinct_paths()
        expected = set()
        for i in range(len(paths)):
            for j in range(len(paths)):
                if i == j:
                    continue
                for a in paths[i]:
                    for b in paths[j]:
                        if a.section == b.section:
                            expected.add(a.section)
        assert intersections(t) == expected


def two_car_line(gap, same_direction=True, eps=F(5)):
    """Two cars on neighbouring 30-sections, the leader *gap* into the second."""
    s1, s2 = Section("a", "b", F(30)), Section("b", "c", F(30))
    path = Path((up(s1), up(s2)))
    cars = [Car(1, path, F(0), F(60)), Car(2, path, F(0), F(60))]
    t = CarTraffic(cars, security_distance=eps)
    return t


class TestCollisionRules:
    def test_rule1_boundary_gap_is_legal(self):
        t = two_car_line(F(5))
        snap = WorldSnapshot.from_offsets(t, {1: F(10), 2: F(5)})
        assert check_collision_rules(snap, t) == []

    def test_rule1_violated_below_epsilon(self):
        t = two_car_line(F(5))
        snap = WorldSnapshot.from_offsets(t, {1: F(10), 2: F(6)})
        v = check_collision_rules(snap, t)
        assert len(v) == 1 and v[0].rule == 1 and v[0].gap == F(4)

    def test_rule3_opposite_directions_any_gap(self):
        s1 = Section("a", "b", F(30))
        s2 = Section("b", "c", F(30))
        s3 = Section("d", "c", F(30))
        p1 = Path((up(s1), up(s2)))
        p2 = Path((up(s3), down(s2)))
        t = CarTraffic([Car(1, p1, F(0), F(60)), Car(2, p2, F(0), F(60))])
        # Car 1 at offset 31 (inside b>c), car 2 at offset 31 (inside c>b).
        snap = WorldSnapshot.from_offsets(t, {1: F(31), 2: F(31)})
        v = check_collision_rules(snap, t)
        assert any(x.rule == 3 for x in v)

    def test_rule2_trailing_across_node(self):
        # Follower eps/4 from the end of the first section, leader eps/4 into
        # the next: separation eps/2 violates rule 2.
        eps = F(5)
        t = two_car_line(None, eps=eps)
        snap = WorldSnapshot.from_offsets(
            t, {1: F(30) + eps / 4, 2: F(30) - eps / 4}
        )
        v = check_collision_rules(snap, t)
        assert len(v) == 1
        assert v[0].rule == 2 and v[0].gap == eps / 2

    def test_rule2_head_on_approach(self):
        s1 = Section("a", "b", F(30))
        s2 = Section("b", "c", F(30))
        s3 = Section("d", "c", F(30))
        p1 = Path((up(s1), up(s2)))
        p2 = Path((up(s3), down(s2)))
        t = CarTraffic([Car(1, p1, F(0), F(60)), Car(2, p2, F(0), F(60))])
        # Car 1 is 2 from the end of b>c; car 2 is 2 from the end of d>c.
        snap = WorldSnapshot.from_offsets(t, {1: F(58), 2: F(28)})
        v = check_collision_rules(snap, t)
        assert any(x.rule == 2 and x.gap == F(4) for x in v)

    @given(st.permutations([1, 2, 3]))
    @settings(max_examples=10, deadline=None)
    def test_rule_symmetry_under_renaming(self, perm):
        s1, s2 = Section("a", "b", F(30)), Section("b", "c", F(30))
        path = Path((up(s1), up(s2)))
        offsets = [F(2), F(4), F(40)]
        cars = [Car(idx, path, F(0), F(60)) for idx in perm]
        t = CarTraffic(cars, security_distance=F(5))
        snap = WorldSnapshot.from_offsets(
            t, {idx: off for idx, off in zip(perm, offsets)}
        )
        violations = check_collision_rules(snap, t)
        pairs = {frozenset((v.car_a, v.car_b)) for v in violations}
        assert pairs == {frozenset((perm[0], perm[1]))}


class TestRunningExample:
    def test_nine_cars(self):
        assert len(running_example().cars) == 9

    def test_twenty_four_sections(self):
        assert len(running_example().sections()) == 24

    def test_diagonal_lengths(self):
        t = running_example()
        for key in ("n3-n4", "n3-n5"):
            sec = next(s for s in t.sections() if s.key == key)
            assert sec.length == DEFAULTS.diagonal_length

    def test_car2_initial_and_goal(self):
        t = running_example()
        car2 = t.car(2)
        eps = t.epsilon
        assert car2.initial_offset == 2 * eps
        # Goal: 2*eps short of the path end (one slot behind car 3 at n11).
        assert car2.goal_offset == car2.path.length - 2 * eps

    def test_initial_positions_clean(self):
        t = running_example()
        snap = WorldSnapshot.from_offsets(
            t, {c.index: c.initial_offset for c in t.cars}
        )
        assert check_collision_rules(snap, t) == []

    def test_paths_well_formed(self):
        for p in running_example().distinct_paths():
            for k in range(len(p) - 1):
                assert p.steps[k + 1].is_successor_of(p.steps[k])


class TestRandomInstance:
    def test_deterministic(self):
        a, _ = random_instance(42)
        b, _ = random_instance(42)
        assert a.canonical_json() == b.canonical_json()

    def test_initial_snapshot_clean(self):
        for seed in range(40):
            t, snap = random_instance(seed)
            assert check_collision_rules(snap, t) == []

    def test_speeds_within_bounds(self):
        for seed in range(20):
            t, snap = random_instance(seed)
            for st_ in snap.states.values():
                assert 0 <= st_.speed <= DEFAULTS.max_speed

    def test_positions_in_leading_two_thirds(self):
        for seed in range(20):
            t, _ = random_instance(seed)
            for car in t.cars:
                assert car.initial_offset < car.path.length * F(2, 3)
                assert car.goal_offset == car.path.length

    def test_presence_fraction(self):
        # Bernoulli(0.8) per car over many seeds.
        total = 0
        for seed in range(2000):
            t, _ = random_instance(seed)
            total += len(t.cars)
        frac = total / (2000 * 9)
        assert 0.78 <= frac <= 0.82


class TestInstanceFiles:
    def test_round_trip(self, tmp_path):
        t, snap = random_instance(7)
        f = tmp_path / "inst.json"
        save_instance(f, t, snap, seed=7)
        t2, snap2 = load_instance(f)
        assert t.canonical_json() == t2.canonical_json()
        for idx in snap.states:
            assert snap.states[idx] == snap2.states[idx]

    def test_rejects_wrong_format(self):
        with pytest.raises(ValueError):
            traffic_from_dict({"format": "something-else"})

    def test_digest_stable(self):
        t = running_example()
        assert t.digest() == running_example().digest()


class TestPairwiseDistance:
    def test_same_section_gap(self):
        t = two_car_line(None)
        snap = WorldSnapshot.from_offsets(t, {1: F(12), 2: F(2)})
        assert pairwise_distance(snap, t) == F(10)

    def test_unrelated_cars_no_distance(self):
        p1 = Path((up(Section("a", "b", F(10))),))
        p2 = Path((up(Section("x", "y", F(10))),))
        t = CarTraffic([Car(1, p1, F(0), F(10)), Car(2, p2, F(0), F(10))])
        snap = WorldSnapshot.from_offsets(t, {1: F(3), 2: F(3)})
        assert pairwise_distance(snap, t) is None
