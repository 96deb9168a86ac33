"""Central knob block.

Every numeric default that the problem statement leaves open lives here, so
that one file documents the whole parameterization.  All distances share one
unit; the abstract layer moves cars at ``NOMINAL_SPEED`` so one time unit of
clock progress equals one distance unit there.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction


def frac(x) -> Fraction:
    """Coerce ints, floats, and 'p/q' strings to an exact Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**9)
    return Fraction(x)


@dataclass(frozen=True)
class Defaults:
    # Geometry of the bundled road network.
    section_length: Fraction = Fraction(30)
    # 30*sqrt(2) rounded to an exact rational (85/2); equality guards need
    # exact arithmetic, and the deviation is < 0.1%.
    diagonal_length: Fraction = Fraction(85, 2)

    # Security distance eps.  Three cars spaced 2*eps must fit before the end
    # of a length-30 section, hence eps < 7.5.
    epsilon: Fraction = Fraction(5)

    # Abstract layer: cars drive at the nominal speed or stand still.  Kept at
    # 1 so clock progress equals distance and guard constants are literal
    # cumulative path offsets.
    nominal_speed: Fraction = Fraction(1)

    # Refined layer and MDP.  V is the car's true speed cap; it exceeds the
    # conservative abstract nominal speed so refined plans can fit the 85-step
    # horizon (paths are up to 162.5 long).
    max_speed: Fraction = Fraction(2)
    max_accel: Fraction = Fraction(1, 4)
    max_decel: Fraction = Fraction(1, 4)
    timing_slack: int = 4          # Delta, steps of lag tolerated per enter event
    safety_gap: Fraction = Fraction(5)   # d, strict gap enforced by refinement
    horizon_cap: int = 85          # largest N tried by the linear search

    # MDP shape and rewards.
    max_episode_steps: int = 85
    success_reward: float = 2000.0
    collision_reward: float = -100.0
    # Per-step shaping: c_v * mean speed + c_d * clamped min pairwise distance.
    # Ceiling: 85 * (c_v*V + c_d*d_clamp) = 85 * 20 = 1700 < 2000, so only a
    # true success can reach a cumulated reward of 2000.
    distance_clamp: Fraction = Fraction(10)   # d_clamp = 2*eps
    speed_reward_coef: float = 5.0            # c_v = 10 / V
    distance_reward_coef: float = 1.0         # c_d = 10 / d_clamp

    # Random instance distribution.
    car_presence_prob: float = 0.8
    position_fraction: Fraction = Fraction(2, 3)  # cars start in this leading part
    random_quantum: Fraction = Fraction(1, 4)     # positions/speeds snap to this

    # Search budgets (stage 1).
    solver_timeout: float = 900.0
    solver_node_budget: int = 2_000_000

    # Pipeline desk-scale budgets per seed.
    pipeline_stage1_timeout: float = 10.0
    pipeline_stage1_nodes: int = 200_000
    pipeline_refine_timeout: float = 60.0


DEFAULTS = Defaults()


def with_overrides(base: Defaults = DEFAULTS, **kw) -> Defaults:
    """Return a copy of *base* with the given fields replaced."""
    coerced = {}
    for key, value in kw.items():
        if value is None:
            continue
        cur = getattr(base, key)
        if isinstance(cur, Fraction):
            coerced[key] = frac(value)
        elif isinstance(cur, int) and not isinstance(cur, bool):
            coerced[key] = int(value)
        elif isinstance(cur, float):
            coerced[key] = float(value)
        else:
            coerced[key] = value
    return replace(base, **coerced)
