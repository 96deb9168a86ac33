"""Time-optimal reachability over the compiled product system.

Depth-first search with a resumable successor cursor per stack frame, a
subsumption-keyed explored set, and a conservative remaining-time bound used
to prune branches that can no longer beat the incumbent.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass
from fractions import Fraction

from .system import SwaSystem, SystemState, Trace, min_glob_time


@dataclass
class SearchBudget:
    max_nodes: int | None = None
    max_seconds: float | None = None


@dataclass
class BestSolution:
    """Outcome of the search: optimal time plus a witnessing trace.

    ``time`` is None when no accepting run was found (the infinite bound);
    ``optimal`` is False when a resource budget cut the search short, in which
    case the solution is only best-so-far.
    """

    time: Fraction | None = None
    trace: Trace | None = None
    optimal: bool = True
    nodes: int = 0
    elapsed: float = 0.0

    @property
    def found(self) -> bool:
        return self.time is not None


def heuristic_remaining(system: SwaSystem, state: SystemState) -> Fraction:
    """Lower bound on the final time of any completing run through *state*.

    Current global time plus the largest per-car remaining driving time;
    collisions and waiting can only add to it, never subtract.
    """
    return system.to_time(state.time + _remaining_scaled(system, state))


def _remaining_scaled(system: SwaSystem, state: SystemState) -> int:
    worst = 0
    for i in range(len(system.cars)):
        left = system._car_steps[i][-1].end - state.car_clocks[i]
        if left > worst:
            worst = left
    return worst


def keep_exploring(system: SwaSystem, state: SystemState,
                   best: BestSolution, enabled: bool = True) -> bool:
    """False when the conservative bound says *state* cannot beat the incumbent."""
    if not enabled or best.time is None:
        return True
    bound_scaled = state.time + _remaining_scaled(system, state)
    return system.to_time(bound_scaled) < best.time


def trace_of(system: SwaSystem, stack, final_move=None) -> Trace:
    """Assemble the trace along the DFS stack, plus the move that closed it."""
    events = []
    for j in range(1, len(stack)):
        events.append(system.event_of(stack[j - 1][0], stack[j][5]))
    if final_move is not None:
        events.append(system.event_of(stack[-1][0], final_move))
    return events


def solve_time_optimal(
    system: SwaSystem,
    budget: SearchBudget | None = None,
    use_heuristic: bool = True,
    use_subsumption: bool = True,
) -> BestSolution:
    """Depth-first branch-and-bound for the minimum global completion time.

    Accepting states update the incumbent and are never expanded (the global
    clock only grows).  A state whose configuration was already reached at the
    same or an earlier global time is skipped.
    """
    budget = budget or SearchBudget()
    best = BestSolution()
    t0 = _time.perf_counter()
    nodes = 0
    exhausted = True

    # frame: [state, moves, cursor, sleep, taken, incoming_move]
    # ``sleep`` holds moves proven redundant here because an earlier sibling
    # explored a commuting ordering of the same instant; ``taken`` collects
    # the moves actually expanded, which later siblings may put to sleep.
    def new_frame(state, move):
        return [state, system._candidates(state), 0, frozenset(), [], move]

    stack: list[list] = [new_frame(system.initial, None)]
    # config -> (earliest global time seen, sleep set it was expanded with)
    explored: dict = {system.initial.config_key(): (0, frozenset())}

    while stack:
        if budget.max_nodes is not None and nodes >= budget.max_nodes:
            exhausted = False
            break
        if budget.max_seconds is not None and nodes % 512 == 0:
            if _time.perf_counter() - t0 > budget.max_seconds:
                exhausted = False
                break

        frame = stack[-1]
        state, moves, cursor, sleep, taken, _ = frame
        if cursor >= len(moves):
            stack.pop()
            continue
        move = moves[cursor]
        frame[2] = cursor + 1
        # A slept entry covers only the zero-delay firing of that move; the
        # same automaton may still offer distinct anticipatory delays.
        if move[0] == 0 and (move[1], move[2]) in sleep:
            continue
        next_state = system.apply_move(state, move)
        nodes += 1

        if system.is_final(next_state):
            finish = min_glob_time(system, next_state)
            if best.time is None or finish < best.time:
                best.time = finish
                best.trace = trace_of(system, stack, move)
            taken.append(move)
            continue

        child_sleep = frozenset(
            (m[1], m[2]) for m in taken
            if system.moves_independent(state, m, move)
        ) | frozenset(
            s for s in sleep
            if any(m[0] == 0 and (m[1], m[2]) == s
                   and system.moves_independent(state, m, move)
                   for m in moves)
        )
        taken.append(move)

        if use_subsumption:
            key = next_state.config_key()
            seen = explored.get(key)
            # Prune only when the cached visit was no later and explored at
            # least as many moves (its sleep set was a subset of ours).
            if seen is not None and seen[0] <= next_state.time and seen[1] <= child_sleep:
                continue
            explored[key] = (next_state.time, child_sleep)

        if not keep_exploring(system, next_state, best, enabled=use_heuristic):
            continue
        if system.is_doomed(next_state):
            continue

        child = new_frame(next_state, move)
        child[3] = child_sleep
        stack.append(child)

    best.optimal = exhausted and best.found
    best.nodes = nodes
    best.elapsed = _time.perf_counter() - t0
    return best
