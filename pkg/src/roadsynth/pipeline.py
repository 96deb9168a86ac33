"""Batch dataset generation: the full three-stage run per random seed.

Per seed: sample the instance, search for a time-optimal trace under a
budget, refine it into a feasible speed plan, replay the plan into an
episode.  Failures at any stage are recorded, never fatal; the report keeps
per-seed outcomes and the overall success fraction.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from .config import DEFAULTS, Defaults
from .mdp import Episode, EpisodeError, plan_to_episode
from .network import random_instance
from .refine import RefinementSpec, solve_refinement
from .search import SearchBudget, solve_time_optimal
from .system import SwaSystem


@dataclass
class SeedReport:
    seed: int
    outcome: str                 # ok | build-failed | no-trace | no-plan | replay-failed
    cars: int = 0
    stage1_seconds: float = 0.0
    stage1_nodes: int = 0
    trace_time: str | None = None
    trace_optimal: bool = False
    stage2_seconds: float = 0.0
    plan_steps: int | None = None
    episode_reward: float | None = None


@dataclass
class PipelineReport:
    attempted: int
    succeeded: int
    seeds: list[SeedReport] = field(default_factory=list)

    @property
    def success_fraction(self) -> float:
        return self.succeeded / self.attempted if self.attempted else 0.0

    def to_dict(self) -> dict:
        return {
            "attempted": self.attempted,
            "succeeded": self.succeeded,
            "success_fraction": self.success_fraction,
            "seeds": [asdict(s) for s in self.seeds],
        }


def run_seed(seed: int, defaults: Defaults = DEFAULTS) -> tuple[SeedReport, Episode | None]:
    """One full pipeline pass; never raises for per-instance failures."""
    report = SeedReport(seed=seed, outcome="ok")
    traffic, snapshot = random_instance(seed, defaults)
    report.cars = len(traffic.cars)
    if not traffic.cars:
        # Nobody present: trivially nothing to do; count as a success with an
        # empty episode is meaningless, so record it as unsolved work.
        report.outcome = "no-cars"
        return report, None
    try:
        system = SwaSystem(traffic)
    except ValueError:
        report.outcome = "build-failed"
        return report, None

    t0 = time.perf_counter()
    best = solve_time_optimal(
        system,
        SearchBudget(
            max_nodes=defaults.pipeline_stage1_nodes,
            max_seconds=defaults.pipeline_stage1_timeout,
        ),
    )
    report.stage1_seconds = time.perf_counter() - t0
    report.stage1_nodes = best.nodes
    if not best.found:
        report.outcome = "no-trace"
        return report, None
    report.trace_time = str(best.time)
    report.trace_optimal = best.optimal

    speeds = {i: st.speed for i, st in snapshot.states.items()}
    t0 = time.perf_counter()
    try:
        plan = solve_refinement(
            best.trace, RefinementSpec.from_defaults(1, defaults), traffic,
            initial_speeds=speeds,
            timeout=defaults.pipeline_refine_timeout,
        )
    except Exception:
        plan = None
    report.stage2_seconds = time.perf_counter() - t0
    if plan is None:
        report.outcome = "no-plan"
        return report, None
    report.plan_steps = plan.steps

    try:
        episode = plan_to_episode(plan, traffic, seed=seed, defaults=defaults)
    except EpisodeError:
        report.outcome = "replay-failed"
        return report, None
    report.episode_reward = episode.cumulative_reward
    return report, episode


def generate_dataset(
    seeds, defaults: Defaults = DEFAULTS, workers: int = 1, progress=None
) -> tuple[PipelineReport, list[Episode]]:
    seeds = list(seeds)
    reports: list[SeedReport] = []
    episodes: list[Episode] = []
    if workers <= 1:
        results = (run_seed(s, defaults) for s in seeds)
        for n, (report, episode) in enumerate(results):
            reports.append(report)
            if episode is not None:
                episodes.append(episode)
            if progress:
                progress(n + 1, len(seeds), report)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_seed, s, defaults) for s in seeds]
            for n, fut in enumerate(futures):
                report, episode = fut.result()
                reports.append(report)
                if episode is not None:
                    episodes.append(episode)
                if progress:
                    progress(n + 1, len(seeds), report)
    reports.sort(key=lambda r: r.seed)
    episodes.sort(key=lambda e: e.seed if e.seed is not None else -1)
    report = PipelineReport(
        attempted=len(seeds),
        succeeded=sum(1 for r in reports if r.outcome == "ok"),
        seeds=reports,
    )
    return report, episodes


def save_report(path, report: PipelineReport) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=1)
        fh.write("\n")
