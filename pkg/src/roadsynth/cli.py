"""Command-line entry points for the whole toolchain.

Exit codes: 0 success, 1 failed validation or internal error, 2 invalid
input, 3 no solution (unreachable goal or unsatisfiable refinement),
4 resource budget exhausted without a result.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from .backends import BuiltinSolver, SolverError, SubprocessSolver
from .config import DEFAULTS, Defaults, with_overrides
from .mdp import decode_state, export_dataset, import_dataset
from .network import (
    load_instance,
    random_instance,
    running_example,
    save_instance,
    WorldSnapshot,
)
from .pipeline import generate_dataset, save_report
from .refine import (
    RefinementSpec,
    extract_events,
    load_plan,
    save_plan,
    solve_refinement,
    trace_digest,
    validate_plan,
)
from .search import SearchBudget, solve_time_optimal
from .system import SwaSystem, load_trace, save_trace

OK, FAIL, BAD_INPUT, NO_SOLUTION, BUDGET = 0, 1, 2, 3, 4


def _defaults_from(args) -> Defaults:
    base = DEFAULTS
    config = getattr(args, "config", None)
    if config:
        with open(config) as fh:
            base = with_overrides(base, **json.load(fh))
    overrides = {}
    for name in ("epsilon", "max_speed", "max_accel", "max_decel",
                 "timing_slack", "horizon_cap"):
        value = getattr(args, name.replace("-", "_"), None)
        if value is not None:
            overrides[name] = value
    return with_overrides(base, **overrides) if overrides else base


def _load(path):
    try:
        return load_instance(path)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot read instance {path}: {exc}", file=sys.stderr)
        raise SystemExit(BAD_INPUT)


def cmd_instance(args) -> int:
    defaults = _defaults_from(args)
    if args.kind == "running-example":
        traffic = running_example(defaults)
        snapshot = WorldSnapshot.from_offsets(
            traffic, {c.index: c.initial_offset for c in traffic.cars}
        )
        seed = None
    else:
        if args.seed is None:
            print("error: --seed is required for random instances", file=sys.stderr)
            return BAD_INPUT
        traffic, snapshot = random_instance(args.seed, defaults)
        seed = args.seed
    save_instance(args.out, traffic, snapshot, seed=seed)
    print(f"wrote {args.out} ({len(traffic.cars)} cars, "
          f"{len(traffic.sections())} sections)")
    return OK


def cmd_solve(args) -> int:
    traffic, _ = _load(args.instance)
    try:
        system = SwaSystem(traffic)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT
    budget = SearchBudget(max_nodes=args.max_nodes, max_seconds=args.timeout)
    best = solve_time_optimal(
        system, budget,
        use_heuristic=not args.no_heuristic,
        use_subsumption=not args.no_subsumption,
    )
    if not best.found:
        if best.optimal:
            print("no accepting run exists")
            return NO_SOLUTION
        print(f"budget exhausted without a trace ({best.nodes} nodes)")
        return BUDGET
    flag = "optimal" if best.optimal else "best-so-far (budget hit)"
    print(f"time {best.time} ({float(best.time):.3f}), {flag}, "
          f"{best.nodes} nodes, {best.elapsed:.2f}s")
    if args.emit_trace:
        save_trace(args.emit_trace, system, best.trace, {
            "optimal_time": str(best.time),
            "optimal": best.optimal,
        })
        print(f"trace written to {args.emit_trace}")
    return OK


def cmd_refine(args) -> int:
    defaults = _defaults_from(args)
    traffic, snapshot = _load(args.instance)
    system = SwaSystem(traffic)
    try:
        _, trace = load_trace(args.trace, system)
    except (OSError, ValueError) as exc:
        print(f"error: cannot read trace: {exc}", file=sys.stderr)
        return BAD_INPUT
    spec = RefinementSpec.from_defaults(1, defaults)
    if args.gap is not None:
        spec = RefinementSpec(
            steps=1, max_speed=spec.max_speed, max_accel=spec.max_accel,
            max_decel=spec.max_decel, timing_slack=spec.timing_slack,
            safety_gap=Fraction(args.gap), horizon_cap=spec.horizon_cap,
        )
    solver = (SubprocessSolver(args.solver_cmd.split())
              if args.solver_cmd else BuiltinSolver())
    speeds = {i: st.speed for i, st in snapshot.states.items()}
    try:
        plan = solve_refinement(
            trace, spec, traffic, solver=solver,
            initial_speeds=speeds, full_pairs=args.full_pairs,
        )
    except SolverError as exc:
        print(f"error: solver transport failure: {exc}", file=sys.stderr)
        return FAIL
    if plan is None:
        print(f"unsatisfiable at every horizon up to {spec.horizon_cap}")
        return NO_SOLUTION
    print(f"feasible at {plan.steps} steps (solver: {solver.name})")
    if args.out:
        save_plan(args.out, plan, traffic, trace_sha=trace_digest(trace))
        print(f"plan written to {args.out}")
    return OK


def cmd_validate(args) -> int:
    traffic, snapshot = _load(args.instance)
    system = SwaSystem(traffic)
    if args.trace:
        try:
            _, trace = load_trace(args.trace, system)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return BAD_INPUT
        result = system.validate_trace(trace)
        if result:
            print("trace valid")
            return OK
        print(f"trace invalid: {result.reason}")
        return FAIL
    try:
        plan = load_plan(args.plan, traffic)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT
    if args.trace_file_for_plan:
        _, trace = load_trace(args.trace_file_for_plan, system)
    else:
        print("error: validating a plan needs --trace-of-plan", file=sys.stderr)
        return BAD_INPUT
    events = extract_events(trace, traffic)
    speeds = {i: st.speed for i, st in snapshot.states.items()}
    result = validate_plan(plan, events, plan.spec, traffic, speeds)
    if result:
        print("plan valid")
        return OK
    print(f"plan invalid: {result.reason}")
    return FAIL


def cmd_gen_dataset(args) -> int:
    defaults = _defaults_from(args)
    seeds = range(args.seed_start, args.seed_start + args.seed_count)

    def progress(done, total, report):
        if args.verbose:
            print(f"[{done}/{total}] seed {report.seed}: {report.outcome}",
                  file=sys.stderr)

    report, episodes = generate_dataset(
        seeds, defaults, workers=args.workers, progress=progress
    )
    export_dataset(args.out, episodes, defaults)
    if args.report:
        save_report(args.report, report)
    transitions = sum(len(e) for e in episodes)
    print(f"attempted {report.attempted} seeds; {report.succeeded} succeeded "
          f"({100 * report.success_fraction:.1f}%); "
          f"{len(episodes)} episodes / {transitions} transitions -> {args.out}")
    return OK


def cmd_serve_env(args) -> int:
    from .envserver import serve

    return serve(defaults=_defaults_from(args))


def cmd_smt_server(args) -> int:
    from .smt.server import main as smt_main

    return smt_main()


def cmd_render(args) -> int:
    from .network import random_instance as _rand

    try:
        header, episodes = import_dataset(args.dataset)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT
    if not (0 <= args.index < len(episodes)):
        print(f"error: episode index {args.index} out of range", file=sys.stderr)
        return BAD_INPUT
    episode = episodes[args.index]
    traffic, _ = _rand(episode.seed) if episode.seed is not None else (None, None)
    if traffic is None:
        print("error: episode has no seed; cannot rebuild its instance",
              file=sys.stderr)
        return BAD_INPUT
    indices = sorted(c.index for c in traffic.cars)
    header_cols = ["step"]
    for idx in indices:
        header_cols += [f"pos_{idx}", f"speed_{idx}"]
    rows = [",".join(header_cols)]
    states = [episode.records[0].state] + [r.next_state for r in episode.records]
    for k, state in enumerate(states):
        snap = decode_state(state, traffic)
        cells = [str(k)]
        for idx in indices:
            if idx in snap.states:
                car = traffic.car(idx)
                st = snap.states[idx]
                absolute = float(car.path.offsets()[st.step_index]) + float(st.rel_pos)
                cells += [f"{absolute:.6g}", f"{float(st.speed):.6g}"]
            else:
                cells += ["", ""]
        rows.append(",".join(cells))
    text = "\n".join(rows) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out} ({len(states)} rows)")
    else:
        sys.stdout.write(text)
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roadsynth",
        description="Plan, refine, and learn multi-car road controllers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("instance", help="write a problem instance file")
    p.add_argument("--kind", choices=["running-example", "random"],
                   default="running-example")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_instance)

    p = sub.add_parser("solve", help="search a time-optimal high-level trace")
    p.add_argument("--instance", required=True)
    p.add_argument("--timeout", type=float, default=DEFAULTS.solver_timeout)
    p.add_argument("--max-nodes", type=int, default=DEFAULTS.solver_node_budget)
    p.add_argument("--no-heuristic", action="store_true")
    p.add_argument("--no-subsumption", action="store_true")
    p.add_argument("--emit-trace")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("refine", help="turn a trace into a feasible speed plan")
    p.add_argument("--instance", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--out")
    p.add_argument("--gap", help="safety gap used by the plan constraints")
    p.add_argument("--solver-cmd",
                   help="external SMT-LIB solver command (default: built-in)")
    p.add_argument("--full-pairs", action="store_true",
                   help="emit the full quadratic order-constraint set")
    p.add_argument("--config")
    p.add_argument("--timing-slack", type=int, dest="timing_slack")
    p.add_argument("--horizon-cap", type=int, dest="horizon_cap")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("validate", help="replay-check a trace or plan")
    p.add_argument("--instance", required=True)
    p.add_argument("--trace")
    p.add_argument("--plan")
    p.add_argument("--trace-of-plan", dest="trace_file_for_plan",
                   help="trace the plan was refined from")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gen-dataset", help="run the pipeline over random seeds")
    p.add_argument("--seed-start", type=int, default=0)
    p.add_argument("--seed-count", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--config")
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("serve-env", help="environment service on stdio")
    p.add_argument("--config")
    p.set_defaults(func=cmd_serve_env)

    p = sub.add_parser("smt-server", help="SMT-LIB 2 solver on stdio")
    p.set_defaults(func=cmd_smt_server)

    p = sub.add_parser("render", help="episode to a per-step position table")
    p.add_argument("--dataset", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_render)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
