import time, sys
from fractions import Fraction as F
from roadsynth.network import running_example
from roadsynth.system import SwaSystem
from roadsynth.search import solve_time_optimal, SearchBudget
from roadsynth.refine import *
from roadsynth.smt.solver import LraSolver

n = int(sys.argv[1]) if len(sys.argv) > 1 else 78
hint = len(sys.argv) < 3 or sys.argv[2] != 'nohint'
t9 = running_example()
best9 = solve_time_optimal(SwaSystem(t9), SearchBudget(max_nodes=500000, max_seconds=60))
events9 = extract_events(best9.trace, t9)
speeds0 = {c.index: F(0) for c in t9.cars}
cs = build_constraints(events9, RefinementSpec.from_defaults(n), t9, speeds0)
if not hint:
    cs.problem.hint = None
t0 = time.perf_counter()
r = LraSolver(cs.problem).solve()
print(f'N={n} hint={hint}: {r.status} {time.perf_counter()-t0:.1f}s conf={r.conflicts} dec={r.decisions}', flush=True)
