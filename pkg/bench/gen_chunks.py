import json, sys, time
from roadsynth.pipeline import generate_dataset
from roadsynth.mdp import export_dataset, import_dataset

out = "/root/pkg/bench/dataset700.jsonl"
log = open("/root/pkg/bench/gen_log.txt", "a", buffering=1)
all_eps = []
attempted = succeeded = 0
t0 = time.perf_counter()
for lo in range(0, 700, 100):
    hi = min(lo + 100, 700)
    report, eps = generate_dataset(range(lo, hi), workers=3)
    all_eps.extend(eps)
    attempted += report.attempted
    succeeded += report.succeeded
    export_dataset(out, all_eps)
    log.write(json.dumps({
        "chunk": [lo, hi], "attempted": attempted, "succeeded": succeeded,
        "fraction": round(succeeded / attempted, 4),
        "transitions": sum(len(e) for e in all_eps),
        "minutes": round((time.perf_counter() - t0) / 60, 1),
    }) + "\n")
log.write("DONE\n")
