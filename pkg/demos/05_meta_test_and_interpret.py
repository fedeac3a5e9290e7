"""Meta-testing a trained policy and reading out what it learned.

Loads the checkpoint produced by 04_train_smoke.py (run that first),
compares the policy against random search on a small held-out suite under a
shared evaluation budget, and prints the top-5 table of generated rules on
a fresh instance.
"""

from pathlib import Path

import numpy as np

from symbopt import (interpret, load_checkpoint, normalize_session,
                     run_baseline, run_policy_method)
from symbopt.problems import (generate_manifest_entries, instance_from_seed,
                              load_manifest, save_manifest)

ckpt_path = Path("smoke_run/checkpoint_final.bin")
if not ckpt_path.exists():
    raise SystemExit("run 04_train_smoke.py first to produce smoke_run/")
ck = load_checkpoint(ckpt_path)
print(f"loaded checkpoint at training step {ck.step} (seed {ck.seed})")

# Held-out suite: 6 shifted/rotated 2-D instances, fixed by the suite seed.
save_manifest("heldout.json", generate_manifest_entries(6, dim=2, seed=99))
suite = load_manifest("heldout.json")

budget, ps, runs = 800, 10, 3
policy_vals = run_policy_method(ck.params, ck.critic, suite, runs=runs,
                                budget=budget, ps=ps, seed=11)
rs_vals = run_baseline("RS", suite, runs=runs, budget=budget, ps=ps, seed=11)
de_vals = run_baseline("DE", suite, runs=runs, budget=budget, ps=ps, seed=11)

reports = normalize_session({"policy": policy_vals, "RS": rs_vals,
                             "DE": de_vals})
print(f"\nsession-normalized performance (budget {budget} evaluations):")
for method, rep in reports.items():
    print(f"  {method:6s} performance={rep.performance:.4f} obj={rep.obj:.4f}")

# Which rules does the policy actually emit?  Count canonical strings over
# 20 seeded runs on one instance.
problem = instance_from_seed("Rastrigin", 2, seed=123)
freq = interpret(ck.params, ck.critic, problem, runs=20, horizon=30,
                 ps=10, seed=5)
print(f"\ntop rules over {freq.total} generations:")
print(freq.format_table())
