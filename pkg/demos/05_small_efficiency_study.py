"""Miniature version of the estimator-comparison study.

Twelve paired replications per error law (the real presets use 100 or
300); outputs land in demos/out/study/.

Run:  python demos/05_small_efficiency_study.py
"""

import time
from pathlib import Path

import semibvm as sb
from semibvm.harness import ExperimentConfig, emit_table, run_table1

out = Path(__file__).parent / "out" / "study"
cfg = ExperimentConfig(
    scenario="table1",
    laws=("E1", "E2"),
    replications=12,
    estimators=("F", "B1", "B2"),
    sampler=sb.SamplerConfig(iterations=3000, burn_in=1000),
    threads=2,
    master_seed=2024,
)

start = time.time()
table = run_table1(cfg)
print(f"12 paired replications x 2 laws in {time.time() - start:.0f}s\n")
print(f"{'law':>4} {'estimator':>9} {'MSE':>8} {'rel.eff':>8}")
for row in table.rows():
    print(f"{row['law']:>4} {row['estimator']:>9} "
          f"{row['mse']:8.4f} {row['rel_eff']:8.2f}")

for path in emit_table(table, str(out)):
    print("wrote", path)
