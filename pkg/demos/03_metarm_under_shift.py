"""
Keeping the MetaRM current
==========================

At step 50 the gold arguments are permuted, so what counts as a good critique
changes. A MetaRM frozen after its cold start keeps grading by the old rules;
one refreshed every step from the human-critique stream catches up.
"""

import numpy as np

from critique_rl.data import GeneratorConfig, generate_environment
from critique_rl.training import TrainConfig, run_experiment

env, samples = generate_environment(GeneratorConfig(universe_size=6, n_samples=250, shift_steps=(50,)), seed=1)

curves = {}
for regime in ("offline_metarm", "online_metarm"):
    metrics = run_experiment(TrainConfig(regime=regime, steps=100, seed=1), env, samples).metrics
    curves[regime] = np.array([m.metarm_mae_vs_oracle for m in metrics])

for lo, hi in ((40, 50), (50, 60), (90, 100)):
    row = "  ".join(f"{k} {v[lo:hi].mean():.3f}" for k, v in curves.items())
    print(f"steps {lo + 1:3d}-{hi:3d}: MAE vs oracle reward  {row}")

# %%
# To draw the curves, write each run's metrics.csv and call
# critique_rl.report.emit_report on them.
