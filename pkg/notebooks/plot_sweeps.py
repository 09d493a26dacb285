"""
Hyperparameter sweeps
=====================

Ensemble size trades time for accuracy; bin width trades memory for detail.
"""

from enhash.bench import ExperimentConfig, sweep
from enhash.generators import default_spec
from enhash.learner import EnhashConfig

base = ExperimentConfig(generator=default_spec("moving_squares", 5000, seed=0),
                        learner=EnhashConfig(), seeds=[0, 1], metering=False)

print("L sweep")
for row in sweep(base, "L", [2, 6, 10, 14]):
    print(f"  L={row['value']:2d} error {100 * row['error']:.2f}%  time {row['wall_time']:.2f}s")

print("bin width sweep")
for row in sweep(base, "bin_width", [0.0001, 0.001, 0.01, 0.1, 0.5]):
    print(f"  bw={row['value']:<7g} error {100 * row['error']:.2f}%  buckets {row['buckets']:g}")
