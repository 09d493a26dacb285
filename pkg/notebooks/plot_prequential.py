"""
Prequential evaluation with Kappa statistics
============================================

Test-then-train over a drifting stream, with per-window error.
"""

from enhash import EnhashConfig, EnhashModel, default_spec, generate, prequential_run

desc, inst = generate(default_spec("interchanging_rbf", 10_000, seed=0))
model = EnhashModel(desc.dimension, EnhashConfig())
report = prequential_run(model, inst, window=1000)

print(report.to_lines())

###############################################################################
# Error spikes right after each swap and recovers as old buckets decay.

for step, err in report.window_trace:
    print(f"{step:6d}  {'#' * int(100 * err):s} {100 * err:.1f}%")
