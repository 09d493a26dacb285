"""
Synthetic drifting streams
==========================

Each generator pairs a sampler with a time-dependent labelling function.
"""

import numpy as np

from enhash import default_spec, generate, stream_stats
from enhash.generators import build_concept

for kind in ("rotating_hyperplane", "moving_squares", "interchanging_rbf",
             "transient_chessboard", "mixed_drift"):
    spec = default_spec(kind, 4000, seed=0)
    desc, inst = generate(spec)
    stats = stream_stats(inst)
    print(f"{kind:22s} d={desc.dimension:2d} classes={len(stats.class_counts):2d} "
          f"drift points={[s for s, _ in spec.drift_schedule]}")

###############################################################################
# How much of the stream would a frozen copy of the first concept get wrong?
# Abrupt swaps show up as jumps, incremental motion as a slow climb.

spec = default_spec("interchanging_rbf", 4000, seed=0)
concept = build_concept(spec)
_, inst = generate(spec)
for lo in range(0, 4000, 500):
    chunk = inst[lo:lo + 500]
    stale = np.mean([concept.concept(i.features, 1) != i.label for i in chunk])
    print(f"steps {lo + 1:5d}-{lo + 500:5d}: frozen concept error {stale:.2f}")
