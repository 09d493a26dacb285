"""
Ablation: decay and distance weighting
======================================

Compare the full learner against copies without decay and without
distance weighting on a chessboard whose fields are revealed one by one.
"""

from enhash.bench import ExperimentConfig, emit_report, run
from enhash.generators import default_spec, generate
from enhash.learner import VARIANTS, EnhashConfig

spec = default_spec("transient_chessboard", 20_000, seed=0)
stream = generate(spec)

rows = []
for variant in VARIANTS:
    cfg = ExperimentConfig(generator=spec, learner=EnhashConfig(variant=variant), seeds=[0, 1, 2],
                           metering=False, name=variant)
    rows += run(cfg, stream=stream)[1]

print(emit_report(rows, "markdown"))
