"""Enhash: a projection-hash ensemble for classifying drifting data streams.

Submodules:

- :mod:`enhash.stream` -- instances, descriptors and CSV ingestion
- :mod:`enhash.learner` -- the ensemble and its ablation variants
- :mod:`enhash.generators` -- synthetic drifting streams
- :mod:`enhash.metrics` -- prequential evaluation, Kappa statistics, RAM-hours
- :mod:`enhash.bench` -- repeated runs, sweeps and result tables
"""

from .generators import GeneratorSpec, default_spec, generate
from .learner import (
    BucketState,
    ConfigError,
    EnhashConfig,
    EnhashModel,
    Prediction,
    ProjectionEstimator,
    class_mean,
    decay_factor,
    hash_code,
    init_model,
    make_variant,
    model_footprint,
    predict,
    process,
    update,
)
from .metrics import Outcome, RunReport, error_rate, kappa_m, kappa_t, prequential_run, ram_hours
from .stream import LabeledInstance, StreamDescriptor, load_csv_stream, stream_stats

__version__ = "0.1.0"
