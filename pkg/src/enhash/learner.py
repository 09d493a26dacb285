"""Projection-hash ensemble classifier for drifting streams.

Each of the ``L`` estimators quantises the projection ``w . x + bias`` into
buckets of width ``bin_width``.  A bucket keeps a decayed, normalised class
distribution, per-class last-seen steps, and per-class sample sums so that
class means can be used to break ties by distance.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

VARIANTS = ("full", "lambda0", "no_weights")

_CODE_LIMIT = 2.0**63

# rough CPython/numpy object sizes used by the footprint estimate
_BUCKET_BYTES = 4 * 232 + 64
_CLASS_BYTES = 4 * 100 + 112


class ConfigError(ValueError):
    """Raised for invalid learner configuration; lists every offending field."""


@dataclass(frozen=True)
class EnhashConfig:
    num_estimators: int = 10
    bin_width: float = 0.1
    decay_rate: float = 0.015
    seed: int = 0
    variant: str = "full"
    distance_epsilon: float = 1e-9

    def __post_init__(self):
        problems = []
        if not isinstance(self.num_estimators, (int, np.integer)) or self.num_estimators < 1:
            problems.append(f"num_estimators must be an integer >= 1 (got {self.num_estimators!r})")
        if not (self.bin_width > 0 and math.isfinite(self.bin_width)):
            problems.append(f"bin_width must be finite and > 0 (got {self.bin_width!r})")
        if not (self.decay_rate >= 0 and math.isfinite(self.decay_rate)):
            problems.append(f"decay_rate must be finite and >= 0 (got {self.decay_rate!r})")
        if not self.distance_epsilon > 0:
            problems.append(f"distance_epsilon must be > 0 (got {self.distance_epsilon!r})")
        if self.variant not in VARIANTS:
            problems.append(f"variant must be one of {VARIANTS} (got {self.variant!r})")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def effective_decay(self) -> float:
        return 0.0 if self.variant == "lambda0" else float(self.decay_rate)

    @property
    def uses_distance(self) -> bool:
        return self.variant != "no_weights"


def make_variant(config: EnhashConfig, variant: str) -> EnhashConfig:
    """Return ``config`` switched to one of the ablation variants."""
    if variant not in VARIANTS:
        raise ConfigError(f"variant must be one of {VARIANTS} (got {variant!r})")
    if variant == config.variant:
        return config
    return replace(config, variant=variant)


@dataclass(frozen=True)
class ProjectionEstimator:
    weights: np.ndarray
    bias: float
    bin_width: float


def hash_code(estimator: ProjectionEstimator, x) -> int:
    """Bucket index ``floor((w . x + bias) / bin_width)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != estimator.weights.shape:
        raise ValueError(f"expected {estimator.weights.shape[0]} features, got {x.shape}")
    value = math.floor(((estimator.weights * x).sum() + estimator.bias) / estimator.bin_width)
    if not -_CODE_LIMIT <= value < _CODE_LIMIT:
        raise OverflowError(f"hash code {value} for x={x!r} exceeds the 64-bit range")
    return int(value)


def decay_factor(rate: float, dt: float) -> float:
    return 2.0 ** (-rate * dt)


@dataclass
class BucketState:
    counts: dict = field(default_factory=dict)
    tstamp: dict = field(default_factory=dict)
    sample_counts: dict = field(default_factory=dict)
    sample_sums: dict = field(default_factory=dict)


def class_mean(bucket: BucketState, c) -> np.ndarray:
    try:
        return bucket.sample_sums[c] / bucket.sample_counts[c]
    except KeyError:
        raise KeyError(f"class {c!r} has no samples in this bucket") from None


@dataclass
class Prediction:
    label: int
    class_weights: dict


@dataclass
class Footprint:
    buckets_per_estimator: list
    total_buckets: int
    bytes: int


class EnhashModel:
    """Ensemble of projection-hash estimators with decayed bucket statistics.

    ``predict`` scores ``x`` as if it arrived at the next step; ``update``
    advances the step counter and folds ``(x, y)`` into every estimator's
    bucket.  ``process`` does both in prequential order.
    """

    def __init__(self, dimension: int, config: EnhashConfig):
        if dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {dimension}")
        self.dimension = int(dimension)
        self.config = config
        L, bw = config.num_estimators, config.bin_width
        weights = np.empty((L, dimension))
        biases = np.empty(L)
        for l, child in enumerate(np.random.SeedSequence(config.seed).spawn(L)):
            rng = np.random.default_rng(child)
            weights[l] = rng.standard_normal(dimension)
            biases[l] = rng.uniform(-bw, bw)
        self._set_projection(weights, biases)
        self.buckets: list[dict[int, BucketState]] = [{} for _ in range(L)]
        self.class_counts: Counter = Counter()
        self.fallback_class = 0
        self.step = 0

    def _set_projection(self, weights, biases):
        self.weights = np.ascontiguousarray(weights, dtype=np.float64)
        self.biases = np.asarray(biases, dtype=np.float64)
        self.estimators = [
            ProjectionEstimator(self.weights[l], float(self.biases[l]), self.config.bin_width)
            for l in range(len(self.biases))
        ]

    @property
    def classes_seen(self) -> set:
        return set(self.class_counts)

    # -- hashing ---------------------------------------------------------

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dimension,):
            raise ValueError(f"expected {self.dimension} features, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("features must be finite")
        return x

    def _quantise(self, proj: np.ndarray, first_row: int = 0) -> list:
        codes = np.floor((proj + self.biases) / self.config.bin_width)
        ok = np.abs(codes) < _CODE_LIMIT
        if not ok.all():
            where = np.argwhere(~ok)[0]
            detail = f"instance {first_row + where[0] + 1}, estimator {where[-1]}" if codes.ndim == 2 \
                else f"estimator {where[0]}"
            raise OverflowError(f"hash code exceeds the 64-bit range ({detail}); check feature scale and bin_width")
        return codes.astype(np.int64).tolist()

    def hash_codes(self, x) -> list:
        """Codes of ``x`` under every estimator."""
        return self._quantise((self.weights * self._check(x)).sum(axis=1))

    def hash_codes_batch(self, X, chunk: int = 4096) -> list:
        """Per-row codes for a feature matrix; identical to calling ``hash_codes`` row by row."""
        X = np.asarray(X, dtype=np.float64)
        out = []
        for start in range(0, len(X), chunk):
            block = X[start:start + chunk]
            proj = (block[:, None, :] * self.weights[None, :, :]).sum(axis=2)
            out.extend(self._quantise(proj, start))
        return out

    # -- core steps --------------------------------------------------------

    def _score(self, x: np.ndarray, codes, t: int) -> Prediction:
        rate = self.config.effective_decay
        eps = self.config.distance_epsilon
        use_distance = self.config.uses_distance
        weights: dict = {}
        for store, code in zip(self.buckets, codes):
            bucket = store.get(code)
            if bucket is None:
                continue
            decay = decay_factor(rate, t - max(bucket.tstamp.values()))
            for c, p in bucket.counts.items():
                v = decay * p
                if use_distance:
                    diff = x - bucket.sample_sums[c] / bucket.sample_counts[c]
                    v /= max(math.sqrt(math.fsum(diff * diff)), eps)
                weights[c] = weights.get(c, 0.0) + math.log1p(v)
        return Prediction(self._argmax(weights), weights)

    def _argmax(self, weights: dict) -> int:
        if not weights:
            return self.fallback_class
        best = max(weights.values())
        if best <= 0.0:
            return self.fallback_class
        return min(c for c, w in weights.items() if w == best)

    def _learn(self, x: np.ndarray, y: int, codes, t: int):
        rate = self.config.effective_decay
        for store, code in zip(self.buckets, codes):
            bucket = store.get(code)
            if bucket is None:
                bucket = store[code] = BucketState()
            counts = bucket.counts
            if y in bucket.tstamp:
                counts[y] = 1.0 + decay_factor(rate, t - bucket.tstamp[y]) * counts[y]
                bucket.sample_counts[y] += 1
                bucket.sample_sums[y] = bucket.sample_sums[y] + x
            else:
                counts[y] = 1.0
                bucket.sample_counts[y] = 1
                bucket.sample_sums[y] = x.copy()
            total = math.fsum(counts.values())
            for c in counts:
                counts[c] /= total
            bucket.tstamp[y] = t
        self.class_counts[y] += 1
        n, fb = self.class_counts[y], self.fallback_class
        if n > self.class_counts[fb] or (n == self.class_counts[fb] and y < fb):
            self.fallback_class = y

    # -- public API --------------------------------------------------------

    def predict(self, x) -> Prediction:
        """Score ``x`` at step ``self.step + 1`` without changing the model."""
        x = self._check(x)
        return self._score(x, self.hash_codes(x), self.step + 1)

    def update(self, x, y) -> None:
        x = self._check(x)
        y = _as_label(y)
        self.step += 1
        self._learn(x, y, self.hash_codes(x), self.step)

    def process(self, instance) -> Prediction:
        """Test-then-train on one instance whose ``step`` must be ``self.step + 1``."""
        if instance.step != self.step + 1:
            raise ValueError(f"out-of-order instance: step {instance.step}, expected {self.step + 1}")
        x = self._check(instance.features)
        y = _as_label(instance.label)
        codes = self.hash_codes(x)
        t = self.step + 1
        pred = self._score(x, codes, t)
        self.step = t
        self._learn(x, y, codes, t)
        return pred

    def process_batch(self, X, y) -> np.ndarray:
        """Prequential pass over ``(X, y)``; same result as ``process`` per row.

        Returns the predicted labels.
        """
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dimension:
            raise ValueError(f"expected an (n, {self.dimension}) feature matrix, got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        codes = self.hash_codes_batch(X)
        preds = np.empty(len(X), dtype=np.int64)
        for i, label in enumerate(y):
            t = self.step + 1
            preds[i] = self._score(X[i], codes[i], t).label
            self.step = t
            self._learn(X[i], _as_label(label), codes[i], t)
        return preds

    def footprint(self) -> Footprint:
        per = [len(store) for store in self.buckets]
        nbytes = 0
        for store in self.buckets:
            for bucket in store.values():
                nbytes += _BUCKET_BYTES + len(bucket.counts) * (_CLASS_BYTES + 8 * self.dimension)
        nbytes += self.weights.nbytes + self.biases.nbytes
        return Footprint(per, sum(per), nbytes)

    # -- snapshots -----------------------------------------------------------

    def to_snapshot(self) -> dict:
        """Plain-data record of the full model state; floats round-trip exactly through JSON."""
        return {
            "format": "enhash-model/1",
            "config": asdict(self.config),
            "dimension": self.dimension,
            "step": self.step,
            "class_counts": sorted(self.class_counts.items()),
            "fallback_class": self.fallback_class,
            "estimators": [
                {
                    "weights": self.weights[l].tolist(),
                    "bias": float(self.biases[l]),
                    "buckets": [
                        {
                            "code": code,
                            "counts": list(b.counts.items()),
                            "tstamp": list(b.tstamp.items()),
                            "sample_counts": list(b.sample_counts.items()),
                            "sample_sums": [(c, s.tolist()) for c, s in b.sample_sums.items()],
                        }
                        for code, b in store.items()
                    ],
                }
                for l, store in enumerate(self.buckets)
            ],
        }

    @classmethod
    def from_snapshot(cls, record: dict) -> "EnhashModel":
        if record.get("format") != "enhash-model/1":
            raise ValueError(f"unrecognised snapshot format {record.get('format')!r}")
        model = cls.__new__(cls)
        model.dimension = int(record["dimension"])
        model.config = EnhashConfig(**record["config"])
        ests = record["estimators"]
        model._set_projection([e["weights"] for e in ests], [e["bias"] for e in ests])
        model.buckets = []
        for e in ests:
            store = {}
            for b in e["buckets"]:
                store[int(b["code"])] = BucketState(
                    counts={int(c): float(v) for c, v in b["counts"]},
                    tstamp={int(c): int(v) for c, v in b["tstamp"]},
                    sample_counts={int(c): int(v) for c, v in b["sample_counts"]},
                    sample_sums={int(c): np.array(v, dtype=np.float64) for c, v in b["sample_sums"]},
                )
            model.buckets.append(store)
        model.class_counts = Counter({int(c): int(n) for c, n in record["class_counts"]})
        model.fallback_class = int(record["fallback_class"])
        model.step = int(record["step"])
        return model

    def dumps(self) -> str:
        return json.dumps(self.to_snapshot())

    @classmethod
    def loads(cls, text: str) -> "EnhashModel":
        return cls.from_snapshot(json.loads(text))


def _as_label(y) -> int:
    y_int = int(y)
    if y_int != y or y_int < 0:
        raise ValueError(f"class labels must be non-negative integers, got {y!r}")
    return y_int


def init_model(descriptor, config: Optional[EnhashConfig] = None) -> EnhashModel:
    return EnhashModel(descriptor.dimension, config or EnhashConfig())


def predict(model: EnhashModel, x) -> Prediction:
    return model.predict(x)


def update(model: EnhashModel, x, y) -> None:
    model.update(x, y)


def process(model: EnhashModel, instance) -> Prediction:
    return model.process(instance)


def model_footprint(model: EnhashModel) -> Footprint:
    return model.footprint()
