"""Synthetic drifting streams shaped like the standard drift benchmarks.

Every generator pairs a sampler with a ground-truth ``concept(x, t)``; the
label stored on an instance is exactly ``concept(x, step)`` unless label
noise is requested.  Drift schedules are lists of ``(start_step, params)``
pairs whose meaning depends on the kind:

``rotating_hyperplane``
    params ``rate`` (radians per step, from ``start_step`` on) and ``jump``
    (radians added at ``start_step``).  Label is the side of a hyperplane
    through the centre of the unit cube.
``moving_squares``
    params ``rate``: angular speed of the four squares orbiting the centre
    of the unit square.  Label is the nearest square centre.
``interchanging_rbf``
    params ``swap``: optional pair of class ids whose blob centres are
    exchanged at ``start_step`` (a seeded random pair otherwise).  Centres
    sit on a jittered grid; ``spread`` is the blob standard deviation.
    Label is the nearest current centre.
``transient_chessboard``
    params ``reveal``: number of steps each field is shown on its own before
    the whole board is sampled.  The board labelling never changes.
``mixed_drift``
    interchanging blobs, moving squares and a transient chessboard
    interleaved in disjoint regions of the plane, each with its own label
    range.  Schedule entries are routed by their params (``rate`` to the
    squares, ``reveal`` to the board, everything else is a blob swap).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .stream import StreamDescriptor, make_instances, write_csv_stream

KINDS = ("rotating_hyperplane", "moving_squares", "interchanging_rbf", "transient_chessboard", "mixed_drift")

# (num_samples, dimension, num_classes) of the published benchmark files
FULL_SCALE = {
    "transient_chessboard": (200_000, 2, 8),
    "rotating_hyperplane": (200_000, 10, 2),
    "mixed_drift": (600_000, 2, 15),
    "moving_squares": (200_000, 2, 4),
    "interchanging_rbf": (200_000, 2, 15),
    "inter_rbf_20d": (201_000, 20, 15),
}


class GeneratorError(ValueError):
    pass


@dataclass
class GeneratorSpec:
    kind: str
    num_samples: int = 20_000
    dimension: int = 2
    num_classes: int = 2
    drift_schedule: list = field(default_factory=list)
    seed: int = 0
    noise: float = 0.0
    spread: float = 0.05

    def validate(self):
        problems = []
        if self.kind not in KINDS:
            problems.append(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if self.num_samples < 1:
            problems.append("num_samples must be >= 1")
        if self.dimension < 1:
            problems.append("dimension must be >= 1")
        if not 0.0 <= self.noise < 1.0:
            problems.append("noise must be in [0, 1)")
        if self.spread < 0:
            problems.append("spread must be >= 0")
        starts = [s for s, _ in self.drift_schedule]
        if any(s < 1 for s in starts) or starts != sorted(starts):
            problems.append("drift_schedule start steps must be >= 1 and nondecreasing")
        k, d, c = self.kind, self.dimension, self.num_classes
        if k == "rotating_hyperplane":
            if d < 2:
                problems.append("rotating_hyperplane needs dimension >= 2")
            if c != 2:
                problems.append("rotating_hyperplane has exactly 2 classes")
        elif k == "moving_squares":
            if d != 2 or c != 4:
                problems.append("moving_squares requires dimension=2 and num_classes=4")
        elif k == "interchanging_rbf":
            if c < 2:
                problems.append("interchanging_rbf needs num_classes >= 2")
        elif k == "transient_chessboard":
            if d != 2:
                problems.append("transient_chessboard requires dimension=2")
            if c < 2:
                problems.append("transient_chessboard needs num_classes >= 2")
        elif k == "mixed_drift":
            if d != 2:
                problems.append("mixed_drift requires dimension=2")
            if c < 8:
                problems.append("mixed_drift needs num_classes >= 8 (4 squares + board + blobs)")
        if problems:
            raise GeneratorError("; ".join(problems))
        return self

    def to_record(self) -> str:
        """One-line JSON record, embeddable in experiment configs."""
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_record(cls, text: str) -> "GeneratorSpec":
        data = json.loads(text)
        data["drift_schedule"] = [(int(s), dict(p)) for s, p in data.get("drift_schedule", [])]
        return cls(**data)


def default_spec(kind: str, num_samples: int = 20_000, seed: int = 0, drifts: int = 4, **overrides) -> GeneratorSpec:
    """Benchmark-shaped spec with ``drifts`` evenly spaced drift events."""
    if kind == "inter_rbf_20d":
        kind, d, c = "interchanging_rbf", 20, 15
    else:
        if kind not in FULL_SCALE:
            raise GeneratorError(f"unknown kind {kind!r}")
        _, d, c = FULL_SCALE[kind]
    points = [num_samples * (i + 1) // (drifts + 1) + 1 for i in range(drifts)]
    if kind == "rotating_hyperplane":
        schedule = [(1, {"rate": 0.0})] + [(p, {"jump": math.pi / 2, "rate": 0.0}) for p in points]
    elif kind == "moving_squares":
        schedule = [(1, {"rate": 2 * math.pi / max(num_samples, 1)})]
    elif kind == "interchanging_rbf":
        schedule = [(p, {}) for p in points]
    elif kind == "transient_chessboard":
        schedule = [(1, {"reveal": max(1, num_samples // 32)})]
    else:
        schedule = [(p, {}) for p in points]
    spec = GeneratorSpec(kind=kind, num_samples=num_samples, dimension=d, num_classes=c,
                         drift_schedule=schedule, seed=seed)
    for key, value in overrides.items():
        setattr(spec, key, value)
    return spec.validate()


# --- concepts -----------------------------------------------------------------

def _piecewise(schedule, t, key, default=0.0):
    """Value of a per-step rate ``key`` integrated up to step ``t`` plus jumps."""
    angle = 0.0
    for i, (start, params) in enumerate(schedule):
        if start > t:
            break
        end = schedule[i + 1][0] if i + 1 < len(schedule) else None
        stop = t if end is None or end > t else end
        angle += params.get("jump", 0.0)
        angle += params.get(key, default) * (stop - start)
    return angle


class _Hyperplane:
    def __init__(self, spec, rng):
        basis, _ = np.linalg.qr(rng.standard_normal((spec.dimension, spec.dimension)))
        self.u, self.v = basis[:, 0], basis[:, 1]
        self.schedule = spec.drift_schedule
        self.d = spec.dimension

    def normal(self, t):
        a = _piecewise(self.schedule, t, "rate")
        return math.cos(a) * self.u + math.sin(a) * self.v

    def sample(self, t, rng):
        return rng.random(self.d)

    def concept(self, x, t):
        return int((x - 0.5) @ self.normal(t) > 0)


class _Squares:
    radius, half = 0.3, 0.1

    def __init__(self, spec, rng):
        self.schedule = spec.drift_schedule
        self.phase = rng.uniform(0, 2 * math.pi)

    def centres(self, t):
        a = self.phase + _piecewise(self.schedule, t, "rate")
        angles = a + np.arange(4) * (math.pi / 2)
        return 0.5 + self.radius * np.column_stack([np.cos(angles), np.sin(angles)])

    def sample(self, t, rng):
        k = rng.integers(4)
        return self.centres(t)[k] + rng.uniform(-self.half, self.half, 2)

    def concept(self, x, t):
        return int(np.argmin(((self.centres(t) - x) ** 2).sum(axis=1)))


class _RBF:
    def __init__(self, spec, rng, num_classes=None):
        k = num_classes or spec.num_classes
        self.k, self.d, self.spread = k, spec.dimension, spec.spread
        # centres on a jittered grid in the first two coordinates so blobs stay apart
        g = math.ceil(math.sqrt(k))
        cells = rng.permutation(g * g)[:k]
        base = np.column_stack([(cells % g + 0.5) / g, (cells // g + 0.5) / g])[:, : self.d]
        if self.d > 2:
            base = np.hstack([base, rng.random((k, self.d - 2))])
        self.base = base + rng.uniform(-0.25 / g, 0.25 / g, base.shape)
        # the assignment of blob centres to classes after each drift point
        perm = np.arange(k)
        self.starts, self.perms = [0], [perm.copy()]
        for start, params in spec.drift_schedule:
            pair = params.get("swap")
            i, j = pair if pair is not None else rng.choice(k, 2, replace=False)
            perm = perm.copy()
            perm[[i, j]] = perm[[j, i]]
            self.starts.append(start)
            self.perms.append(perm)

    def centres(self, t):
        idx = np.searchsorted(self.starts, t, side="right") - 1
        return self.base[self.perms[idx]]

    def sample(self, t, rng):
        c = rng.integers(self.k)
        return self.centres(t)[c] + self.spread * rng.standard_normal(self.d)

    def concept(self, x, t):
        return int(np.argmin(((self.centres(t) - x) ** 2).sum(axis=1)))


class _Chessboard:
    def __init__(self, spec, rng, num_classes=None):
        self.c = num_classes or spec.num_classes
        self.g = max(2, math.ceil(math.sqrt(2 * self.c)))
        reveal = [p.get("reveal") for _, p in spec.drift_schedule if "reveal" in p]
        self.reveal = reveal[-1] if reveal else max(1, spec.num_samples // (2 * self.g * self.g))
        self.order = rng.permutation(self.g * self.g)
        self.cycle = 2 * self.reveal * self.g * self.g

    def field_class(self, i, j):
        # stride along j chosen so that edge-adjacent fields always differ
        stride = self.g % self.c or 1
        return (i + stride * j) % self.c

    def active_field(self, t):
        """Index of the field being revealed at step ``t``, or None for the full board."""
        pos = (t - 1) % self.cycle
        n = self.g * self.g
        if pos < self.reveal * n:
            return int(self.order[pos // self.reveal])
        return None

    def sample(self, t, rng):
        f = self.active_field(t)
        if f is None:
            return rng.random(2)
        i, j = divmod(f, self.g)
        return (np.array([i, j]) + rng.random(2)) / self.g

    def concept(self, x, t):
        i = min(int(x[0] * self.g), self.g - 1)
        j = min(int(x[1] * self.g), self.g - 1)
        return self.field_class(i, j)


class _Mixed:
    offset = 3.0

    def __init__(self, spec, rng):
        rest = spec.num_classes - 4
        board_classes = rest // 2
        blob_classes = rest - board_classes
        swaps = [(s, p) for s, p in spec.drift_schedule if "rate" not in p and "reveal" not in p]
        rates = [(s, p) for s, p in spec.drift_schedule if "rate" in p]
        reveals = [(s, p) for s, p in spec.drift_schedule if "reveal" in p]
        if not rates:
            rates = [(1, {"rate": 2 * math.pi / spec.num_samples})]
        self.parts = [
            _RBF(replace(spec, drift_schedule=swaps), rng, blob_classes),
            _Squares(replace(spec, drift_schedule=rates), rng),
            _Chessboard(replace(spec, drift_schedule=reveals), rng, board_classes),
        ]
        self.label_base = [0, blob_classes, blob_classes + 4]

    def sample(self, t, rng):
        r = rng.integers(3)
        x = self.parts[r].sample(t, rng)
        x[0] += r * self.offset
        return x

    def concept(self, x, t):
        r = int(np.clip(np.floor(x[0] / self.offset + 1 / 3), 0, 2))
        local = x.copy()
        local[0] -= r * self.offset
        return self.label_base[r] + self.parts[r].concept(local, t)


_BUILDERS = {
    "rotating_hyperplane": _Hyperplane,
    "moving_squares": _Squares,
    "interchanging_rbf": _RBF,
    "transient_chessboard": _Chessboard,
    "mixed_drift": _Mixed,
}


def build_concept(spec: GeneratorSpec):
    """The generator object for ``spec``; exposes ``sample(t, rng)`` and ``concept(x, t)``."""
    spec.validate()
    structure_rng, _ = _rngs(spec.seed)
    return _BUILDERS[spec.kind](spec, structure_rng)


def _rngs(seed):
    structure, draws = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(structure), np.random.default_rng(draws)


def generate(spec: GeneratorSpec, path: Optional[str] = None):
    """Generate ``spec.num_samples`` instances; returns ``(descriptor, instances)``.

    With ``path`` the stream is also written as CSV.
    """
    spec.validate()
    structure_rng, rng = _rngs(spec.seed)
    gen = _BUILDERS[spec.kind](spec, structure_rng)
    X = np.empty((spec.num_samples, spec.dimension))
    y = np.empty(spec.num_samples, dtype=np.int64)
    for i in range(spec.num_samples):
        t = i + 1
        X[i] = gen.sample(t, rng)
        y[i] = gen.concept(X[i], t)
    if spec.noise > 0:
        flip = rng.random(spec.num_samples) < spec.noise
        shift = rng.integers(1, spec.num_classes, spec.num_samples)
        y = np.where(flip, (y + shift) % spec.num_classes, y)
    instances = make_instances(X, y)
    descriptor = StreamDescriptor(
        dimension=spec.dimension,
        known_classes=frozenset(range(spec.num_classes)),
        length_hint=spec.num_samples,
    )
    if path is not None:
        write_csv_stream(path, instances)
    return descriptor, instances
