"""Prequential evaluation, Kappa statistics and resource metering."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import threading
import time
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

GB = 1024**3


@dataclass(frozen=True)
class Outcome:
    step: int
    true_label: int
    predicted_label: int


@dataclass
class RunReport:
    n: int
    error: float
    kappa_m: float
    kappa_t: float
    wall_time: float
    ram_hours: Optional[float]
    majority_accuracy: float
    nochange_accuracy: float
    window_trace: Optional[list] = None
    label: str = ""
    params: dict = field(default_factory=dict)

    FIELDS = ("label", "n", "error", "kappa_m", "kappa_t", "wall_time", "ram_hours",
              "majority_accuracy", "nochange_accuracy")

    def to_lines(self) -> str:
        """One ``key: value`` pair per line; floats use ``repr`` so they reload exactly."""
        lines = [f"{k}: {_fmt_exact(getattr(self, k))}" for k in self.FIELDS]
        lines += [f"param.{k}: {_fmt_exact(v)}" for k, v in sorted(self.params.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_lines(cls, text: str) -> "RunReport":
        values, params = {}, {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, _, raw = line.partition(": ")
            if key.startswith("param."):
                params[key[6:]] = _parse_exact(raw)
            else:
                values[key] = _parse_exact(raw)
        values["label"] = "" if values.get("label") is None else str(values["label"])
        values["n"] = int(values["n"])
        return cls(params=params, **values)

    def csv_header(self) -> list:
        return list(self.FIELDS) + sorted(self.params)

    def csv_row(self) -> list:
        return [_fmt_exact(getattr(self, k)) for k in self.FIELDS] + [
            _fmt_exact(self.params[k]) for k in sorted(self.params)
        ]

    def trace_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["step", "windowed_error"])
        for step, err in self.window_trace or []:
            writer.writerow([step, repr(err)])
        return buf.getvalue()


def _fmt_exact(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_exact(raw: str):
    if raw == "NA":
        return None
    for conv in (int, float):
        try:
            return conv(raw)
        except ValueError:
            pass
    return raw


# --- metrics ------------------------------------------------------------------

def error_rate(outcomes: Sequence[Outcome]) -> float:
    if not outcomes:
        raise ValueError("error rate of an empty outcome list is undefined")
    wrong = sum(o.true_label != o.predicted_label for o in outcomes)
    return wrong / len(outcomes)


def _kappa(correct: int, ref_correct: int, n: int, name: str) -> float:
    # (p0 - p_ref) / (1 - p_ref) on counts: one rounding instead of three
    if ref_correct >= n:
        warnings.warn(f"{name} undefined: reference classifier accuracy is 1", RuntimeWarning, stacklevel=3)
        return math.nan
    return (correct - ref_correct) / (n - ref_correct)


def _correct(outcomes: Sequence[Outcome]) -> int:
    if not outcomes:
        raise ValueError("kappa of an empty outcome list is undefined")
    return sum(o.true_label == o.predicted_label for o in outcomes)


def kappa_m(outcomes: Sequence[Outcome], baseline_correct: int) -> float:
    """Kappa against the prequential majority-class classifier.

    ``baseline_correct`` is how many of the same instances that classifier got right.
    """
    return _kappa(_correct(outcomes), baseline_correct, len(outcomes), "KappaM")


def kappa_t(outcomes: Sequence[Outcome], nochange_correct: int) -> float:
    """Kappa against the no-change classifier that repeats the previous label."""
    return _kappa(_correct(outcomes), nochange_correct, len(outcomes), "KappaT")


def kappa_from_accuracy(p0: float, p_ref: float) -> float:
    """``(p0 - p_ref) / (1 - p_ref)`` for accuracies given directly."""
    if p_ref >= 1.0:
        warnings.warn("Kappa undefined: reference classifier accuracy is 1", RuntimeWarning, stacklevel=2)
        return math.nan
    return (p0 - p_ref) / (1.0 - p_ref)


class MajorityBaseline:
    """Predicts the most frequent label seen so far (ties to the smallest id, 0 before any label)."""

    def __init__(self):
        self.counts: Counter = Counter()
        self.best = 0

    def predict(self) -> int:
        return self.best

    def learn(self, y: int):
        self.counts[y] += 1
        n, b = self.counts[y], self.best
        if n > self.counts[b] or (n == self.counts[b] and y < b):
            self.best = y


class NoChangeBaseline:
    """Predicts the previous true label; the first prediction is always counted wrong."""

    def __init__(self):
        self.last: Optional[int] = None

    def predict(self) -> Optional[int]:
        return self.last

    def learn(self, y: int):
        self.last = y


def baseline_correct(labels: Sequence[int]) -> tuple[int, int]:
    """Prequential correct counts ``(majority, no_change)`` for a label sequence."""
    maj, nc = MajorityBaseline(), NoChangeBaseline()
    m_ok = n_ok = 0
    for y in labels:
        m_ok += maj.predict() == y
        n_ok += nc.predict() == y
        maj.learn(y)
        nc.learn(y)
    return m_ok, n_ok


def windowed_errors(outcomes: Sequence[Outcome], window: int) -> list:
    """``(last step, error)`` for consecutive non-overlapping windows; a short tail window is kept."""
    if window < 1:
        raise ValueError("window must be >= 1")
    trace = []
    for start in range(0, len(outcomes), window):
        chunk = outcomes[start:start + window]
        trace.append((chunk[-1].step, error_rate(chunk)))
    return trace


def summarize(outcomes: Sequence[Outcome], wall_time: float = 0.0, ram_hours: Optional[float] = None,
              window: Optional[int] = None, label: str = "", params: Optional[dict] = None) -> RunReport:
    if not outcomes:
        raise ValueError("cannot summarise an empty run")
    n = len(outcomes)
    m_ok, n_ok = baseline_correct([o.true_label for o in outcomes])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        km = kappa_m(outcomes, m_ok)
        kt = kappa_t(outcomes, n_ok)
    if math.isnan(km):
        logger.warning("KappaM undefined: majority baseline is perfect on this stream")
    if math.isnan(kt):
        logger.warning("KappaT undefined: no-change baseline is perfect on this stream")
    return RunReport(
        n=n,
        error=error_rate(outcomes),
        kappa_m=km,
        kappa_t=kt,
        wall_time=wall_time,
        ram_hours=ram_hours,
        majority_accuracy=m_ok / n,
        nochange_accuracy=n_ok / n,
        window_trace=windowed_errors(outcomes, window) if window else None,
        label=label,
        params=dict(params or {}),
    )


# --- resource metering --------------------------------------------------------

def ram_hours(samples: Sequence[tuple[float, float]]) -> float:
    """Trapezoidal integral of ``(seconds, resident GB)`` samples, in GB-hours."""
    if len(samples) < 2:
        return 0.0
    t = np.array([s[0] for s in samples], dtype=np.float64)
    gb = np.array([s[1] for s in samples], dtype=np.float64)
    if np.any(np.diff(t) < 0):
        raise ValueError("memory samples must be time-ordered")
    return float(np.sum(0.5 * (gb[1:] + gb[:-1]) * np.diff(t)) / 3600.0)


def _rss_reader():
    try:
        import psutil

        proc = psutil.Process(os.getpid())
        return lambda: proc.memory_info().rss
    except Exception:  # noqa: BLE001 - any failure means no sampler
        pass
    try:
        page = os.sysconf("SC_PAGE_SIZE")
        with open("/proc/self/statm") as fh:
            fh.read()

        def read():
            with open("/proc/self/statm") as fh:
                return int(fh.read().split()[1]) * page

        return read
    except (OSError, ValueError, AttributeError):
        return None


class Meter:
    """Wall clock plus a background resident-memory sampler.

    Use as a context manager; after exit ``wall_time`` is in seconds and
    ``samples`` holds ``(seconds since start, resident GB)`` pairs.  When no
    sampler is available ``ram_hours`` is None.
    """

    def __init__(self, period: float = 0.1, enabled: bool = True):
        self.period = period
        self.samples: list = []
        self.wall_time = 0.0
        self._read = _rss_reader() if enabled else None
        self._stop = threading.Event()
        self._thread = None

    @property
    def available(self) -> bool:
        return self._read is not None

    def _sample(self):
        self.samples.append((time.monotonic() - self._t0, self._read() / GB))

    def _loop(self):
        while not self._stop.wait(self.period):
            self._sample()

    def __enter__(self):
        self._t0 = time.monotonic()
        if self._read is not None:
            self._sample()
            self._thread = threading.Thread(target=self._loop, name="rss-sampler", daemon=True)
            self._thread.start()
        return self

    def __exit__(self, *exc):
        self.wall_time = time.monotonic() - self._t0
        if self._thread is not None:
            self._stop.set()
            self._thread.join()
            self._sample()
        return False

    @property
    def peak_gb(self) -> float:
        return max((gb for _, gb in self.samples), default=0.0)

    @property
    def ram_hours(self) -> Optional[float]:
        return ram_hours(self.samples) if self.available else None


def meter(fn, *args, period: float = 0.1, **kwargs):
    """Run ``fn`` under a :class:`Meter`; returns ``(result, wall_time, samples)``."""
    with Meter(period) as m:
        result = fn(*args, **kwargs)
    return result, m.wall_time, (m.samples if m.available else None)


# --- evaluation loop ----------------------------------------------------------

def prequential_run(model, instances, window: Optional[int] = None, metering: bool = True,
                    period: float = 0.1, label: str = "", params: Optional[dict] = None,
                    return_outcomes: bool = False):
    """Interleaved test-then-train over ``instances`` with a fresh ``model``.

    Every instance is first predicted, then learned.  Returns a
    :class:`RunReport`, or ``(report, outcomes)`` with ``return_outcomes``.
    """
    instances = list(instances)
    if not instances:
        raise ValueError("prequential run needs a nonempty stream")
    if getattr(model, "step", 0) != 0:
        raise ValueError("prequential run needs a fresh model")
    for i, inst in enumerate(instances):
        if inst.step != i + 1:
            raise ValueError(f"instance {i} has step {inst.step}, expected {i + 1}")
    with Meter(period, enabled=metering) as m:
        if hasattr(model, "process_batch"):
            X = np.vstack([inst.features for inst in instances])
            y = [inst.label for inst in instances]
            preds = model.process_batch(X, y).tolist()
        else:
            preds = [model.process(inst).label for inst in instances]
    outcomes = [Outcome(inst.step, inst.label, int(p)) for inst, p in zip(instances, preds)]
    report = summarize(outcomes, wall_time=m.wall_time, ram_hours=m.ram_hours, window=window,
                       label=label, params=params)
    return (report, outcomes) if return_outcomes else report
