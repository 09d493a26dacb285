"""Instance and stream abstractions, plus CSV ingestion of benchmark streams."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np


class StreamFormatError(ValueError):
    """Raised when a stream file cannot be parsed."""


@dataclass(frozen=True)
class LabeledInstance:
    features: np.ndarray
    label: int
    step: int


@dataclass(frozen=True)
class StreamDescriptor:
    dimension: int
    known_classes: frozenset = field(default_factory=frozenset)
    length_hint: Optional[int] = None
    label_names: Optional[tuple] = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")


@dataclass
class StreamStats:
    count: int
    class_counts: dict
    feature_min: Optional[np.ndarray]
    feature_max: Optional[np.ndarray]


def make_instances(X, y, start: int = 1) -> list[LabeledInstance]:
    """Wrap a feature matrix and label vector as a list of instances."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-dimensional")
    if len(X) != len(y):
        raise ValueError(f"{len(X)} feature rows but {len(y)} labels")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    return [
        LabeledInstance(features=X[i], label=int(y[i]), step=start + i)
        for i in range(len(X))
    ]


def stack(instances: Sequence[LabeledInstance]) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(X, y)`` arrays for a sequence of instances."""
    if not instances:
        return np.empty((0, 0)), np.empty(0, dtype=np.int64)
    X = np.vstack([inst.features for inst in instances])
    y = np.fromiter((inst.label for inst in instances), dtype=np.int64, count=len(instances))
    return X, y


def _column_index(selector, ncols: int, header: Optional[list[str]]) -> int:
    if selector is None:
        return ncols - 1
    if isinstance(selector, str) and not selector.lstrip("-").isdigit():
        if header is None or selector not in header:
            raise StreamFormatError(f"label column {selector!r} not found in header")
        return header.index(selector)
    idx = int(selector)
    if idx < 0:
        idx += ncols
    if not 0 <= idx < ncols:
        raise StreamFormatError(f"label column index {selector} out of range for {ncols} columns")
    return idx


def load_csv_stream(path, label_column=None, has_header: bool = False):
    """Load a comma-separated stream file.

    The label column is selected by index or header name and defaults to the
    last column.  Integer labels are kept as-is; any other token set is mapped
    to dense integers in order of first appearance.

    Returns ``(descriptor, instances)``.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    except OSError as exc:
        raise StreamFormatError(f"cannot read {path}: {exc}") from exc

    header = None
    if has_header and rows:
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise StreamFormatError(f"{path}: no data rows")

    ncols = len(header) if header is not None else len(rows[0])
    if ncols < 2:
        raise StreamFormatError(f"{path}: need at least one feature column and a label column")
    label_idx = _column_index(label_column, ncols, header)
    first_row = 2 if has_header else 1

    features = np.empty((len(rows), ncols - 1), dtype=np.float64)
    tokens = []
    for r, row in enumerate(rows):
        lineno = r + first_row
        if len(row) != ncols:
            raise StreamFormatError(f"{path}: row {lineno} has {len(row)} columns, expected {ncols}")
        j = 0
        for c, cell in enumerate(row):
            if c == label_idx:
                tokens.append(cell.strip())
                continue
            try:
                value = float(cell)
            except ValueError:
                raise StreamFormatError(
                    f"{path}: row {lineno}, column {c + 1}: non-numeric feature {cell!r}"
                ) from None
            if not math.isfinite(value):
                raise StreamFormatError(f"{path}: row {lineno}, column {c + 1}: non-finite feature {cell!r}")
            features[r, j] = value
            j += 1

    labels, names = _encode_labels(tokens)
    instances = make_instances(features, labels)
    descriptor = StreamDescriptor(
        dimension=ncols - 1,
        known_classes=frozenset(labels),
        length_hint=len(instances),
        label_names=names,
    )
    return descriptor, instances


def _encode_labels(tokens: list[str]) -> tuple[list[int], Optional[tuple]]:
    # non-negative integer labels pass through; anything else is a categorical token
    try:
        ints = [int(t) for t in tokens]
    except ValueError:
        ints = None
    if ints is not None and all(v >= 0 for v in ints):
        return ints, None
    mapping: dict[str, int] = {}
    labels = [mapping.setdefault(t, len(mapping)) for t in tokens]
    return labels, tuple(mapping)


def write_csv_stream(path, instances: Iterable[LabeledInstance], header: Optional[Sequence[str]] = None):
    """Write instances as CSV with the label in the last column.

    Values are written with 17 significant digits so reloading is bit-exact.
    """
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        if header is not None:
            writer.writerow(header)
        for inst in instances:
            writer.writerow([f"{v:.17g}" for v in inst.features] + [inst.label])


def stream_stats(instances: Iterable[LabeledInstance]) -> StreamStats:
    count = 0
    classes: Counter = Counter()
    lo = hi = None
    for inst in instances:
        count += 1
        classes[inst.label] += 1
        if lo is None:
            lo = np.array(inst.features, dtype=np.float64)
            hi = lo.copy()
        else:
            np.minimum(lo, inst.features, out=lo)
            np.maximum(hi, inst.features, out=hi)
    return StreamStats(count=count, class_counts=dict(classes), feature_min=lo, feature_max=hi)
