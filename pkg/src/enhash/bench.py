"""Experiment orchestration: repeated runs, parameter sweeps and result tables."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from .generators import GeneratorSpec, generate
from .learner import EnhashConfig, EnhashModel
from .metrics import RunReport, prequential_run
from .stream import load_csv_stream

logger = logging.getLogger(__name__)

SEED_ENV = "DRIFTSTREAM_SEED"
SWEEP_PARAMS = {"L": "num_estimators", "bin_width": "bin_width", "lambda": "decay_rate"}
SUMMARY_FIELDS = ("label", "runs", "n", "error", "kappa_m", "kappa_t", "wall_time", "ram_hours")


class ExperimentError(RuntimeError):
    pass


class SweepError(ExperimentError):
    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


def default_seeds() -> list:
    raw = os.environ.get(SEED_ENV)
    return [int(raw)] if raw else [0]


@dataclass
class ExperimentConfig:
    generator: Optional[GeneratorSpec] = None
    csv_path: Optional[str] = None
    label_column: Optional[str] = None
    has_header: bool = False
    learner: EnhashConfig = field(default_factory=EnhashConfig)
    bin_widths: Sequence[float] = ()
    seeds: Sequence[int] = field(default_factory=default_seeds)
    output: Optional[str] = None
    window: Optional[int] = None
    jobs: int = 1
    metering: bool = True
    name: str = ""

    @property
    def repetitions(self) -> int:
        return len(self.seeds)

    def validate(self):
        if (self.generator is None) == (self.csv_path is None):
            raise ExperimentError("exactly one of a generator spec or a CSV path is required")
        if not self.seeds:
            raise ExperimentError("at least one seed is required")
        if self.jobs < 1:
            raise ExperimentError("jobs must be >= 1")
        if self.generator is not None:
            self.generator.validate()
        return self

    @property
    def stream_name(self) -> str:
        if self.name:
            return self.name
        if self.generator is not None:
            return self.generator.kind
        return Path(self.csv_path).stem


def load_stream(config: ExperimentConfig):
    if config.generator is not None:
        return generate(config.generator)
    try:
        return load_csv_stream(config.csv_path, config.label_column, config.has_header)
    except (OSError, ValueError) as exc:
        raise ExperimentError(f"stream load failed: {exc}") from exc


def _single_run(dimension, instances, learner: EnhashConfig, window, metering, label) -> RunReport:
    model = EnhashModel(dimension, learner)
    report = prequential_run(model, instances, window=window, metering=metering, label=label,
                             params=asdict(learner))
    report.params["buckets"] = model.footprint().total_buckets
    return report


def _map(jobs, fn, argsets):
    if jobs == 1 or len(argsets) == 1:
        return [fn(*args) for args in argsets]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *zip(*argsets)))


def _summary(label, reports) -> dict:
    def median(key):
        return statistics.median(getattr(r, key) for r in reports)

    rams = [r.ram_hours for r in reports]
    return {
        "label": label,
        "runs": len(reports),
        "n": reports[0].n,
        "error": median("error"),
        "kappa_m": median("kappa_m"),
        "kappa_t": median("kappa_t"),
        "wall_time": statistics.fmean(r.wall_time for r in reports),
        "ram_hours": None if any(v is None for v in rams) else statistics.fmean(rams),
    }


def run(config: ExperimentConfig, stream=None):
    """One prequential run per seed (and per bin width when several are given).

    Returns ``(reports, summary_rows)``; summary rows hold the median error
    and Kappas over seeds and mean time and RAM-hours.  When more than one
    bin width is run an extra ``best-of`` row picks the lowest median error.
    Artifacts are written under ``config.output`` when it is set.
    """
    config.validate()
    descriptor, instances = stream if stream is not None else load_stream(config)
    widths = list(config.bin_widths) or [config.learner.bin_width]
    base = config.stream_name

    argsets, labels = [], []
    for bw in widths:
        label = base if len(widths) == 1 else f"{base}[bin_width={bw:g}]"
        labels.append(label)
        for seed in config.seeds:
            learner = replace(config.learner, bin_width=bw, seed=seed)
            argsets.append((descriptor.dimension, instances, learner, config.window, config.metering,
                            f"{label}#seed={seed}"))
    reports = _map(config.jobs, _single_run, argsets)

    k = config.repetitions
    rows = [_summary(label, reports[i * k:(i + 1) * k]) for i, label in enumerate(labels)]
    if len(rows) > 1:
        best = min(rows, key=lambda r: r["error"])
        rows.append(dict(best, label=f"{base}[best-of: {best['label']}]"))

    if config.output:
        write_run_artifacts(config.output, reports, rows)
    return reports, rows


def _safe(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_.=" else "_" for ch in label)


def write_run_artifacts(output, reports, rows):
    out = Path(output)
    out.mkdir(parents=True, exist_ok=True)
    for r in reports:
        stem = _safe(r.label)
        (out / f"report_{stem}.txt").write_text(r.to_lines())
        if r.window_trace:
            (out / f"trace_{stem}.csv").write_text(r.trace_csv())
    with (out / "runs.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(reports[0].csv_header())
        for r in reports:
            writer.writerow(r.csv_row())
    write_summary_csv(out / "summary.csv", rows)


def write_summary_csv(path, rows):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_FIELDS)
        for row in rows:
            writer.writerow([_exact(row[k]) for k in SUMMARY_FIELDS])


def read_summary_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["runs"] = int(row["runs"])
        row["n"] = int(row["n"])
        for key in ("error", "kappa_m", "kappa_t", "wall_time", "ram_hours"):
            row[key] = None if row[key] == "NA" else float(row[key])
    return rows


def _exact(v):
    if v is None:
        return "NA"
    return repr(v) if isinstance(v, float) else v


# --- sweeps -----------------------------------------------------------------------

SWEEP_FIELDS = ("value", "error", "kappa_m", "kappa_t", "wall_time", "ram_hours", "buckets")


def sweep(config: ExperimentConfig, parameter: str, values: Sequence, stream=None) -> list:
    """Run the experiment once per parameter value with the configured seeds.

    ``parameter`` is ``L``, ``bin_width`` or ``lambda``.  Rows come back
    sorted by value.  With ``config.output`` set, ``sweep.csv`` and a
    ``sweep_manifest.json`` are kept up to date after every value, and a
    rerun with the same configuration skips values already in the manifest.
    """
    if parameter not in SWEEP_PARAMS:
        raise ExperimentError(f"unknown sweep parameter {parameter!r}; expected one of {sorted(SWEEP_PARAMS)}")
    values = list(values)
    if not values:
        raise ExperimentError("sweep needs at least one value")
    attr = SWEEP_PARAMS[parameter]
    cast = int if parameter == "L" else float
    values = sorted({cast(v) for v in values})
    learners = []
    for v in values:
        try:
            learners.append(replace(config.learner, **{attr: v}))
        except ValueError as exc:
            raise ExperimentError(f"invalid {parameter} value {v!r}: {exc}") from exc

    config.validate()
    out = Path(config.output) if config.output else None
    manifest_path = out / "sweep_manifest.json" if out else None
    signature = _sweep_signature(config, parameter)
    done = {}
    if manifest_path is not None and manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
        if manifest.get("signature") == signature:
            done = {cast(row["value"]): row for row in manifest["rows"]}
            logger.info("resuming sweep: %d of %d values already complete", len(done), len(values))

    if stream is None:
        stream = load_stream(config)
    for v, learner in zip(values, learners):
        if v in done:
            continue
        sub = replace(config, learner=learner, bin_widths=(), output=None)
        try:
            reports, rows = run(sub, stream=stream)
        except Exception as exc:
            partial = _sorted_rows(done)
            raise SweepError(f"sweep aborted at {parameter}={v}: {exc}", partial) from exc
        s = rows[0]
        done[v] = {
            "value": v,
            "error": s["error"],
            "kappa_m": s["kappa_m"],
            "kappa_t": s["kappa_t"],
            "wall_time": s["wall_time"],
            "ram_hours": s["ram_hours"],
            "buckets": statistics.median(r.params["buckets"] for r in reports),
        }
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            rows_sorted = _sorted_rows(done)
            manifest_path.write_text(json.dumps({"signature": signature, "rows": rows_sorted}))
            _write_sweep_csv(out / "sweep.csv", parameter, rows_sorted)
    return _sorted_rows({v: done[v] for v in values})


def _sorted_rows(done: dict) -> list:
    return [done[v] for v in sorted(done)]


def _sweep_signature(config, parameter) -> dict:
    return {
        "parameter": parameter,
        "learner": asdict(config.learner),
        "seeds": list(config.seeds),
        "stream": config.generator.to_record() if config.generator else str(config.csv_path),
    }


def _write_sweep_csv(path, parameter, rows):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([parameter if f == "value" else f for f in SWEEP_FIELDS])
        for row in rows:
            writer.writerow([_exact(row[f]) for f in SWEEP_FIELDS])


# --- tables ---------------------------------------------------------------------------

TABLE_COLUMNS = ("config", "n", "error (%)", "KappaM", "KappaT", "time (s)", "RAM-hours")


def format_percent(error: float) -> str:
    return f"{100 * error:.2f}"


def format_sci(value: Optional[float]) -> str:
    """Two significant digits with a compact exponent, e.g. ``1.2e-5``."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "NA"
    mantissa, exp = f"{value:.1e}".split("e")
    return f"{mantissa}e{int(exp):+d}"


def _table_rows(reports) -> list:
    rows = []
    for r in reports:
        if isinstance(r, dict):
            r = _summary_as_report(r)
        rows.append([
            r.label,
            str(r.n),
            format_percent(r.error),
            _fmt2(r.kappa_m),
            _fmt2(r.kappa_t),
            f"{r.wall_time:.3f}",
            format_sci(r.ram_hours),
        ])
    return rows


def _fmt2(v):
    return "NA" if math.isnan(v) else f"{v:.2f}"


def _summary_as_report(row: dict) -> RunReport:
    return RunReport(n=row["n"], error=row["error"], kappa_m=row["kappa_m"], kappa_t=row["kappa_t"],
                     wall_time=row["wall_time"], ram_hours=row["ram_hours"], majority_accuracy=math.nan,
                     nochange_accuracy=math.nan, label=row["label"])


def emit_report(reports, format: str = "markdown", path=None) -> str:
    """Render run reports (or summary rows) as a table in ``csv``, ``markdown`` or ``plain`` form.

    Error is shown in percent with two decimals and RAM-hours in short
    scientific notation.  The text is returned and optionally written to ``path``.
    """
    if not reports:
        raise ExperimentError("no reports to emit")
    rows = _table_rows(reports)
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        writer.writerows(rows)
        text = buf.getvalue()
    elif format == "markdown":
        lines = ["| " + " | ".join(TABLE_COLUMNS) + " |", "|" + "|".join(["---"] + ["---:"] * 6) + "|"]
        lines += ["| " + " | ".join(row) + " |" for row in rows]
        text = "\n".join(lines) + "\n"
    elif format == "plain":
        widths = [max(len(c), *(len(row[i]) for row in rows)) for i, c in enumerate(TABLE_COLUMNS)]
        fmt = "  ".join(f"{{:<{widths[0]}}}" if i == 0 else f"{{:>{w}}}" for i, w in enumerate(widths))
        text = "\n".join([fmt.format(*TABLE_COLUMNS)] + [fmt.format(*row) for row in rows]) + "\n"
    else:
        raise ExperimentError(f"unknown format {format!r}; expected csv, markdown or plain")
    if path is not None:
        Path(path).write_text(text)
    return text
