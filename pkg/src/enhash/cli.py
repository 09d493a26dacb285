"""Command-line entry point: ``enhash-bench run`` and ``enhash-bench sweep``.

Settings come from an optional INI config file (sections ``[stream]``,
``[learner]`` and ``[run]``) and are overridden by flags.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .bench import (
    ExperimentConfig,
    ExperimentError,
    SweepError,
    default_seeds,
    emit_report,
    format_percent,
    format_sci,
    run,
    sweep,
)
from .generators import GeneratorError, GeneratorSpec, default_spec
from .learner import ConfigError, EnhashConfig

def _floats(text):
    return [float(v) for v in str(text).replace(" ", "").split(",") if v]


def _ints(text):
    return [int(v) for v in str(text).replace(" ", "").split(",") if v]


def parse_generator(text: str, num_samples=None, seed=None) -> GeneratorSpec:
    """``KIND[:key=value,...]`` or a one-line JSON record."""
    text = text.strip()
    if text.startswith("{"):
        spec = GeneratorSpec.from_record(text)
    else:
        kind, _, rest = text.partition(":")
        opts = {}
        for item in filter(None, rest.split(",")):
            key, _, value = item.partition("=")
            value = value.strip()
            if not value:
                raise ValueError(f"generator option {key.strip()!r} has no value")
            opts[key.strip()] = json.loads(value) if value[0] in "[{" else _scalar(value)
        n = opts.pop("num_samples", 20_000)
        gseed = opts.pop("seed", 0)
        drifts = opts.pop("drifts", 4)
        spec = default_spec(kind.strip(), num_samples=n, seed=gseed, drifts=drifts, **opts)
    if num_samples is not None:
        spec = replace(spec, num_samples=num_samples)
    if seed is not None:
        spec = replace(spec, seed=seed)
    return spec.validate()


def _scalar(value):
    for conv in (int, float):
        try:
            return conv(value)
        except ValueError:
            pass
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [stream], [learner] and [run] sections")
    src = common.add_mutually_exclusive_group()
    src.add_argument("--stream", help="CSV stream file (label in the last column unless --label-column)")
    src.add_argument("--generator", help="KIND[:key=value,...] or a JSON generator record")
    common.add_argument("--label-column", help="label column index or header name")
    common.add_argument("--header", action="store_true", default=None, help="CSV has a header row")
    common.add_argument("--samples", type=int, help="generator sample count")
    common.add_argument("--L", type=int, dest="L", help="number of estimators")
    common.add_argument("--bin-width", help="bin width, or a comma list for best-of reporting")
    common.add_argument("--lambda", dest="decay", type=float, help="decay rate")
    common.add_argument("--variant", choices=["full", "lambda0", "no_weights"])
    common.add_argument("--seeds", help="comma-separated learner seeds (default: $DRIFTSTREAM_SEED or 0)")
    common.add_argument("--window", type=int, help="window size for per-window error traces")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=["csv", "markdown", "plain"], help="table format on stdout")
    common.add_argument("--jobs", type=int, help="parallel runs (timing-sensitive work should keep 1)")
    common.add_argument("--no-meter", action="store_true", help="disable the memory sampler")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="enhash-bench", description="Prequential Enhash experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run one configuration over all seeds")
    sw = sub.add_parser("sweep", parents=[common], help="sweep one hyperparameter")
    sw.add_argument("--param", required=True, choices=["L", "bin_width", "lambda"])
    sw.add_argument("--values", required=True, help="comma-separated values")
    return parser


def _read_ini(path):
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ExperimentError(f"cannot read config file {path}")
    return {s: dict(cp[s]) for s in cp.sections()}


def config_from_args(args) -> tuple[ExperimentConfig, str]:
    ini = _read_ini(args.config) if args.config else {}
    stream, learner, runsec = ini.get("stream", {}), ini.get("learner", {}), ini.get("run", {})

    def pick(flag, section, key, conv=str):
        if flag is not None:
            return flag
        return conv(section[key]) if key in section else None

    csv_path = args.stream if args.stream else (None if args.generator else stream.get("csv"))
    gen_text = args.generator if args.generator else (None if args.stream else stream.get("generator"))
    samples = pick(args.samples, stream, "num_samples", int)
    generator = None
    if gen_text:
        generator = parse_generator(gen_text, num_samples=samples,
                                    seed=int(stream["seed"]) if "seed" in stream else None)

    widths_raw = pick(args.bin_width, learner, "bin_width")
    widths = _floats(widths_raw) if widths_raw is not None else []
    defaults = EnhashConfig()
    lcfg = EnhashConfig(
        num_estimators=pick(args.L, learner, "l", int) or defaults.num_estimators,
        bin_width=widths[0] if widths else defaults.bin_width,
        decay_rate=d if (d := pick(args.decay, learner, "lambda", float)) is not None else defaults.decay_rate,
        variant=pick(args.variant, learner, "variant") or defaults.variant,
    )
    seeds_raw = pick(args.seeds, runsec, "seeds")
    header = args.header if args.header is not None else stream.get("header", "false").lower() in ("1", "true", "yes")
    config = ExperimentConfig(
        generator=generator,
        csv_path=csv_path,
        label_column=pick(args.label_column, stream, "label_column"),
        has_header=header,
        learner=lcfg,
        bin_widths=widths if len(widths) > 1 else (),
        seeds=_ints(seeds_raw) if seeds_raw is not None else default_seeds(),
        output=pick(args.out, runsec, "out"),
        window=pick(args.window, runsec, "window", int),
        jobs=pick(args.jobs, runsec, "jobs", int) or 1,
        metering=not args.no_meter,
    )
    fmt = pick(args.format, runsec, "format") or "plain"
    return config.validate(), fmt


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config, fmt = config_from_args(args)
        if args.command == "run":
            _, rows = run(config)
            text = emit_report(rows, fmt)
            if config.output:
                (Path(config.output) / f"table.{_ext(fmt)}").write_text(text)
        else:
            rows = sweep(config, args.param, _floats(args.values))
            text = _sweep_table(args.param, rows)
    except SweepError as exc:
        print(f"error: {exc} ({len(exc.partial)} values completed and kept)", file=sys.stderr)
        return 1
    except (ExperimentError, ConfigError, GeneratorError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(text)
    return 0


def _ext(fmt):
    return {"csv": "csv", "markdown": "md", "plain": "txt"}[fmt]


def _sweep_table(param, rows) -> str:
    lines = [f"{param:>10}  {'error (%)':>9}  {'time (s)':>9}  {'RAM-hours':>9}  {'buckets':>8}"]
    for r in rows:
        lines.append(f"{r['value']:>10g}  {format_percent(r['error']):>9}  {r['wall_time']:>9.3f}  "
                     f"{format_sci(r['ram_hours']):>9}  {r['buckets']:>8g}")
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    sys.exit(main())
