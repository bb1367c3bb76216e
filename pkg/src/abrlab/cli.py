"""Command-line front end.

Subcommands:
  run    one session -> session.log.json, timeseries.csv, metrics.json, session.png
  batch  experiment matrix -> per-cell artifacts plus summary.csv/json/png
  gen    synthetic manifest / trace fixture files

Exit codes: 0 success, 1 validation or format error, 2 I/O error. The
ABRLAB_LOG environment variable sets log verbosity and never changes results.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from itertools import product
from pathlib import Path

import yaml

from .algorithms import ALGORITHMS
from .domain import (
    CapacityTrace,
    ConfigError,
    EventKind,
    OutageProtectionConfig,
    SessionConfig,
    SessionLog,
    VideoManifest,
)
from .metrics import (
    aggregate_and_normalize,
    session_metrics,
    write_summary_csv,
    write_summary_json,
)
from .simulator import BatchCell, run_batch, simulate_session
from .traces_io import (
    FormatError,
    generate_outage_trace,
    generate_random_walk_trace,
    generate_vbr_manifest,
    load_capacity_trace,
    load_manifest,
    save_capacity_trace,
    save_manifest,
)

log = logging.getLogger("abrlab")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2


def _check_algorithm(name: str) -> None:
    if name not in ALGORITHMS:
        raise ConfigError(
            f"unknown algorithm {name!r}; valid names: {', '.join(sorted(ALGORITHMS))}"
        )


def _load_yaml_mapping(path: Path) -> dict:
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise FormatError(f"{path.name}: invalid YAML: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise FormatError(f"{path.name}: expected a mapping at the top level")
    return data


def build_session_config(
    overrides: dict, abr: str | None = None, seed: int | None = None
) -> SessionConfig:
    """Merge config-file keys with flag overrides (flags win, then defaults)."""
    kwargs = dict(overrides)
    protection = kwargs.pop("outage_protection", None)
    if protection is not None:
        if not isinstance(protection, dict):
            raise ConfigError("outage_protection must be a mapping")
        try:
            kwargs["outage_protection"] = OutageProtectionConfig(**protection)
        except TypeError as exc:
            raise ConfigError(f"outage_protection: {exc}") from None
    if "reservoir_bounds_s" in kwargs:
        kwargs["reservoir_bounds_s"] = tuple(kwargs["reservoir_bounds_s"])
    if abr is not None:
        kwargs["abr_algorithm"] = abr
    if seed is not None:
        kwargs["rng_seed"] = seed
    try:
        cfg = SessionConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    _check_algorithm(cfg.abr_algorithm)
    return cfg


def build_timeseries(log_: SessionLog, rates_kbps, cadence_s: float = 1.0):
    """Rows of (time_s, buffer_s, rate_kbps) at every event plus a fixed cadence.

    Between events the buffer drains linearly while playing and holds while
    paused, so cadence samples are exact, not interpolated guesses. The rate
    column is the nominal rate of the download in flight.
    """
    rows: list[tuple[float, float, float]] = []
    playing = False
    rate = 0.0
    prev_t: float | None = None
    prev_buf = 0.0
    next_tick = 0.0
    for ev in log_.events:
        if prev_t is not None:
            while next_tick < ev.time_s:
                drain = (next_tick - prev_t) if playing else 0.0
                rows.append((next_tick, max(0.0, prev_buf - drain), rate))
                next_tick += cadence_s
        if ev.kind == EventKind.DOWNLOAD_START:
            rate = rates_kbps[ev.rate_index]
        elif ev.kind in (EventKind.PLAYBACK_START, EventKind.REBUFFER_END):
            playing = True
        elif ev.kind in (EventKind.REBUFFER_START, EventKind.PLAYBACK_END):
            playing = False
        if rows and rows[-1][0] == ev.time_s:
            rows[-1] = (ev.time_s, ev.buffer_s, rate)
        else:
            rows.append((ev.time_s, ev.buffer_s, rate))
        if next_tick == ev.time_s:
            next_tick += cadence_s
        prev_t, prev_buf = ev.time_s, ev.buffer_s
    return rows


def _write_json(doc: dict, path: Path) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8", newline="\n")


def _write_timeseries_csv(rows, path: Path) -> None:
    lines = ["time_s,buffer_s,rate_kbps"]
    lines += [f"{t!r},{b!r},{r!r}" for t, b, r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _write_session_artifacts(
    out_dir: Path, log_: SessionLog, manifest: VideoManifest, figure: bool = True
) -> None:
    from . import plots  # deferred: pulls in matplotlib

    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(log_.to_dict(), out_dir / "session.log.json")
    _write_timeseries_csv(
        build_timeseries(log_, manifest.rates_kbps), out_dir / "timeseries.csv"
    )
    _write_json(
        session_metrics(log_, manifest.rates_kbps).to_dict(), out_dir / "metrics.json"
    )
    if figure:
        plots.save_session_figure(log_, manifest.rates_kbps, out_dir / "session.png")


def cmd_run(args) -> int:
    manifest = load_manifest(args.manifest)
    trace = load_capacity_trace(args.trace)
    overrides = _load_yaml_mapping(Path(args.config)) if args.config else {}
    cfg = build_session_config(overrides, abr=args.abr, seed=args.seed)
    log.info("run: %s / %s / %s", args.manifest, args.trace, cfg.abr_algorithm)
    session = simulate_session(manifest, trace, cfg.abr_algorithm, cfg)
    _write_session_artifacts(Path(args.out), session, manifest)
    return EXIT_OK


def _trace_for_cell(entry: dict, seed: int, index: int) -> tuple[CapacityTrace, str | None]:
    window = entry.get("window")
    if window is None:
        window = f"trace{index}"
    kinds = [k for k in ("path", "generate_outage", "generate_random_walk") if k in entry]
    if len(kinds) != 1:
        raise ConfigError(
            f"trace entry {index}: need exactly one of path / generate_outage / generate_random_walk"
        )
    kind = kinds[0]
    if kind == "path":
        return load_capacity_trace(entry["path"]), window
    params = dict(entry[kind] or {})
    try:
        if kind == "generate_outage":
            return generate_outage_trace(**params), window
        params.setdefault("seed", seed)
        return generate_random_walk_trace(**params), window
    except TypeError as exc:
        raise ConfigError(f"trace entry {index}: {exc}") from None


def _manifest_from_batch(doc: dict) -> VideoManifest:
    entry = doc.get("manifest")
    if not isinstance(entry, dict) or ("path" in entry) == ("generate" in entry):
        raise ConfigError("batch config needs manifest: with exactly one of path / generate")
    if "path" in entry:
        return load_manifest(entry["path"])
    try:
        return generate_vbr_manifest(**entry["generate"])
    except TypeError as exc:
        raise ConfigError(f"manifest.generate: {exc}") from None


def cmd_batch(args) -> int:
    from . import plots

    doc = _load_yaml_mapping(Path(args.config))
    control = doc.get("control")
    algorithms = doc.get("algorithms")
    if not control or not algorithms:
        raise ConfigError("batch config needs control: and algorithms:")
    if control not in algorithms:
        raise ConfigError(f"control {control!r} is not in algorithms")
    for name in algorithms:
        _check_algorithm(name)
    seeds = doc.get("seeds", [0])
    trace_entries = doc.get("traces")
    if not trace_entries:
        raise ConfigError("batch config needs traces: (a non-empty list)")
    manifest = _manifest_from_batch(doc)
    session_overrides = doc.get("session", {}) or {}

    cells = []
    for algorithm, (idx, entry), seed in product(
        algorithms, enumerate(trace_entries), seeds
    ):
        trace, window = _trace_for_cell(entry, seed, idx)
        cfg = build_session_config(dict(session_overrides), abr=algorithm, seed=seed)
        cells.append(
            BatchCell(
                cell_id=f"{algorithm}-{window}-s{seed}",
                algorithm=algorithm,
                manifest=manifest,
                trace=trace,
                config=cfg,
                window=window,
            )
        )

    log.info("batch: %d cells, jobs=%d", len(cells), args.jobs)
    result = run_batch(cells, jobs=args.jobs)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for record in result.records:
        _write_session_artifacts(
            out_dir / "cells" / record.cell_id, record.log, record.manifest, figure=False
        )
    for cell_id, message in result.errors:
        print(f"cell {cell_id} failed: {message}", file=sys.stderr)

    per_session = [
        (r.algorithm, r.window, session_metrics(r.log, r.manifest.rates_kbps))
        for r in result.records
    ]
    if not per_session:
        raise ConfigError("every cell failed; no summary to write")
    rows = aggregate_and_normalize(per_session, control)
    write_summary_csv(rows, out_dir / "summary.csv")
    write_summary_json(rows, out_dir / "summary.json")
    plots.save_summary_figure(rows, out_dir / "summary.png")
    return EXIT_OK if not result.errors else EXIT_INVALID


def _parse_outage(text: str) -> tuple[float, float]:
    try:
        start, length = text.split(":")
        return float(start), float(length)
    except ValueError:
        raise ConfigError(f"--outage expects START:LEN, got {text!r}") from None


def cmd_gen_manifest(args) -> int:
    rates = tuple(float(r) for r in args.rates.split(","))
    manifest = generate_vbr_manifest(
        rates,
        n_chunks=args.chunks,
        chunk_duration_s=args.chunk_duration,
        dispersion=args.dispersion,
        seed=args.seed,
        title_id=args.title,
    )
    save_manifest(manifest, args.out)
    return EXIT_OK


def cmd_gen_trace(args) -> int:
    duration = math.inf if args.duration is None else args.duration
    if args.random_walk:
        if args.duration is None:
            raise ConfigError("--random-walk requires --duration")
        trace = generate_random_walk_trace(
            seed=args.seed,
            duration_s=duration,
            min_kbps=args.min_kbps,
            max_kbps=args.max_kbps,
            segment_mean_s=args.segment_mean,
        )
    else:
        start, length = _parse_outage(args.outage) if args.outage else (0.0, 0.0)
        trace = generate_outage_trace(args.base, start, length, duration_s=duration)
    save_capacity_trace(trace, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abrlab",
        description="Buffer-based adaptive bitrate selection, simulated offline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one session and write its artifacts")
    run.add_argument("--manifest", required=True, help="manifest JSON path")
    run.add_argument("--trace", required=True, help="capacity trace CSV path")
    run.add_argument("--abr", help="algorithm name (overrides config)")
    run.add_argument("--config", help="session config YAML path")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, help="seed recorded in the session config")
    run.set_defaults(func=cmd_run)

    batch = sub.add_parser("batch", help="run an experiment matrix and summarize")
    batch.add_argument("--config", required=True, help="batch matrix YAML path")
    batch.add_argument("--out", required=True, help="output directory")
    batch.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    batch.set_defaults(func=cmd_batch)

    gen = sub.add_parser("gen", help="generate synthetic fixture files")
    gen_sub = gen.add_subparsers(dest="gen_command", required=True)

    gm = gen_sub.add_parser("manifest", help="synthetic VBR manifest JSON")
    gm.add_argument("--out", required=True)
    gm.add_argument("--rates", required=True, help="comma-separated kb/s ladder")
    gm.add_argument("--chunks", type=int, required=True)
    gm.add_argument("--chunk-duration", type=float, default=4.0)
    gm.add_argument("--dispersion", type=float, default=0.0)
    gm.add_argument("--seed", type=int, default=0)
    gm.add_argument("--title", default="synthetic")
    gm.set_defaults(func=cmd_gen_manifest)

    gt = gen_sub.add_parser("trace", help="synthetic capacity trace CSV")
    gt.add_argument("--out", required=True)
    gt.add_argument("--base", type=float, default=3000.0, help="constant capacity kb/s")
    gt.add_argument("--outage", help="zero-capacity hole as START:LEN seconds")
    gt.add_argument("--duration", type=float, help="trace end time (omit for unbounded)")
    gt.add_argument("--random-walk", action="store_true", help="random walk instead of outage")
    gt.add_argument("--min-kbps", type=float, default=200.0)
    gt.add_argument("--max-kbps", type=float, default=6000.0)
    gt.add_argument("--segment-mean", type=float, default=60.0)
    gt.add_argument("--seed", type=int, default=0)
    gt.set_defaults(func=cmd_gen_trace)

    return parser


def _configure_logging() -> None:
    level_name = os.environ.get("ABRLAB_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
