"""File formats and synthetic inputs.

Capacity traces are CSV with a time_s,capacity_kbps header; an optional final
row with an empty capacity field marks the end of a finite trace. Manifests
are JSON. Both writers emit a canonical byte form (LF, UTF-8, repr floats) so
saves round-trip exactly. Format reference and fixtures live in formats/.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .domain import CapacityTrace, VideoManifest, validate_manifest


class FormatError(ValueError):
    """An input file does not match its documented format."""


def load_capacity_trace(path: str | Path) -> CapacityTrace:
    path = Path(path)
    rows: list[tuple[float, float]] = []
    duration = math.inf
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if lineno == 1 and row[0].strip() == "time_s":
                continue
            if len(row) != 2:
                raise FormatError(f"{path.name}:{lineno}: expected 2 fields, got {len(row)}")
            if not math.isinf(duration):
                raise FormatError(
                    f"{path.name}:{lineno}: rows after the end marker are not allowed"
                )
            try:
                t = float(row[0])
            except ValueError:
                raise FormatError(f"{path.name}:{lineno}: bad time {row[0]!r}") from None
            if row[1].strip() == "":
                duration = t  # end marker: time only, empty capacity
                continue
            try:
                c = float(row[1])
            except ValueError:
                raise FormatError(f"{path.name}:{lineno}: bad capacity {row[1]!r}") from None
            rows.append((t, c))
    if not rows:
        raise FormatError(f"{path.name}: no data rows")
    try:
        return CapacityTrace(tuple(rows), duration_s=duration)
    except ValueError as exc:
        raise FormatError(f"{path.name}: {exc}") from None


def save_capacity_trace(trace: CapacityTrace, path: str | Path) -> None:
    path = Path(path)
    lines = ["time_s,capacity_kbps"]
    lines += [f"{t!r},{c!r}" for t, c in trace.breakpoints]
    if not math.isinf(trace.duration_s):
        lines.append(f"{trace.duration_s!r},")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_manifest(path: str | Path) -> VideoManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path.name}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    try:
        streams = raw["streams"]
        manifest = VideoManifest(
            title_id=str(raw["title_id"]),
            chunk_duration_s=float(raw["chunk_duration_s"]),
            rates_kbps=tuple(float(s["rate_kbps"]) for s in streams),
            chunk_sizes_kbit=np.array(
                [s["chunk_sizes_kbit"] for s in streams], dtype=np.float64
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path.name}: malformed manifest: {exc}") from None
    problems = validate_manifest(manifest)
    if problems:
        raise FormatError(f"{path.name}: " + "; ".join(problems))
    return manifest


def save_manifest(manifest: VideoManifest, path: str | Path) -> None:
    doc = {
        "title_id": manifest.title_id,
        "chunk_duration_s": manifest.chunk_duration_s,
        "streams": [
            {
                "rate_kbps": rate,
                "chunk_sizes_kbit": list(manifest.chunk_sizes_kbit[i]),
            }
            for i, rate in enumerate(manifest.rates_kbps)
        ],
    }
    Path(path).write_text(
        json.dumps(doc, indent=2) + "\n", encoding="utf-8", newline="\n"
    )


def generate_vbr_manifest(
    rates_kbps,
    n_chunks: int,
    chunk_duration_s: float = 4.0,
    dispersion: float = 0.0,
    seed: int = 0,
    title_id: str = "synthetic",
) -> VideoManifest:
    """Synthetic title with per-chunk size variation shared across streams.

    dispersion is the coefficient of variation of a log-normal per-chunk
    multiplier (0 gives constant bitrate). The multipliers are rescaled to
    mean one, so every stream's mean chunk size equals its nominal
    chunk_duration * rate.
    """
    if dispersion < 0:
        raise ValueError("dispersion must be non-negative")
    if n_chunks < 1:
        raise ValueError("n_chunks must be at least 1")
    if dispersion == 0:
        mult = np.ones(n_chunks)
    else:
        sigma2 = math.log(1.0 + dispersion**2)
        rng = np.random.default_rng(seed)
        mult = rng.lognormal(mean=-sigma2 / 2.0, sigma=math.sqrt(sigma2), size=n_chunks)
        mult = mult / mult.mean()
    rates = tuple(float(r) for r in rates_kbps)
    sizes = np.outer(rates, mult) * chunk_duration_s
    return VideoManifest(title_id, chunk_duration_s, rates, sizes)


def generate_outage_trace(
    base_kbps: float,
    outage_start_s: float,
    outage_len_s: float,
    duration_s: float = math.inf,
) -> CapacityTrace:
    """Constant capacity with one zero-capacity hole."""
    if base_kbps <= 0:
        raise ValueError("base_kbps must be positive")
    if outage_start_s < 0 or outage_len_s < 0:
        raise ValueError("outage must not be negative")
    if outage_start_s + outage_len_s > duration_s:
        raise ValueError("outage extends past the trace duration")
    if outage_len_s == 0:
        return CapacityTrace(((0.0, base_kbps),), duration_s=duration_s)
    if outage_start_s == 0:
        pts = ((0.0, 0.0), (outage_len_s, base_kbps))
    else:
        pts = (
            (0.0, base_kbps),
            (outage_start_s, 0.0),
            (outage_start_s + outage_len_s, base_kbps),
        )
    return CapacityTrace(pts, duration_s=duration_s)


def generate_random_walk_trace(
    seed: int,
    duration_s: float,
    min_kbps: float,
    max_kbps: float,
    segment_mean_s: float = 60.0,
    step_sigma: float = 0.5,
) -> CapacityTrace:
    """Piecewise-constant capacity following a clipped log-space random walk.

    Segment lengths are exponential with the given mean. Deterministic per
    seed; used to build heterogeneous session fleets.
    """
    if not 0 < min_kbps <= max_kbps:
        raise ValueError("need 0 < min_kbps <= max_kbps")
    rng = np.random.default_rng(seed)
    level = math.exp(rng.uniform(math.log(min_kbps), math.log(max_kbps)))
    pts = [(0.0, level)]
    t = float(rng.exponential(segment_mean_s))
    while t < duration_s:
        level = float(np.clip(level * math.exp(rng.normal(0.0, step_sigma)), min_kbps, max_kbps))
        pts.append((t, level))
        t += float(rng.exponential(segment_mean_s))
    return CapacityTrace(tuple(pts), duration_s=duration_s)
