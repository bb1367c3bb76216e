"""Buffer-to-rate maps and their supporting arithmetic.

A map turns current buffer occupancy into a suggested value: kb/s for rate
maps, kilobits (an upcoming chunk size to afford) for chunk maps. Every map
is flat at its floor inside the reservoir, rises linearly across the cushion,
and is flat at its ceiling from there to the buffer cap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .domain import SessionConfig, SessionState, VideoManifest


class MapKind(str, Enum):
    RATE = "rate"
    CHUNK = "chunk"


@dataclass(frozen=True)
class MapSpec:
    """Piecewise-linear map geometry. floor/ceiling units depend on kind."""

    kind: MapKind
    reservoir_s: float
    cushion_s: float
    floor: float
    ceiling: float
    buffer_capacity_s: float

    def __post_init__(self):
        if self.reservoir_s < 0:
            raise ValueError("reservoir_s must be non-negative")
        if self.cushion_s <= 0:
            raise ValueError("cushion_s must be positive")
        if self.upper_flat_start_s > self.buffer_capacity_s + 1e-9:
            raise ValueError("map must reach its ceiling at or before the buffer cap")
        if not self.floor < self.ceiling:
            raise ValueError("floor must be below ceiling")

    @property
    def upper_flat_start_s(self) -> float:
        return self.reservoir_s + self.cushion_s


def eval_map(spec: MapSpec, buffer_s: float) -> float:
    """Map value at the given buffer level; linear between floor and ceiling."""
    if not 0 <= buffer_s <= spec.buffer_capacity_s:
        raise ValueError(
            f"buffer_s={buffer_s} outside [0, {spec.buffer_capacity_s}]"
        )
    if buffer_s <= spec.reservoir_s:
        return spec.floor
    if buffer_s >= spec.upper_flat_start_s:
        return spec.ceiling
    frac = (buffer_s - spec.reservoir_s) / spec.cushion_s
    return spec.floor + (spec.ceiling - spec.floor) * frac


def base_map(
    kind: MapKind, manifest: VideoManifest, reservoir_s: float, cfg: SessionConfig
) -> MapSpec:
    """Build the session's map geometry around a given reservoir.

    The ceiling is reached at map_ceiling_fraction of the buffer cap. Rate
    maps span the rate ladder; chunk maps span nominal-lowest to average-top
    chunk size.
    """
    if kind is MapKind.RATE:
        floor = manifest.rates_kbps[0]
        ceiling = manifest.rates_kbps[-1]
    else:
        floor = manifest.chunk_duration_s * manifest.rates_kbps[0]
        ceiling = float(np.mean(manifest.chunk_sizes_kbit[-1]))
    cushion = cfg.map_ceiling_fraction * cfg.buffer_capacity_s - reservoir_s
    return MapSpec(
        kind=kind,
        reservoir_s=reservoir_s,
        cushion_s=cushion,
        floor=floor,
        ceiling=ceiling,
        buffer_capacity_s=cfg.buffer_capacity_s,
    )


def compute_reservoir(
    manifest: VideoManifest,
    playhead_chunk: int,
    horizon_s: float = 480.0,
    bounds_s: tuple[float, float] = (8.0, 140.0),
    mode: str = "max_deficit",
) -> float:
    """Buffer floor needed to survive the upcoming lowest-rate chunks.

    Assumes capacity exactly equals the lowest rate and walks the next
    ceil(horizon / chunk_duration) chunks of the lowest stream. Each chunk
    drains (size / lowest_rate) seconds while resupplying one chunk duration.
    max_deficit takes the worst cumulative shortfall along that walk;
    sum_positive adds up only the per-chunk shortfalls. Result is clamped
    to bounds_s.
    """
    chunk_s = manifest.chunk_duration_s
    lowest = manifest.rates_kbps[0]
    n = math.ceil(horizon_s / chunk_s)
    window = manifest.chunk_sizes_kbit[0, playhead_chunk : playhead_chunk + n]
    if window.size == 0:
        raw = 0.0
    else:
        drains = window / lowest - chunk_s
        if mode == "max_deficit":
            raw = max(0.0, float(np.max(np.cumsum(drains))))
        elif mode == "sum_positive":
            raw = float(np.sum(drains[drains > 0]))
        else:
            raise ValueError(f"unknown reservoir mode {mode!r}")
    lo, hi = bounds_s
    return min(max(raw, lo), hi)


def accrue_outage_protection(
    state: SessionState, cfg: SessionConfig, buffer_increasing: bool
) -> float:
    """Protection credit after one completed chunk.

    Credit accrues only while the buffer is growing and still below the fill
    gate, and never during a startup phase. It is capped and never decays.
    """
    prot = cfg.outage_protection
    credit = state.outage_protection_s
    if not prot.enabled:
        return credit
    if state.in_startup_phase or not buffer_increasing:
        return credit
    if state.buffer_s >= prot.fill_fraction_gate * cfg.buffer_capacity_s:
        return credit
    return min(prot.cap_s, credit + prot.per_chunk_credit_s)


def effective_map(
    base: MapSpec,
    reservoir_now_s: float,
    protection_s: float,
    monotone: bool = False,
    previous_shift_s: float = 0.0,
) -> MapSpec:
    """Shift the map right by the current reservoir plus protection credit.

    Under monotone mode the shift never moves left of previous_shift_s. The
    cushion width is preserved unless that would push the ceiling past the
    buffer cap, in which case the cushion shrinks to fit.
    """
    shifted = reservoir_now_s + protection_s
    if monotone:
        shifted = max(previous_shift_s, shifted)
    upper = min(base.buffer_capacity_s, shifted + base.cushion_s)
    if shifted >= upper:
        # full cap consumed; keep the cushion and push the reservoir back
        shifted = max(0.0, upper - base.cushion_s)
    return MapSpec(
        kind=base.kind,
        reservoir_s=shifted,
        cushion_s=upper - shifted,
        floor=base.floor,
        ceiling=base.ceiling,
        buffer_capacity_s=base.buffer_capacity_s,
    )
