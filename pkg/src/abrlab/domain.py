"""Core value types and exact capacity arithmetic for chunked video sessions.

Units are seconds, kilobits, and kilobits per second everywhere, so a chunk
encoded at rate R with duration V has nominal size V * R and no unit juggling
is needed anywhere downstream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class InsufficientCapacity(Exception):
    """A download cannot finish before the capacity trace ends."""


class ConfigError(ValueError):
    """A session configuration violates its own constraints."""


@dataclass(frozen=True, eq=False)
class VideoManifest:
    """One title: a ladder of encoded streams sharing a common chunk grid.

    chunk_sizes_kbit has shape (n_rates, n_chunks); row i holds the actual
    encoded size of every chunk of stream i. All streams have the same number
    of chunks and the same chunk duration.
    """

    title_id: str
    chunk_duration_s: float
    rates_kbps: tuple[float, ...]
    chunk_sizes_kbit: np.ndarray

    def __post_init__(self):
        sizes = np.asarray(self.chunk_sizes_kbit, dtype=np.float64)
        object.__setattr__(self, "chunk_sizes_kbit", sizes)
        object.__setattr__(self, "rates_kbps", tuple(float(r) for r in self.rates_kbps))
        sizes.flags.writeable = False

    @property
    def n_rates(self) -> int:
        return len(self.rates_kbps)

    @property
    def n_chunks(self) -> int:
        return int(self.chunk_sizes_kbit.shape[1]) if self.chunk_sizes_kbit.ndim == 2 else 0


def validate_manifest(manifest: VideoManifest) -> list[str]:
    """Return a list of human-readable invariant violations (empty if valid)."""
    problems = []
    if not manifest.title_id:
        problems.append("title_id must be a non-empty string")
    if not manifest.chunk_duration_s > 0:
        problems.append("chunk_duration_s must be positive")
    rates = manifest.rates_kbps
    if len(rates) < 2:
        problems.append("need at least 2 rates in the ladder")
    if any(r <= 0 for r in rates):
        problems.append("all rates_kbps must be positive")
    if any(b <= a for a, b in zip(rates, rates[1:])):
        problems.append("rates_kbps must be strictly ascending")
    sizes = manifest.chunk_sizes_kbit
    if sizes.ndim != 2:
        problems.append("chunk_sizes_kbit must be a 2-d array (rates x chunks)")
        return problems
    if sizes.shape[0] != len(rates):
        problems.append(
            f"chunk_sizes_kbit has {sizes.shape[0]} rows but there are {len(rates)} rates"
        )
    if sizes.shape[1] < 1:
        problems.append("every stream needs at least one chunk")
    elif not np.all(sizes > 0):
        problems.append("all chunk sizes must be positive")
    return problems


@dataclass(frozen=True)
class CapacityTrace:
    """Piecewise-constant network capacity over time.

    breakpoints are (time_s, capacity_kbps) pairs; each capacity holds from
    its time until the next breakpoint. duration_s may be math.inf, in which
    case the final capacity extends indefinitely.
    """

    breakpoints: tuple[tuple[float, float], ...]
    duration_s: float = math.inf

    def __post_init__(self):
        pts = tuple((float(t), float(c)) for t, c in self.breakpoints)
        object.__setattr__(self, "breakpoints", pts)
        if not pts:
            raise ValueError("trace needs at least one breakpoint")
        if pts[0][0] != 0.0:
            raise ValueError("first breakpoint must be at time 0")
        for (t0, _), (t1, _) in zip(pts, pts[1:]):
            if t1 <= t0:
                raise ValueError("breakpoint times must be strictly increasing")
        if any(c < 0 for _, c in pts):
            raise ValueError("capacities must be non-negative")
        if self.duration_s < pts[-1][0]:
            raise ValueError("duration_s must cover the last breakpoint")


def capacity_integral(trace: CapacityTrace, t0: float, t1: float) -> float:
    """Exact kilobits deliverable over [t0, t1]."""
    if not 0 <= t0 <= t1:
        raise ValueError(f"need 0 <= t0 <= t1, got [{t0}, {t1}]")
    if t1 > trace.duration_s:
        raise ValueError(f"interval end {t1} is past trace end {trace.duration_s}")
    total = 0.0
    pts = trace.breakpoints
    for i, (seg_start, cap) in enumerate(pts):
        seg_end = pts[i + 1][0] if i + 1 < len(pts) else trace.duration_s
        lo = max(t0, seg_start)
        hi = min(t1, seg_end)
        if hi > lo:
            total += cap * (hi - lo)
    return total


def invert_capacity(trace: CapacityTrace, t0: float, size_kbit: float) -> float:
    """Smallest t1 >= t0 at which size_kbit has been delivered since t0.

    Raises InsufficientCapacity if the trace ends (or stays at zero capacity
    forever) before the full size is delivered.
    """
    if not 0 <= t0 <= trace.duration_s:
        raise ValueError(f"t0={t0} outside trace [0, {trace.duration_s}]")
    if size_kbit < 0:
        raise ValueError("size_kbit must be non-negative")
    if size_kbit == 0:
        return t0
    remaining = size_kbit
    pts = trace.breakpoints
    t = t0
    for i, (seg_start, cap) in enumerate(pts):
        seg_end = pts[i + 1][0] if i + 1 < len(pts) else trace.duration_s
        if seg_end <= t:
            continue
        start = max(t, seg_start)
        if cap > 0:
            needed = remaining / cap
            if start + needed <= seg_end:
                return start + needed
            remaining -= cap * (seg_end - start)
        if math.isinf(seg_end):
            break
        t = seg_end
    raise InsufficientCapacity(
        f"trace ends at {trace.duration_s} with {remaining:.6g} kbit undelivered"
    )


@dataclass(frozen=True)
class OutageProtectionConfig:
    """Per-chunk buffer credit that shifts the rate map right after outages."""

    enabled: bool = True
    per_chunk_credit_s: float = 0.4
    fill_fraction_gate: float = 0.75
    cap_s: float = 80.0


@dataclass(frozen=True)
class SessionConfig:
    """Tunable knobs for one playback session. Defaults match a 4 s chunk title.

    resume_threshold_s of None means one chunk duration, resolved against the
    manifest when the session starts.
    """

    buffer_capacity_s: float = 240.0
    startup_policy: str = "first_chunk"
    abr_algorithm: str = "bba1"
    resume_threshold_s: float | None = None
    rng_seed: int = 0
    reservoir_bounds_s: tuple[float, float] = (8.0, 140.0)
    reservoir_horizon_s: float = 480.0
    reservoir_mode: str = "max_deficit"
    outage_protection: OutageProtectionConfig = field(default_factory=OutageProtectionConfig)
    map_ceiling_fraction: float = 0.9
    bba0_reservoir_s: float = 90.0
    lookahead_window_chunks: int = 8
    ewma_history_weight: float = 0.8
    ewma_safety_factor: float = 0.85

    def __post_init__(self):
        lo, hi = self.reservoir_bounds_s
        if not 0 <= lo <= hi:
            raise ConfigError("reservoir_bounds_s must satisfy 0 <= min <= max")
        if self.buffer_capacity_s <= hi:
            raise ConfigError("buffer_capacity_s must exceed the reservoir upper bound")
        if self.resume_threshold_s is not None and not (
            0 < self.resume_threshold_s <= self.buffer_capacity_s
        ):
            raise ConfigError("resume_threshold_s must be in (0, buffer_capacity_s]")
        if self.startup_policy not in ("first_chunk", "resume_threshold"):
            raise ConfigError(f"unknown startup_policy {self.startup_policy!r}")
        if self.reservoir_mode not in ("max_deficit", "sum_positive"):
            raise ConfigError(f"unknown reservoir_mode {self.reservoir_mode!r}")
        if not 0 < self.map_ceiling_fraction <= 1:
            raise ConfigError("map_ceiling_fraction must be in (0, 1]")
        if self.map_ceiling_fraction * self.buffer_capacity_s <= hi:
            raise ConfigError("map ceiling must sit above the reservoir upper bound")
        if not 0 < self.reservoir_horizon_s:
            raise ConfigError("reservoir_horizon_s must be positive")
        if not 0 <= self.ewma_history_weight < 1:
            raise ConfigError("ewma_history_weight must be in [0, 1)")
        if self.lookahead_window_chunks < 1:
            raise ConfigError("lookahead_window_chunks must be at least 1")


@dataclass
class SessionState:
    """Mutable per-session bookkeeping owned by the simulator."""

    buffer_s: float = 0.0
    next_chunk_index: int = 0
    current_rate_index: int = 0
    clock_s: float = 0.0
    playing: bool = False
    reservoir_s: float = 0.0
    outage_protection_s: float = 0.0
    in_startup_phase: bool = False

    def to_dict(self) -> dict:
        return {
            "buffer_s": self.buffer_s,
            "next_chunk_index": self.next_chunk_index,
            "current_rate_index": self.current_rate_index,
            "clock_s": self.clock_s,
            "playing": self.playing,
            "reservoir_s": self.reservoir_s,
            "outage_protection_s": self.outage_protection_s,
            "in_startup_phase": self.in_startup_phase,
        }


class EventKind(str, Enum):
    DOWNLOAD_START = "download_start"
    DOWNLOAD_END = "download_end"
    RATE_SWITCH = "rate_switch"
    REBUFFER_START = "rebuffer_start"
    REBUFFER_END = "rebuffer_end"
    PLAYBACK_START = "playback_start"
    PLAYBACK_END = "playback_end"


@dataclass(frozen=True)
class Event:
    """One timestamped session event; index fields are None when not relevant."""

    time_s: float
    kind: EventKind
    buffer_s: float
    chunk_index: int | None = None
    rate_index: int | None = None

    def to_dict(self) -> dict:
        return {
            "time_s": self.time_s,
            "kind": self.kind.value,
            "buffer_s": self.buffer_s,
            "chunk_index": self.chunk_index,
            "rate_index": self.rate_index,
        }


@dataclass(frozen=True)
class SessionLog:
    """Everything observable about one finished session."""

    events: tuple[Event, ...]
    final_state: SessionState
    algorithm: str = ""
    title_id: str = ""
    truncated: bool = False

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "algorithm": self.algorithm,
            "title_id": self.title_id,
            "truncated": self.truncated,
            "events": [e.to_dict() for e in self.events],
            "final_state": self.final_state.to_dict(),
        }
