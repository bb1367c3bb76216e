"""Rate selection policies.

Every policy is a pure function of an AbrDecisionContext: the session state
at a chunk boundary, the manifest, the effective buffer map for this
decision, and the history of completed downloads. Policies return the rate
index for the next chunk; startup-phase policies additionally report whether
the startup phase survives this decision.
"""
from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .domain import SessionState, VideoManifest
from .maps import MapKind, MapSpec, eval_map


@dataclass(frozen=True)
class DownloadRecord:
    """One completed chunk download."""

    chunk_index: int
    rate_index: int
    start_s: float
    end_s: float
    size_kbit: float

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    @property
    def throughput_kbps(self) -> float:
        return self.size_kbit / self.duration_s


@dataclass(frozen=True)
class AbrDecisionContext:
    """Everything a policy may look at when picking the next chunk's rate."""

    state: SessionState
    manifest: VideoManifest
    map: MapSpec
    downloads: tuple[DownloadRecord, ...] = ()
    lookahead_window_chunks: int = 8
    ewma_history_weight: float = 0.8
    ewma_safety_factor: float = 0.85

    @property
    def last_download(self) -> DownloadRecord | None:
        return self.downloads[-1] if self.downloads else None


def rmin_always(ctx: AbrDecisionContext) -> int:
    """Floor policy: always fetch the lowest rate."""
    return 0


def throughput_ewma_baseline(ctx: AbrDecisionContext) -> int:
    """Capacity-estimation stand-in: smoothed past throughput with a safety
    margin, picking the highest rate the discounted estimate can afford."""
    alpha = ctx.ewma_history_weight
    estimate = None
    for d in ctx.downloads:
        sample = d.throughput_kbps
        estimate = sample if estimate is None else alpha * estimate + (1 - alpha) * sample
    if estimate is None:
        return 0
    target = ctx.ewma_safety_factor * estimate
    idx = bisect_right(ctx.manifest.rates_kbps, target) - 1
    return max(idx, 0)


def pick_rate_by_barriers(rates: tuple[float, ...], prev_index: int, suggested: float) -> int:
    """Step the ladder only when the suggested rate crosses the adjacent rung.

    Crossing the rung above moves to the highest rate strictly below the
    suggestion; crossing the rung below moves to the lowest rate strictly
    above it; otherwise hold. Comparisons are deliberately >= / <=, so a
    suggestion sitting exactly on a rung counts as crossed.
    """
    up_rate = rates[prev_index + 1] if prev_index + 1 < len(rates) else rates[-1]
    down_rate = rates[prev_index - 1] if prev_index > 0 else rates[0]
    if suggested >= up_rate:
        return max(bisect_left(rates, suggested) - 1, 0)
    if suggested <= down_rate:
        return min(bisect_right(rates, suggested), len(rates) - 1)
    return prev_index


def bba0_next_rate(ctx: AbrDecisionContext) -> int:
    """Rate-map policy: barrier stepping on the map's suggested rate."""
    suggested = eval_map(ctx.map, ctx.state.buffer_s)
    return pick_rate_by_barriers(
        ctx.manifest.rates_kbps, ctx.state.current_rate_index, suggested
    )


def _upcoming_sizes(ctx: AbrDecisionContext) -> np.ndarray:
    return ctx.manifest.chunk_sizes_kbit[:, ctx.state.next_chunk_index]


def bba1_next_rate(ctx: AbrDecisionContext) -> int:
    """Chunk-map policy: compare the map's affordable size against the next
    chunk of the adjacent streams.

    Stepping up moves exactly one level. Stepping down jumps to the highest
    stream whose next chunk still fits under the suggestion, or to the
    lowest stream when none fits.
    """
    state = ctx.state
    if state.next_chunk_index >= ctx.manifest.n_chunks:
        return state.current_rate_index
    sizes = _upcoming_sizes(ctx)
    suggested = eval_map(ctx.map, state.buffer_s)
    prev = state.current_rate_index
    up = min(prev + 1, ctx.manifest.n_rates - 1)
    down = max(prev - 1, 0)
    if suggested >= sizes[up]:
        return up
    if suggested <= sizes[down]:
        fits = np.nonzero(sizes < suggested)[0]
        return int(fits.max()) if fits.size else 0
    return prev


def startup_step_threshold(spec: MapSpec, buffer_s: float, chunk_duration_s: float) -> float:
    """Per-chunk buffer gain required to keep ramping during startup.

    Demands 7/8 of a chunk duration at an empty buffer, easing linearly to
    1/2 once the cushion is full.
    """
    frac = min(1.0, buffer_s / spec.upper_flat_start_s)
    return (0.875 - 0.375 * frac) * chunk_duration_s


def bba2_decide(ctx: AbrDecisionContext) -> tuple[int, bool]:
    """Startup-phase policy; returns (rate index, still in startup).

    During startup, step up one level per chunk while each download leaves
    the buffer growing faster than the threshold. Exit permanently once the
    buffer shrinks over a chunk or the chunk-map policy wants a higher rate;
    from then on this is exactly the chunk-map policy.
    """
    state = ctx.state
    if not state.in_startup_phase:
        return bba1_next_rate(ctx), False
    last = ctx.last_download
    if last is None:
        return state.current_rate_index, True
    chunk_s = ctx.manifest.chunk_duration_s
    gain = chunk_s - last.duration_s
    if gain < 0:
        return bba1_next_rate(ctx), False
    steady = bba1_next_rate(ctx)
    if steady > state.current_rate_index:
        return steady, False
    if gain > startup_step_threshold(ctx.map, state.buffer_s, chunk_s):
        return min(state.current_rate_index + 1, ctx.manifest.n_rates - 1), True
    return state.current_rate_index, True


def bba2_next_rate(ctx: AbrDecisionContext) -> int:
    return bba2_decide(ctx)[0]


def bba_others_decide(ctx: AbrDecisionContext) -> tuple[int, bool]:
    """Up-switch smoothing on top of the startup policy.

    A proposed step up is confirmed only if the map suggestion covers every
    chunk of the candidate stream across the lookahead window; otherwise
    hold. Holds and down-switches pass through untouched.
    """
    candidate, in_startup = bba2_decide(ctx)
    prev = ctx.state.current_rate_index
    if candidate > prev:
        k = ctx.state.next_chunk_index
        window = ctx.manifest.chunk_sizes_kbit[
            candidate, k : k + ctx.lookahead_window_chunks
        ]
        suggested = eval_map(ctx.map, ctx.state.buffer_s)
        if window.size and not np.all(suggested >= window):
            return prev, in_startup
    return candidate, in_startup


def bba_others_next_rate(ctx: AbrDecisionContext) -> int:
    return bba_others_decide(ctx)[0]


@dataclass(frozen=True)
class AlgorithmProfile:
    """A policy plus the session wiring it expects."""

    name: str
    decide: Callable[[AbrDecisionContext], tuple[int, bool]]
    map_kind: MapKind
    dynamic_reservoir: bool = False
    starts_in_startup: bool = False
    monotone_shift: bool = False
    uses_protection: bool = False


def _plain(fn: Callable[[AbrDecisionContext], int]):
    def decide(ctx: AbrDecisionContext) -> tuple[int, bool]:
        return fn(ctx), False

    return decide


ALGORITHMS: dict[str, AlgorithmProfile] = {
    "rmin_always": AlgorithmProfile("rmin_always", _plain(rmin_always), MapKind.RATE),
    "ewma": AlgorithmProfile("ewma", _plain(throughput_ewma_baseline), MapKind.RATE),
    "bba0": AlgorithmProfile("bba0", _plain(bba0_next_rate), MapKind.RATE),
    "bba1": AlgorithmProfile(
        "bba1",
        _plain(bba1_next_rate),
        MapKind.CHUNK,
        dynamic_reservoir=True,
        uses_protection=True,
    ),
    "bba2": AlgorithmProfile(
        "bba2",
        bba2_decide,
        MapKind.CHUNK,
        dynamic_reservoir=True,
        starts_in_startup=True,
        uses_protection=True,
    ),
    "bba_others": AlgorithmProfile(
        "bba_others",
        bba_others_decide,
        MapKind.CHUNK,
        dynamic_reservoir=True,
        starts_in_startup=True,
        monotone_shift=True,
        uses_protection=True,
    ),
}


def fixed_rate(index: int) -> AlgorithmProfile:
    """Constant-rate policy, used by the fluid-model cross-checks."""

    def decide(ctx: AbrDecisionContext) -> tuple[int, bool]:
        return index, False

    return AlgorithmProfile(f"fixed:{index}", decide, MapKind.RATE)
