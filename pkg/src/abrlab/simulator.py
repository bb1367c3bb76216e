"""Chunk-granular playback simulator.

The event loop alternates decide / download / account. Time advances only by
exact arithmetic on the piecewise-constant trace, so identical inputs give
bit-identical logs. The buffer drains at unit rate while playing, gains one
chunk duration per completed download, and is capped by idling the
downloader whenever one more chunk would overflow it. Downloads are never
aborted once started.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .algorithms import ALGORITHMS, AbrDecisionContext, AlgorithmProfile, DownloadRecord
from .domain import (
    CapacityTrace,
    Event,
    EventKind,
    InsufficientCapacity,
    SessionConfig,
    SessionLog,
    SessionState,
    VideoManifest,
    invert_capacity,
    validate_manifest,
)
from .maps import accrue_outage_protection, base_map, compute_reservoir, effective_map


def resolve_algorithm(algorithm: str | AlgorithmProfile) -> AlgorithmProfile:
    if isinstance(algorithm, AlgorithmProfile):
        return algorithm
    try:
        return ALGORITHMS[algorithm]
    except KeyError:
        raise ValueError(
            f"unknown algorithm {algorithm!r}; valid names: {', '.join(sorted(ALGORITHMS))}"
        ) from None


def simulate_session(
    manifest: VideoManifest,
    trace: CapacityTrace,
    algorithm: str | AlgorithmProfile,
    cfg: SessionConfig | None = None,
) -> SessionLog:
    """Play one title against one trace under one policy.

    The session ends when every chunk has been played out, or early (flagged
    truncated) when the trace ends before a download can finish.
    """
    cfg = cfg if cfg is not None else SessionConfig()
    problems = validate_manifest(manifest)
    if problems:
        raise ValueError("invalid manifest: " + "; ".join(problems))
    profile = resolve_algorithm(algorithm)
    chunk_s = manifest.chunk_duration_s
    cap = cfg.buffer_capacity_s
    if chunk_s > cap:
        raise ValueError("buffer capacity cannot hold a single chunk")
    resume_s = cfg.resume_threshold_s if cfg.resume_threshold_s is not None else chunk_s

    events: list[Event] = []
    downloads: list[DownloadRecord] = []
    st = SessionState(in_startup_phase=profile.starts_in_startup)
    playback_started = False
    rebuffering = False
    played_s = 0.0
    truncated = False
    previous_shift = 0.0
    prev_chunk_rate: int | None = None

    def emit(kind, t, buffer_s, chunk=None, rate=None):
        events.append(Event(t, kind, buffer_s, chunk, rate))

    def drain_while_playing(until_s):
        # advance the clock to until_s, draining buffer only while playing
        nonlocal played_s, rebuffering
        span = until_s - st.clock_s
        if st.playing and span > 0:
            drained = min(st.buffer_s, span)
            st.buffer_s -= drained
            played_s += drained
            if span > drained:
                st.buffer_s = 0.0
                emit(EventKind.REBUFFER_START, st.clock_s + drained, 0.0)
                st.playing = False
                rebuffering = True
        st.clock_s = until_s

    while st.next_chunk_index < manifest.n_chunks:
        k = st.next_chunk_index

        # leave room for one more chunk before issuing the request
        if st.buffer_s + chunk_s > cap:
            if not st.playing:
                # paused with a full buffer cannot drain; resume to unblock
                emit(EventKind.REBUFFER_END, st.clock_s, st.buffer_s)
                rebuffering = False
                st.playing = True
            wait = st.buffer_s - (cap - chunk_s)
            st.clock_s += wait
            st.buffer_s = cap - chunk_s
            played_s += wait

        # decide the next chunk's rate against the effective map
        if profile.dynamic_reservoir:
            st.reservoir_s = compute_reservoir(
                manifest, k, cfg.reservoir_horizon_s, cfg.reservoir_bounds_s,
                cfg.reservoir_mode,
            )
        else:
            st.reservoir_s = cfg.bba0_reservoir_s
        base = base_map(profile.map_kind, manifest, st.reservoir_s, cfg)
        protection = st.outage_protection_s if profile.uses_protection else 0.0
        eff = effective_map(
            base, st.reservoir_s, protection, profile.monotone_shift, previous_shift
        )
        if profile.monotone_shift:
            previous_shift = eff.reservoir_s
        ctx = AbrDecisionContext(
            st, manifest, eff, tuple(downloads),
            cfg.lookahead_window_chunks, cfg.ewma_history_weight, cfg.ewma_safety_factor,
        )
        rate_idx, in_startup = profile.decide(ctx)
        if profile.starts_in_startup:
            st.in_startup_phase = in_startup
        if prev_chunk_rate is not None and rate_idx != prev_chunk_rate:
            emit(EventKind.RATE_SWITCH, st.clock_s, st.buffer_s, k, rate_idx)
        prev_chunk_rate = rate_idx
        st.current_rate_index = rate_idx

        # download the chunk; the trace may end first
        if st.clock_s >= trace.duration_s:
            truncated = True
            break
        size = float(manifest.chunk_sizes_kbit[rate_idx, k])
        start_t = st.clock_s
        emit(EventKind.DOWNLOAD_START, start_t, st.buffer_s, k, rate_idx)
        try:
            end_t = invert_capacity(trace, start_t, size)
        except InsufficientCapacity:
            truncated = True
            drain_while_playing(trace.duration_s)
            break
        drain_while_playing(end_t)
        st.buffer_s += chunk_s
        emit(EventKind.DOWNLOAD_END, end_t, st.buffer_s, k, rate_idx)
        downloads.append(DownloadRecord(k, rate_idx, start_t, end_t, size))
        st.next_chunk_index = k + 1

        if not playback_started:
            if cfg.startup_policy == "first_chunk" or st.buffer_s >= resume_s:
                playback_started = True
                st.playing = True
                emit(EventKind.PLAYBACK_START, st.clock_s, st.buffer_s)
        elif rebuffering and st.buffer_s >= resume_s:
            emit(EventKind.REBUFFER_END, st.clock_s, st.buffer_s)
            rebuffering = False
            st.playing = True

        if profile.uses_protection:
            st.outage_protection_s = accrue_outage_protection(
                st, cfg, (end_t - start_t) < chunk_s
            )

    if not truncated:
        # all chunks fetched; play out whatever is buffered
        if playback_started and not st.playing and st.buffer_s > 0:
            emit(EventKind.REBUFFER_END, st.clock_s, st.buffer_s)
            rebuffering = False
            st.playing = True
        if st.playing:
            end_t = st.clock_s + st.buffer_s
            played_s += st.buffer_s
            st.buffer_s = 0.0
            st.clock_s = end_t
            st.playing = False
            emit(EventKind.PLAYBACK_END, end_t, 0.0)
    elif playback_started:
        emit(EventKind.PLAYBACK_END, st.clock_s, st.buffer_s)
        st.playing = False

    return SessionLog(
        events=tuple(events),
        final_state=st,
        algorithm=profile.name,
        title_id=manifest.title_id,
        truncated=truncated,
    )


def fluid_oracle(
    manifest: VideoManifest,
    trace: CapacityTrace,
    rate_schedule: int | list[tuple[float, int]],
    cfg: SessionConfig | None = None,
    dt: float = 0.001,
    horizon_s: float | None = None,
):
    """Fixed-step fluid integration of the buffer under a fixed-rate schedule.

    Models continuous delivery at capacity / nominal-rate and unit-rate
    playback, with the same start, stall, and cap rules as the event
    simulator. Intended for constant-bitrate manifests. Steps are split at
    trace breakpoints and schedule switches so the discontinuities are not
    smeared. Returns (times, buffers) arrays; buffer is piecewise linear
    between samples.
    """
    cfg = cfg if cfg is not None else SessionConfig()
    chunk_s = manifest.chunk_duration_s
    resume_s = cfg.resume_threshold_s if cfg.resume_threshold_s is not None else chunk_s
    if isinstance(rate_schedule, int):
        rate_schedule = [(0.0, rate_schedule)]
    total_video = chunk_s * manifest.n_chunks
    if horizon_s is None:
        horizon_s = min(trace.duration_s, 4.0 * total_video + 600.0)

    switch_times = sorted(
        {t for t, _ in trace.breakpoints} | {t for t, _ in rate_schedule}
    )

    def capacity_at(t):
        c = trace.breakpoints[0][1]
        for bt, bc in trace.breakpoints:
            if bt <= t:
                c = bc
            else:
                break
        return c

    def rate_at(t):
        idx = rate_schedule[0][1]
        for bt, bi in rate_schedule:
            if bt <= t:
                idx = bi
            else:
                break
        return manifest.rates_kbps[idx]

    times = [0.0]
    buffers = [0.0]
    t = 0.0
    buf = 0.0
    delivered_s = 0.0
    started = False
    playing = False
    while t < horizon_s and delivered_s < total_video:
        step = dt
        for bt in switch_times:
            if t < bt < t + step:
                step = bt - t
                break
        c = capacity_at(t)
        r = rate_at(t)
        fill = (c / r) * step
        if delivered_s + fill > total_video:
            fill = total_video - delivered_s
        delivered_s += fill
        drain = step if (started and playing) else 0.0
        buf = buf + fill - drain
        if buf < 0.0:
            buf = 0.0
        if buf > cfg.buffer_capacity_s:
            buf = cfg.buffer_capacity_s
        if not started and delivered_s >= chunk_s:
            started = True
            playing = True
        elif started and playing and buf <= 0.0:
            playing = False
        elif started and not playing and buf >= resume_s:
            playing = True
        t += step
        times.append(t)
        buffers.append(buf)
    return np.asarray(times), np.asarray(buffers)


@dataclass(frozen=True)
class BatchCell:
    """One (manifest, trace, algorithm, config) experiment to run."""

    cell_id: str
    algorithm: str
    manifest: VideoManifest
    trace: CapacityTrace
    config: SessionConfig
    window: str | None = None


@dataclass(frozen=True)
class SessionRecord:
    cell_id: str
    algorithm: str
    window: str | None
    log: SessionLog
    manifest: VideoManifest


@dataclass(frozen=True)
class BatchResult:
    records: tuple[SessionRecord, ...]
    errors: tuple[tuple[str, str], ...]  # (cell_id, message)


def _run_cell(cell: BatchCell):
    try:
        log = simulate_session(cell.manifest, cell.trace, cell.algorithm, cell.config)
        return SessionRecord(cell.cell_id, cell.algorithm, cell.window, log, cell.manifest)
    except Exception as exc:  # noqa: BLE001 - cell failures must not kill the batch
        return (cell.cell_id, f"{type(exc).__name__}: {exc}")


def run_batch(cells: list[BatchCell], jobs: int = 1) -> BatchResult:
    """Run cells independently; results keep the input cell order regardless
    of worker scheduling, so summaries do not depend on jobs."""
    if jobs <= 1:
        outcomes = [_run_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_cell, cells, chunksize=1))
    records = tuple(o for o in outcomes if isinstance(o, SessionRecord))
    errors = tuple(o for o in outcomes if not isinstance(o, SessionRecord))
    return BatchResult(records=records, errors=errors)
