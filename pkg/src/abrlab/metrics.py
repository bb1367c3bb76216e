"""Session quality metrics and cross-session summaries.

Per-session metrics are replayed from the event log alone, so they can be
recomputed from a saved session.log.json without rerunning the simulation.
Rates are denominated per played hour; sessions that never start playback
report None for those.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .domain import EventKind, SessionLog

SUMMARY_SCHEMA_VERSION = 1

SUMMARY_COLUMNS = (
    "algorithm",
    "window",
    "sessions",
    "rebuffers_per_playhour",
    "avg_video_rate_kbps",
    "switches_per_playhour",
    "stall_seconds_mean",
    "rebuffer_ratio",
    "video_rate_ratio",
    "switch_ratio",
)


def played_seconds(log: SessionLog) -> float:
    total = 0.0
    playing_since = None
    for ev in log.events:
        if ev.kind in (EventKind.PLAYBACK_START, EventKind.REBUFFER_END):
            playing_since = ev.time_s
        elif ev.kind in (EventKind.REBUFFER_START, EventKind.PLAYBACK_END):
            if playing_since is not None:
                total += ev.time_s - playing_since
                playing_since = None
    return total


def stall_seconds(log: SessionLog) -> float:
    total = 0.0
    stalled_since = None
    last_t = 0.0
    for ev in log.events:
        last_t = ev.time_s
        if ev.kind == EventKind.REBUFFER_START:
            stalled_since = ev.time_s
        elif ev.kind in (EventKind.REBUFFER_END, EventKind.PLAYBACK_END):
            if stalled_since is not None:
                total += ev.time_s - stalled_since
                stalled_since = None
    if stalled_since is not None:  # truncated log ends mid-stall
        total += last_t - stalled_since
    return total


def rebuffer_count(log: SessionLog) -> int:
    return sum(1 for ev in log.events if ev.kind == EventKind.REBUFFER_START)


def _per_playhour(log: SessionLog, count: int) -> float | None:
    played = played_seconds(log)
    if played <= 0:
        return None
    return count / (played / 3600.0)


def rebuffers_per_playhour(log: SessionLog) -> float | None:
    return _per_playhour(log, rebuffer_count(log))


def switches_per_playhour(log: SessionLog) -> float | None:
    switches = sum(1 for ev in log.events if ev.kind == EventKind.RATE_SWITCH)
    return _per_playhour(log, switches)


def average_video_rate(log: SessionLog, rates_kbps) -> float | None:
    """Mean nominal rate over delivered chunks, each chunk weighted equally."""
    delivered = [
        rates_kbps[ev.rate_index]
        for ev in log.events
        if ev.kind == EventKind.DOWNLOAD_END
    ]
    if not delivered:
        return None
    return sum(delivered) / len(delivered)


@dataclass(frozen=True)
class SessionMetrics:
    rebuffers_per_playhour: float | None
    avg_video_rate_kbps: float | None
    switches_per_playhour: float | None
    stall_seconds: float
    played_seconds: float

    def to_dict(self) -> dict:
        return {
            "schema_version": SUMMARY_SCHEMA_VERSION,
            "rebuffers_per_playhour": self.rebuffers_per_playhour,
            "avg_video_rate_kbps": self.avg_video_rate_kbps,
            "switches_per_playhour": self.switches_per_playhour,
            "stall_seconds": self.stall_seconds,
            "played_seconds": self.played_seconds,
        }


def session_metrics(log: SessionLog, rates_kbps) -> SessionMetrics:
    return SessionMetrics(
        rebuffers_per_playhour=rebuffers_per_playhour(log),
        avg_video_rate_kbps=average_video_rate(log, rates_kbps),
        switches_per_playhour=switches_per_playhour(log),
        stall_seconds=stall_seconds(log),
        played_seconds=played_seconds(log),
    )


@dataclass(frozen=True)
class SummaryRow:
    algorithm: str
    window: str | None
    sessions: int
    rebuffers_per_playhour: float | None
    avg_video_rate_kbps: float | None
    switches_per_playhour: float | None
    stall_seconds_mean: float | None
    rebuffer_ratio: float | None
    video_rate_ratio: float | None
    switch_ratio: float | None

    def to_dict(self) -> dict:
        return {col: getattr(self, col) for col in SUMMARY_COLUMNS}


def _mean(values) -> float | None:
    defined = [v for v in values if v is not None]
    if not defined:
        return None
    return sum(defined) / len(defined)


def _ratio(value: float | None, control: float | None) -> float | None:
    if value is None or control is None or control == 0:
        return None
    return value / control


def aggregate_and_normalize(per_session, control_name: str) -> list[SummaryRow]:
    """Group per-session metrics and normalize against a control algorithm.

    per_session: iterable of (algorithm, window, SessionMetrics). Every
    window must include the control algorithm; ratios are group mean over
    control mean within the same window.
    """
    groups: dict[tuple[str, str | None], list[SessionMetrics]] = {}
    for algorithm, window, sm in per_session:
        groups.setdefault((algorithm, window), []).append(sm)

    windows = {w for _, w in groups}
    control_means: dict[str | None, tuple] = {}
    for window in windows:
        control = groups.get((control_name, window))
        if not control:
            raise ValueError(
                f"control algorithm {control_name!r} has no sessions in window {window!r}"
            )
        control_means[window] = (
            _mean([m.rebuffers_per_playhour for m in control]),
            _mean([m.avg_video_rate_kbps for m in control]),
            _mean([m.switches_per_playhour for m in control]),
        )

    rows = []
    for (algorithm, window), members in sorted(
        groups.items(), key=lambda kv: (kv[0][1] or "", kv[0][0])
    ):
        rebuf = _mean([m.rebuffers_per_playhour for m in members])
        rate = _mean([m.avg_video_rate_kbps for m in members])
        switches = _mean([m.switches_per_playhour for m in members])
        c_rebuf, c_rate, c_switch = control_means[window]
        rows.append(
            SummaryRow(
                algorithm=algorithm,
                window=window,
                sessions=len(members),
                rebuffers_per_playhour=rebuf,
                avg_video_rate_kbps=rate,
                switches_per_playhour=switches,
                stall_seconds_mean=_mean([m.stall_seconds for m in members]),
                rebuffer_ratio=_ratio(rebuf, c_rebuf),
                video_rate_ratio=_ratio(rate, c_rate),
                switch_ratio=_ratio(switches, c_switch),
            )
        )
    return rows


def write_summary_csv(rows: list[SummaryRow], path: str | Path) -> None:
    with Path(path).open("w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow(
                ["" if v is None else v for v in (getattr(row, c) for c in SUMMARY_COLUMNS)]
            )


def write_summary_json(rows: list[SummaryRow], path: str | Path) -> None:
    doc = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "rows": [row.to_dict() for row in rows],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8", newline="\n")
