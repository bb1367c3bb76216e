"""Matplotlib figure rendering for session and batch artifacts.

Figures are rendered headless and saved with fixed geometry and stripped
writer metadata so repeated runs produce byte-identical PNGs.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .domain import EventKind, SessionLog

# Keys matplotlib would otherwise fill with tool name/version.
_PNG_METADATA = {"Software": None}


def _save(fig, path: str | Path) -> None:
    fig.savefig(Path(path), format="png", dpi=100, metadata=_PNG_METADATA)
    plt.close(fig)


def save_session_figure(log: SessionLog, rates_kbps, path: str | Path) -> None:
    """Buffer trajectory plus the nominal rate of each in-flight download."""
    times = [ev.time_s for ev in log.events]
    buffers = [ev.buffer_s for ev in log.events]
    rate_t, rate_v = [], []
    for ev in log.events:
        if ev.kind == EventKind.DOWNLOAD_START:
            rate_t.append(ev.time_s)
            rate_v.append(rates_kbps[ev.rate_index])
    stalls = [ev.time_s for ev in log.events if ev.kind == EventKind.REBUFFER_START]

    fig, (ax_buf, ax_rate) = plt.subplots(
        2, 1, sharex=True, figsize=(8.0, 5.0), constrained_layout=True
    )
    ax_buf.plot(times, buffers, drawstyle="default", linewidth=1.0)
    for t in stalls:
        ax_buf.axvline(t, color="red", linewidth=0.8, alpha=0.6)
    ax_buf.set_ylabel("buffer (s)")
    ax_buf.set_title(f"{log.title_id or 'session'} / {log.algorithm}")
    if rate_t:
        ax_rate.step(rate_t, rate_v, where="post", linewidth=1.0)
    ax_rate.set_ylabel("video rate (kb/s)")
    ax_rate.set_xlabel("time (s)")
    _save(fig, path)


def save_summary_figure(rows, path: str | Path) -> None:
    """Bar chart of per-algorithm metric ratios relative to the control."""
    metrics = (
        ("rebuffer_ratio", "rebuffers"),
        ("video_rate_ratio", "video rate"),
        ("switch_ratio", "switches"),
    )
    windows = sorted({row.window for row in rows}, key=lambda w: (w is None, w))
    fig, axes = plt.subplots(
        1, len(windows), figsize=(4.0 * len(windows), 4.0),
        constrained_layout=True, squeeze=False,
    )
    for ax, window in zip(axes[0], windows):
        members = [r for r in rows if r.window == window]
        labels = [r.algorithm for r in members]
        x = range(len(members))
        width = 0.8 / len(metrics)
        for j, (attr, label) in enumerate(metrics):
            vals = [getattr(r, attr) for r in members]
            ax.bar(
                [i + (j - 1) * width for i in x],
                [0.0 if v is None else v for v in vals],
                width=width,
                label=label,
            )
        ax.axhline(1.0, color="gray", linewidth=0.8, linestyle="--")
        ax.set_xticks(list(x))
        ax.set_xticklabels(labels, rotation=30, ha="right")
        ax.set_title(str(window) if window is not None else "all sessions")
    axes[0][0].set_ylabel("ratio vs control")
    axes[0][-1].legend(fontsize="small")
    _save(fig, path)
