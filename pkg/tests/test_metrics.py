import json

import pytest

from abrlab.domain import Event, EventKind, SessionLog, SessionState
from abrlab.metrics import (
    SessionMetrics,
    aggregate_and_normalize,
    average_video_rate,
    played_seconds,
    rebuffers_per_playhour,
    session_metrics,
    stall_seconds,
    switches_per_playhour,
    write_summary_csv,
    write_summary_json,
)
from abrlab.simulator import simulate_session
from abrlab.domain import CapacityTrace, SessionConfig
from tests.conftest import cbr_manifest


def make_log(events):
    return SessionLog(events=tuple(events), final_state=SessionState(), algorithm="x")


def ev(t, kind, **kw):
    return Event(time_s=t, kind=kind, buffer_s=0.0, **kw)


class TestPlayedAndStalled:
    def test_single_stall_timeline(self):
        log = make_log([
            ev(5.0, EventKind.PLAYBACK_START),
            ev(20.0, EventKind.REBUFFER_START),
            ev(30.0, EventKind.REBUFFER_END),
            ev(50.0, EventKind.PLAYBACK_END),
        ])
        assert played_seconds(log) == pytest.approx(35.0)
        assert stall_seconds(log) == pytest.approx(10.0)

    def test_truncated_log_ends_mid_stall(self):
        log = make_log([
            ev(0.0, EventKind.PLAYBACK_START),
            ev(10.0, EventKind.REBUFFER_START),
            ev(13.0, EventKind.DOWNLOAD_START, chunk_index=3, rate_index=0),
        ])
        assert played_seconds(log) == pytest.approx(10.0)
        assert stall_seconds(log) == pytest.approx(3.0)

    def test_no_playback(self):
        log = make_log([ev(0.0, EventKind.DOWNLOAD_START, chunk_index=0, rate_index=0)])
        assert played_seconds(log) == 0.0
        assert stall_seconds(log) == 0.0


class TestRateMetrics:
    def test_two_stalls_in_half_an_hour_played(self):
        log = make_log([
            ev(0.0, EventKind.PLAYBACK_START),
            ev(900.0, EventKind.REBUFFER_START),
            ev(910.0, EventKind.REBUFFER_END),
            ev(1810.0, EventKind.REBUFFER_START),
            ev(1820.0, EventKind.REBUFFER_END),
            ev(1820.0, EventKind.PLAYBACK_END),
        ])
        assert played_seconds(log) == pytest.approx(1800.0)
        assert rebuffers_per_playhour(log) == pytest.approx(4.0)

    def test_no_play_time_gives_none(self):
        log = make_log([ev(0.0, EventKind.DOWNLOAD_START, chunk_index=0, rate_index=0)])
        assert rebuffers_per_playhour(log) is None
        assert switches_per_playhour(log) is None

    def test_average_rate_weighs_chunks_equally(self):
        log = make_log([
            ev(1.0, EventKind.DOWNLOAD_END, chunk_index=0, rate_index=0),
            ev(2.0, EventKind.DOWNLOAD_END, chunk_index=1, rate_index=0),
            ev(3.0, EventKind.DOWNLOAD_END, chunk_index=2, rate_index=2),
        ])
        assert average_video_rate(log, (235.0, 500.0, 1000.0)) == pytest.approx(490.0)

    def test_average_rate_counts_only_completed_downloads(self):
        log = make_log([ev(0.0, EventKind.DOWNLOAD_START, chunk_index=0, rate_index=2)])
        assert average_video_rate(log, (235.0, 500.0, 1000.0)) is None

    def test_switches_per_playhour(self):
        events = [ev(0.0, EventKind.PLAYBACK_START)]
        events += [ev(100.0 * (i + 1), EventKind.RATE_SWITCH, rate_index=1) for i in range(3)]
        events.append(ev(7200.0, EventKind.PLAYBACK_END))
        assert switches_per_playhour(make_log(events)) == pytest.approx(1.5)

    def test_time_translation_invariance(self):
        base = [
            ev(0.0, EventKind.PLAYBACK_START),
            ev(40.0, EventKind.RATE_SWITCH, rate_index=1),
            ev(900.0, EventKind.REBUFFER_START),
            ev(905.0, EventKind.REBUFFER_END),
            ev(1805.0, EventKind.PLAYBACK_END),
        ]
        shifted = [
            Event(e.time_s + 1234.5, e.kind, e.buffer_s, e.chunk_index, e.rate_index)
            for e in base
        ]
        a = session_metrics(make_log(base), (235.0,))
        b = session_metrics(make_log(shifted), (235.0,))
        assert a == b


class TestSimulatedSessionMetrics:
    def test_metrics_from_a_real_session(self, make_cbr):
        manifest = make_cbr(rates=(235.0, 500.0, 1000.0), n_chunks=30)
        trace = CapacityTrace(((0.0, 800.0),))
        log = simulate_session(manifest, trace, "bba1", SessionConfig(abr_algorithm="bba1"))
        sm = session_metrics(log, manifest.rates_kbps)
        assert sm.played_seconds == pytest.approx(30 * 4.0)
        assert sm.rebuffers_per_playhour == 0.0
        assert 235.0 <= sm.avg_video_rate_kbps <= 1000.0
        # survives a JSON round trip, including null for absent values
        again = json.loads(json.dumps(sm.to_dict()))
        assert again["played_seconds"] == pytest.approx(120.0)


def sm(rebuf=None, rate=None, switches=None, stall=0.0, played=0.0):
    return SessionMetrics(rebuf, rate, switches, stall, played)


class TestAggregation:
    def test_normalizes_against_control_per_window(self):
        per_session = [
            ("ewma", "w1", sm(rebuf=2.0, rate=1000.0, switches=4.0, played=600.0)),
            ("ewma", "w1", sm(rebuf=2.0, rate=1200.0, switches=4.0, played=600.0)),
            ("bba1", "w1", sm(rebuf=1.5, rate=990.0, switches=2.0, played=600.0)),
            ("ewma", "w2", sm(rebuf=1.0, rate=500.0, switches=1.0, played=600.0)),
            ("bba1", "w2", sm(rebuf=1.0, rate=600.0, switches=3.0, played=600.0)),
        ]
        rows = {(r.algorithm, r.window): r for r in aggregate_and_normalize(per_session, "ewma")}
        assert rows[("bba1", "w1")].rebuffer_ratio == pytest.approx(0.75)
        assert rows[("bba1", "w1")].video_rate_ratio == pytest.approx(0.9)
        assert rows[("bba1", "w1")].switch_ratio == pytest.approx(0.5)
        assert rows[("ewma", "w1")].rebuffer_ratio == pytest.approx(1.0)
        assert rows[("ewma", "w1")].avg_video_rate_kbps == pytest.approx(1100.0)
        assert rows[("bba1", "w2")].video_rate_ratio == pytest.approx(1.2)
        assert rows[("bba1", "w1")].sessions == 1

    def test_missing_control_in_a_window_is_an_error(self):
        per_session = [
            ("ewma", "w1", sm(rebuf=1.0, played=600.0)),
            ("bba1", "w2", sm(rebuf=1.0, played=600.0)),
        ]
        with pytest.raises(ValueError, match="no sessions in window 'w2'"):
            aggregate_and_normalize(per_session, "ewma")

    def test_zero_control_mean_gives_none_ratio(self):
        per_session = [
            ("ewma", None, sm(rebuf=0.0, rate=500.0, switches=2.0, played=600.0)),
            ("bba1", None, sm(rebuf=1.0, rate=400.0, switches=1.0, played=600.0)),
        ]
        rows = {r.algorithm: r for r in aggregate_and_normalize(per_session, "ewma")}
        assert rows["bba1"].rebuffer_ratio is None
        assert rows["bba1"].video_rate_ratio == pytest.approx(0.8)

    def test_sessions_without_playback_do_not_poison_means(self):
        per_session = [
            ("ewma", None, sm(rebuf=2.0, rate=500.0, switches=2.0, played=600.0)),
            ("bba1", None, sm(rebuf=1.0, rate=500.0, switches=2.0, played=600.0)),
            ("bba1", None, sm()),  # never started playing
        ]
        rows = {r.algorithm: r for r in aggregate_and_normalize(per_session, "ewma")}
        assert rows["bba1"].rebuffers_per_playhour == pytest.approx(1.0)
        assert rows["bba1"].sessions == 2

    def test_rows_sorted_by_window_then_algorithm(self):
        per_session = [
            ("ewma", "b", sm(rebuf=1.0, played=1.0)),
            ("ewma", "a", sm(rebuf=1.0, played=1.0)),
            ("bba1", "a", sm(rebuf=1.0, played=1.0)),
        ]
        rows = aggregate_and_normalize(per_session, "ewma")
        assert [(r.window, r.algorithm) for r in rows] == [("a", "bba1"), ("a", "ewma"), ("b", "ewma")]


class TestSummaryFiles:
    def test_csv_and_json_bytes(self, tmp_path):
        per_session = [
            ("ewma", None, sm(rebuf=2.0, rate=1000.0, switches=4.0, stall=10.0, played=600.0)),
            ("bba1", None, sm(rebuf=1.0, rate=900.0, switches=2.0, stall=5.0, played=600.0)),
        ]
        rows = aggregate_and_normalize(per_session, "ewma")
        csv_path = tmp_path / "summary.csv"
        json_path = tmp_path / "summary.json"
        write_summary_csv(rows, csv_path)
        write_summary_json(rows, json_path)
        text = csv_path.read_text()
        assert text.splitlines()[0] == (
            "algorithm,window,sessions,rebuffers_per_playhour,avg_video_rate_kbps,"
            "switches_per_playhour,stall_seconds_mean,rebuffer_ratio,video_rate_ratio,switch_ratio"
        )
        assert "bba1,,1,1.0,900.0,2.0,5.0,0.5,0.9,0.5" in text.splitlines()
        doc = json.loads(json_path.read_text())
        assert doc["schema_version"] == 1
        assert doc["rows"][0]["algorithm"] == "bba1"
        assert doc["rows"][0]["window"] is None
