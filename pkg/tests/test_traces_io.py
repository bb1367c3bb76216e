import json
import math

import numpy as np
import pytest

from abrlab.domain import CapacityTrace, capacity_integral
from abrlab.traces_io import (
    FormatError,
    generate_outage_trace,
    generate_random_walk_trace,
    generate_vbr_manifest,
    load_capacity_trace,
    load_manifest,
    save_capacity_trace,
    save_manifest,
)


class TestTraceRoundTrip:
    def test_finite_trace_round_trips(self, tmp_path):
        trace = CapacityTrace(((0.0, 1000.0), (2.5, 312.5), (60.0, 0.0)), duration_s=120.0)
        p = tmp_path / "t.csv"
        save_capacity_trace(trace, p)
        back = load_capacity_trace(p)
        assert back.breakpoints == trace.breakpoints
        assert back.duration_s == 120.0

    def test_infinite_trace_has_no_end_marker(self, tmp_path):
        trace = CapacityTrace(((0.0, 500.0),))
        p = tmp_path / "t.csv"
        save_capacity_trace(trace, p)
        assert not p.read_text().rstrip("\n").endswith(",")
        assert math.isinf(load_capacity_trace(p).duration_s)

    def test_save_is_canonical(self, tmp_path):
        # saving what we just loaded reproduces the bytes exactly
        trace = CapacityTrace(((0.0, 3000.0), (600.0, 0.0), (625.0, 3000.0)), duration_s=1800.0)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        save_capacity_trace(trace, a)
        save_capacity_trace(load_capacity_trace(a), b)
        assert a.read_bytes() == b.read_bytes()

    def test_exact_float_round_trip(self, tmp_path):
        c = 1000.0 / 3.0
        p = tmp_path / "t.csv"
        save_capacity_trace(CapacityTrace(((0.0, c),)), p)
        assert load_capacity_trace(p).breakpoints[0][1] == c

    def test_header_is_optional_on_load(self, tmp_path):
        p = tmp_path / "bare.csv"
        p.write_text("0,1000\n600,0\n625,1000\n")
        trace = load_capacity_trace(p)
        assert trace.breakpoints == ((0.0, 1000.0), (600.0, 0.0), (625.0, 1000.0))


class TestTraceErrors:
    def _load(self, tmp_path, text):
        p = tmp_path / "bad.csv"
        p.write_text(text)
        return load_capacity_trace(p)

    def test_bad_capacity_reports_line_number(self, tmp_path):
        with pytest.raises(FormatError, match=r"bad\.csv:3: bad capacity"):
            self._load(tmp_path, "time_s,capacity_kbps\n0,1000\n5,fast\n")

    def test_bad_time_reports_line_number(self, tmp_path):
        with pytest.raises(FormatError, match=r"bad\.csv:2: bad time"):
            self._load(tmp_path, "time_s,capacity_kbps\nsoon,1000\n")

    def test_wrong_field_count(self, tmp_path):
        with pytest.raises(FormatError, match="expected 2 fields"):
            self._load(tmp_path, "0,1000,9\n")

    def test_rows_after_end_marker_rejected(self, tmp_path):
        with pytest.raises(FormatError, match="after the end marker"):
            self._load(tmp_path, "0,1000\n600,\n700,500\n")

    def test_empty_file(self, tmp_path):
        with pytest.raises(FormatError, match="no data rows"):
            self._load(tmp_path, "time_s,capacity_kbps\n")

    def test_non_ascending_times(self, tmp_path):
        with pytest.raises(FormatError):
            self._load(tmp_path, "0,1000\n5,500\n5,200\n")

    def test_first_time_must_be_zero(self, tmp_path):
        with pytest.raises(FormatError):
            self._load(tmp_path, "1,1000\n")


class TestManifestRoundTrip:
    def test_round_trips_all_fields(self, tmp_path):
        m = generate_vbr_manifest((235.0, 1750.0), n_chunks=5, dispersion=0.35, seed=7, title_id="rt")
        p = tmp_path / "m.json"
        save_manifest(m, p)
        back = load_manifest(p)
        assert back.title_id == "rt"
        assert back.chunk_duration_s == m.chunk_duration_s
        assert back.rates_kbps == m.rates_kbps
        assert np.array_equal(back.chunk_sizes_kbit, m.chunk_sizes_kbit)

    def test_save_is_canonical(self, tmp_path):
        m = generate_vbr_manifest((500.0, 3000.0), n_chunks=3, dispersion=0.2, seed=1)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_manifest(m, a)
        save_manifest(load_manifest(a), b)
        assert a.read_bytes() == b.read_bytes()

    def test_key_order_is_stable(self, tmp_path):
        p = tmp_path / "m.json"
        save_manifest(generate_vbr_manifest((235.0,), n_chunks=1), p)
        doc = json.loads(p.read_text())
        assert list(doc) == ["title_id", "chunk_duration_s", "streams"]
        assert list(doc["streams"][0]) == ["rate_kbps", "chunk_sizes_kbit"]


class TestManifestErrors:
    def test_invalid_json_reports_line(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text('{"title_id": "x",\n  "oops"\n}')
        with pytest.raises(FormatError, match=r"m\.json:\d+: invalid JSON"):
            load_manifest(p)

    def test_missing_key(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text('{"title_id": "x", "streams": []}')
        with pytest.raises(FormatError, match="malformed"):
            load_manifest(p)

    def test_ragged_streams(self, tmp_path):
        p = tmp_path / "m.json"
        doc = {
            "title_id": "x",
            "chunk_duration_s": 4.0,
            "streams": [
                {"rate_kbps": 235, "chunk_sizes_kbit": [940.0, 940.0]},
                {"rate_kbps": 500, "chunk_sizes_kbit": [2000.0]},
            ],
        }
        p.write_text(json.dumps(doc))
        with pytest.raises(FormatError):
            load_manifest(p)

    def test_schema_violations_rejected(self, tmp_path):
        p = tmp_path / "m.json"
        doc = {
            "title_id": "x",
            "chunk_duration_s": 4.0,
            "streams": [{"rate_kbps": -5, "chunk_sizes_kbit": [940.0]}],
        }
        p.write_text(json.dumps(doc))
        with pytest.raises(FormatError):
            load_manifest(p)


class TestVbrGenerator:
    def test_zero_dispersion_is_constant_bitrate(self):
        m = generate_vbr_manifest((235.0, 500.0), n_chunks=4, chunk_duration_s=4.0)
        assert np.array_equal(m.chunk_sizes_kbit[0], np.full(4, 940.0))
        assert np.array_equal(m.chunk_sizes_kbit[1], np.full(4, 2000.0))

    def test_mean_chunk_size_matches_nominal_rate(self):
        m = generate_vbr_manifest((235.0, 1750.0, 5800.0), n_chunks=400, dispersion=0.5, seed=3)
        expect = np.array(m.rates_kbps) * m.chunk_duration_s
        assert np.allclose(m.chunk_sizes_kbit.mean(axis=1), expect, rtol=1e-12)

    def test_streams_share_the_per_chunk_multiplier(self):
        m = generate_vbr_manifest((235.0, 500.0, 3000.0), n_chunks=50, dispersion=0.4, seed=5)
        per_rate = m.chunk_sizes_kbit / np.array(m.rates_kbps)[:, None]
        assert np.allclose(per_rate, per_rate[0], rtol=1e-12)

    def test_seed_determinism(self):
        a = generate_vbr_manifest((500.0,), n_chunks=20, dispersion=0.3, seed=11)
        b = generate_vbr_manifest((500.0,), n_chunks=20, dispersion=0.3, seed=11)
        c = generate_vbr_manifest((500.0,), n_chunks=20, dispersion=0.3, seed=12)
        assert np.array_equal(a.chunk_sizes_kbit, b.chunk_sizes_kbit)
        assert not np.array_equal(a.chunk_sizes_kbit, c.chunk_sizes_kbit)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            generate_vbr_manifest((500.0,), n_chunks=3, dispersion=-0.1)
        with pytest.raises(ValueError):
            generate_vbr_manifest((500.0,), n_chunks=0)


class TestOutageGenerator:
    def test_breakpoints(self):
        trace = generate_outage_trace(3000.0, 600.0, 25.0, duration_s=1800.0)
        assert trace.breakpoints == ((0.0, 3000.0), (600.0, 0.0), (625.0, 3000.0))
        assert trace.duration_s == 1800.0
        assert capacity_integral(trace, 590.0, 635.0) == pytest.approx(60000.0)

    def test_zero_length_outage_is_constant(self):
        trace = generate_outage_trace(500.0, 600.0, 0.0)
        assert trace.breakpoints == ((0.0, 500.0),)

    def test_outage_at_start(self):
        trace = generate_outage_trace(500.0, 0.0, 10.0)
        assert trace.breakpoints == ((0.0, 0.0), (10.0, 500.0))

    def test_outage_past_duration_rejected(self):
        with pytest.raises(ValueError, match="past the trace duration"):
            generate_outage_trace(500.0, 1790.0, 25.0, duration_s=1800.0)


class TestRandomWalkGenerator:
    def test_levels_stay_in_bounds(self):
        for seed in range(30):
            trace = generate_random_walk_trace(seed, 600.0, 300.0, 6000.0)
            caps = [c for _, c in trace.breakpoints]
            assert min(caps) >= 300.0 and max(caps) <= 6000.0
            assert trace.duration_s == 600.0
            assert all(t < 600.0 for t, _ in trace.breakpoints)

    def test_deterministic_per_seed(self):
        a = generate_random_walk_trace(4, 900.0, 200.0, 4000.0)
        b = generate_random_walk_trace(4, 900.0, 200.0, 4000.0)
        assert a.breakpoints == b.breakpoints

    def test_walks_actually_move(self):
        trace = generate_random_walk_trace(0, 1800.0, 200.0, 4000.0)
        assert len(trace.breakpoints) > 5
