import io as io_buffers
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

import seebench as sb
from seebench import io as sio
from seebench import reference
from seebench.domain import MONITORED_CHANNELS

from helpers import ion_phased_config

PINS = [ch.pin for ch in MONITORED_CHANNELS]


def _header(campaign="t", tick=0.1):
    order = tuple(f"{ch.pin}:{ch.name}" for ch in MONITORED_CHANNELS)
    return sio.TelemetryFileHeader(1, campaign, "abc123", order, tick,
                                   "2000-01-01T00:00:00Z")


def _record(t=0.0, ma=50.0 / 14, power=True, phase=sb.Phase.GPIO, heartbeat=True):
    currents = {pin: round(ma, 3) for pin in PINS}
    return sb.TelemetryRecord.from_currents(t, currents, heartbeat, phase, power)


class TestTelemetryFormat:
    def test_empty_records_is_header_only(self):
        buf = io_buffers.StringIO()
        n = sio.write_telemetry([], _header(), buf)
        text = buf.getvalue()
        assert n == len(text.encode())
        assert text.count("\n") == 1
        assert text.startswith("#seebench-telemetry,1,")

    def test_baseline_record_sum_field(self):
        buf = io_buffers.StringIO()
        sio.write_telemetry([_record()], _header(), buf)
        line = buf.getvalue().splitlines()[1]
        cells = line.split(",")
        assert len(cells) == 19
        assert cells[15] == "0.0500"  # 14 channels sharing 50 mA, in A

    def test_round_trip_of_records(self):
        # 3.5 mA per channel: both the currents and the 0.0490 A sum sit
        # exactly on the format's precision grid
        records = [_record(t=round(i * 0.1, 4), ma=3.5) for i in range(5)]
        records.append(_record(t=0.5, ma=3.5, power=False, phase=sb.Phase.OFF,
                               heartbeat=False))
        buf = io_buffers.StringIO()
        sio.write_telemetry(records, _header(), buf)
        buf.seek(0)
        header, parsed = sio.parse_telemetry(buf)
        assert header == _header()
        assert parsed == records

    def test_write_parse_write_is_byte_stable(self):
        records = [_record(t=i * 0.1, ma=3.572) for i in range(50)]
        first = io_buffers.StringIO()
        sio.write_telemetry(records, _header(), first)
        first.seek(0)
        header, parsed = sio.parse_telemetry(first)
        second = io_buffers.StringIO()
        sio.write_telemetry(parsed, header, second)
        assert second.getvalue() == first.getvalue()

    def test_trailing_newline_tolerated(self):
        buf = io_buffers.StringIO()
        sio.write_telemetry([_record()], _header(), buf)
        header, parsed = sio.parse_telemetry(io_buffers.StringIO(buf.getvalue() + "\n"))
        assert len(parsed) == 1

    def test_wrong_channel_count_reports_line_and_expectation(self):
        buf = io_buffers.StringIO()
        sio.write_telemetry([_record()], _header(), buf)
        lines = buf.getvalue().splitlines()
        cells = lines[1].split(",")
        del cells[3]  # drop one current
        broken = "\n".join([lines[0], ",".join(cells)])
        with pytest.raises(sio.TelemetryFormatError, match="expected 14 channels"):
            sio.parse_telemetry(io_buffers.StringIO(broken))

    def test_unsupported_version_rejected(self):
        buf = io_buffers.StringIO()
        sio.write_telemetry([], _header(), buf)
        bumped = buf.getvalue().replace("#seebench-telemetry,1,", "#seebench-telemetry,2,")
        with pytest.raises(sio.TelemetryFormatError, match="unsupported format version 2"):
            sio.parse_telemetry(io_buffers.StringIO(bumped))

    def test_malformed_cell_names_line_number(self):
        buf = io_buffers.StringIO()
        sio.write_telemetry([_record(), _record(t=0.1)], _header(), buf)
        corrupted = buf.getvalue().replace("0.1000", "zap", 1)
        with pytest.raises(sio.TelemetryFormatError, match="line 3"):
            sio.parse_telemetry(io_buffers.StringIO(corrupted))

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.tuples(st.floats(0, 999, allow_nan=False),
                              st.booleans(), st.booleans()),
                    min_size=1, max_size=20))
    def test_round_trip_at_format_precision(self, rows):
        records = []
        for i, (ma, heartbeat, power) in enumerate(sorted(rows)):
            records.append(_record(t=round(i * 0.1, 4), ma=round(ma, 3),
                                   power=power, heartbeat=heartbeat,
                                   phase=sb.Phase.OFF if not power else sb.Phase.GPIO))
        buf = io_buffers.StringIO()
        sio.write_telemetry(records, _header(), buf)
        buf.seek(0)
        _header_out, parsed = sio.parse_telemetry(buf)
        for original, round_tripped in zip(records, parsed):
            assert round_tripped.t == pytest.approx(original.t, abs=5e-5)
            assert round_tripped.power_on == original.power_on
            assert round_tripped.heartbeat_ok == original.heartbeat_ok
            for pin in original.currents:
                assert round_tripped.currents[pin] == pytest.approx(
                    original.currents[pin], abs=5e-4)


class TestEventFormat:
    def test_round_trip_with_payloads(self):
        log = sb.EventLog()
        log.append(sb.Event(0.123456789, sb.EventKind.FW_BLOCK, {}))
        log.append(sb.Event(6.9, sb.EventKind.HARD_RESET, {"cause": "watchdog"}))
        log.append(sb.Event(40.0, sb.EventKind.SCINT_COUNT,
                            {"counts": 213000, "area_cm2": 3.14159, "duration_s": 40.0}))
        buf = io_buffers.StringIO()
        sio.write_events(log, _header(), buf)
        buf.seek(0)
        _h, parsed = sio.parse_events(buf)
        assert parsed == log

    def test_out_of_order_stream_rejected(self):
        buf = io_buffers.StringIO()
        log = sb.EventLog([sb.Event(5.0, sb.EventKind.FW_BLOCK)])
        sio.write_events(log, _header(), buf)
        tampered = buf.getvalue() + "1.0,FwBlock,{}\n"
        with pytest.raises(sio.TelemetryFormatError, match="line 3"):
            sio.parse_events(io_buffers.StringIO(tampered))

    def test_unknown_kind_rejected(self):
        buf = io_buffers.StringIO()
        sio.write_events(sb.EventLog(), _header(), buf)
        tampered = buf.getvalue() + "1.0,Gremlin,{}\n"
        with pytest.raises(sio.TelemetryFormatError):
            sio.parse_events(io_buffers.StringIO(tampered))


class TestConfigFormat:
    MINIMAL = ("beam.species = Kr84\n"
               "beam.let = 45.0\n"
               "beam.nominal_flux = 1675.793\n"
               "campaign.total_duration = 6427.0\n")

    def test_defaults_applied_to_minimal_config(self):
        cfg = sio.loads_campaign_config(self.MINIMAL)
        assert cfg.watchdog_timeout == 6.7
        assert cfg.latchup_threshold == 1.0
        assert cfg.latchup_deadtime == 2.0
        assert cfg.gpio_cycle == 40.0
        assert cfg.phase_plan == (600.0, 40.0)

    def test_type_error_names_path(self):
        bad = self.MINIMAL + "campaign.watchdog_timeout = abc\n"
        with pytest.raises(sio.ConfigFormatError, match="campaign.watchdog_timeout"):
            sio.loads_campaign_config(bad)

    def test_unknown_key_rejected(self):
        bad = self.MINIMAL + "campaign.warp_factor = 9\n"
        with pytest.raises(sio.ConfigFormatError, match="warp_factor"):
            sio.loads_campaign_config(bad)

    def test_missing_required_keys_reported(self):
        with pytest.raises(sio.ConfigFormatError, match="beam.let"):
            sio.loads_campaign_config("beam.species = Kr84\n")

    def test_duplicate_key_rejected(self):
        bad = self.MINIMAL + "beam.let = 34.0\n"
        with pytest.raises(sio.ConfigFormatError, match="duplicate"):
            sio.loads_campaign_config(bad)

    def test_unknown_species_rejected(self):
        bad = self.MINIMAL.replace("Kr84", "Xe131")
        with pytest.raises(sio.ConfigFormatError, match="Xe131"):
            sio.loads_campaign_config(bad)

    def test_st01_preset_values(self):
        from pathlib import Path
        preset = Path(sio.__file__).parent / "presets" / "st01.cfg"
        cfg = sio.load_campaign_config(preset)
        assert cfg.beam.let == 45.0
        assert cfg.beam.nominal_flux == pytest.approx(1.68e3, rel=5e-3)
        timeline = sb.generate_phase_timeline(cfg)
        assert timeline.gpio_seconds() == 6027.0
        assert cfg.dut.fw_sigma(sb.Species.KR84) == pytest.approx(8.08e-5, rel=1e-3)

    def test_dump_load_round_trip(self):
        cfg = ion_phased_config(seed=77)
        cfg = replace(cfg, dut=replace(
            cfg.dut, sel_cross_section={sb.Species.KR84: 5e-6}, force_break_at=12.5))
        assert sio.loads_campaign_config(sio.dumps_campaign_config(cfg)) == cfg


class TestReferenceFixture:
    def test_completeness(self):
        tables = sio.load_reference_tables()
        assert len(tables.ion_results) == 8
        assert len(tables.cross_sections) == 8
        assert len(tables.environments) == 2
        assert len(tables.neutron_results) == 7
        assert len(tables.reset_summary) == 7

    def test_spot_values(self):
        tables = sio.load_reference_tables()
        assert tables.cross_section_row("ST05").n_fw_block == 1248
        assert tables.neutron_row("S7").fluence_before_break.value == 5.89e9
        assert tables.reset_row("S13").after_transistor == 12

    def test_unquantified_cell_is_flagged(self):
        tables = sio.load_reference_tables()
        row = tables.reset_row("S15")
        assert row.radiationless == 0
        assert row.radiationless_missing_in_source

    def test_checksum_guards_against_edits(self, monkeypatch):
        monkeypatch.setattr(reference, "FIXTURE_SHA256", "0" * 64)
        with pytest.raises(reference.ReferenceIntegrityError):
            sio.load_reference_tables()

    def test_every_value_carries_its_printed_text(self):
        tables = sio.load_reference_tables()
        for row in tables.cross_sections:
            assert row.sigma.text.count("e") == 1
            assert row.sigma.sig_figs == 3


def test_manifest_round_trip(tmp_path):
    manifest = {"campaign_id": "x", "seed": 3, "fluence_cm2": 1.01e7}
    path = tmp_path / "manifest.json"
    sio.write_run_manifest(path, manifest)
    assert sio.load_run_manifest(path) == manifest


def test_sink_failure_reports_partial_position():
    class FlakySink:
        def __init__(self):
            self.calls = 0

        def write(self, data):
            self.calls += 1
            if self.calls > 1:
                raise OSError("disk full")

    with pytest.raises(sio.SinkError) as excinfo:
        sio.write_telemetry([_record(), _record(t=0.1)], _header(), FlakySink())
    assert excinfo.value.bytes_written > 0
