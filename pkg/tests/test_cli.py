import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

import seebench as sb
from seebench import analysis
from seebench.cli import main
from seebench.classify import ResetLog, RunParams, chip_status
from seebench.io import dump_campaign_config, load_run_manifest

from helpers import ST01_SIGMA, bunched_reset_times, st01_conditions_config


@pytest.fixture()
def st01_cfg_file(tmp_path):
    # trimmed ST01-style campaign so CLI runs stay fast
    cfg = st01_conditions_config(seed=1, total_duration=600.0,
                                 phase_plan=(500.0, 50.0))
    path = tmp_path / "st01-short.cfg"
    dump_campaign_config(cfg, path)
    return path


class TestSimulate:
    def test_writes_run_artifacts_and_manifest(self, tmp_path, st01_cfg_file):
        out = tmp_path / "run"
        assert main(["simulate", "--config", str(st01_cfg_file),
                     "--seed", "1", "--out", str(out)]) == 0
        for name in ("telemetry.csv", "events.csv", "manifest.json", "config.cfg"):
            assert (out / name).exists()
        manifest = load_run_manifest(out / "manifest.json")
        assert manifest["fw_block_cross_section"] == pytest.approx(ST01_SIGMA)
        assert manifest["gpio_seconds"] == 550.0
        assert manifest["seed"] == 1

    def test_preset_manifest_records_reference_conditions(self, tmp_path):
        out = tmp_path / "st01"
        assert main(["simulate", "--config", "st01", "--seed", "1",
                     "--out", str(out)]) == 0
        manifest = load_run_manifest(out / "manifest.json")
        assert manifest["gpio_seconds"] == 6027.0
        assert manifest["fw_block_cross_section"] == pytest.approx(8.0792e-5)
        assert manifest["nominal_flux"] == pytest.approx(1675.793)

    def test_same_config_and_seed_is_byte_identical(self, tmp_path, st01_cfg_file):
        outs = [tmp_path / "a", tmp_path / "b"]
        for out in outs:
            assert main(["simulate", "--config", str(st01_cfg_file),
                         "--seed", "7", "--out", str(out)]) == 0
        assert (outs[0] / "events.csv").read_bytes() == (outs[1] / "events.csv").read_bytes()
        assert (outs[0] / "telemetry.csv").read_bytes() == \
            (outs[1] / "telemetry.csv").read_bytes()

    def test_invalid_config_exits_1_without_partial_outputs(self, tmp_path):
        cfg = replace(st01_conditions_config(), watchdog_timeout=0.0)
        path = tmp_path / "bad.cfg"
        dump_campaign_config(cfg, path)
        out = tmp_path / "never"
        assert main(["simulate", "--config", str(path), "--out", str(out)]) == 1
        assert not out.exists()

    def test_seed_range_fans_out(self, tmp_path, st01_cfg_file):
        out = tmp_path / "sweep"
        assert main(["simulate", "--config", str(st01_cfg_file),
                     "--seed", "3..5", "--out", str(out)]) == 0
        assert sorted(p.name for p in out.iterdir()) == \
            ["seed-3", "seed-4", "seed-5"]

    def test_missing_config_exits_1(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "nope.cfg"),
                     "--out", str(tmp_path / "x")]) == 1


class TestAnalyze:
    def test_reports_row_and_writes_bundle(self, tmp_path, st01_cfg_file, capsys):
        run = tmp_path / "run"
        main(["simulate", "--config", str(st01_cfg_file), "--seed", "2",
              "--out", str(run)])
        out = tmp_path / "analysis"
        assert main(["analyze", str(run / "telemetry.csv"), str(run / "events.csv"),
                     "--config", str(st01_cfg_file), "--out", str(out)]) == 0
        captured = capsys.readouterr().out
        assert "sigma" in captured
        data = json.loads((out / "analysis.json").read_text())
        assert data["n_sel"] == 0
        assert data["passed"] is True

    def test_missing_event_log_exits_2(self, tmp_path, st01_cfg_file):
        run = tmp_path / "run"
        main(["simulate", "--config", str(st01_cfg_file), "--seed", "2",
              "--out", str(run)])
        assert main(["analyze", str(run / "telemetry.csv"),
                     str(run / "missing.csv"), "--config", str(st01_cfg_file)]) == 2

    def test_dark_run_prints_undefined_sigma(self, tmp_path, capsys):
        cfg = st01_conditions_config(seed=0, total_duration=120.0)
        cfg = replace(cfg, beam=replace(cfg.beam, nominal_flux=0.0),
                      dut=sb.DutProfile())
        path = tmp_path / "dark.cfg"
        dump_campaign_config(cfg, path)
        run = tmp_path / "run"
        main(["simulate", "--config", str(path), "--out", str(run)])
        assert main(["analyze", str(run / "telemetry.csv"), str(run / "events.csv"),
                     "--config", str(path)]) == 0
        assert "sigma undefined" in capsys.readouterr().out


class TestClassify:
    def _events_file(self, tmp_path, name, times, duration):
        from seebench import io as sio
        log = sb.EventLog()
        for t in times:
            log.append(sb.Event(t, sb.EventKind.HARD_RESET, {"cause": "watchdog"}))
        log.append(sb.Event(duration, sb.EventKind.SCINT_COUNT,
                            {"counts": 0, "area_cm2": 1.0, "duration_s": 0.0}))
        path = tmp_path / name
        header = sio.TelemetryFileHeader(1, name, "d", ("6:I_IO",), 0.1, "2000")
        sio.write_events(log, header, path)
        return path

    def test_broken_sample(self, tmp_path, capsys):
        irr = self._events_file(tmp_path, "irr.csv",
                                bunched_reset_times(2000.0, 10543.0), 10543.0)
        bench = self._events_file(tmp_path, "bench.csv",
                                  bunched_reset_times(0.0, 7200.0), 7200.0)
        assert main(["classify", str(irr), str(bench)]) == 0
        assert "verdict: broken" in capsys.readouterr().out

    def test_damaged_sample(self, tmp_path, capsys):
        irr = self._events_file(tmp_path, "irr.csv",
                                bunched_reset_times(40000.0, 50365.0), 50365.0)
        bench = self._events_file(tmp_path, "bench.csv",
                                  [700.0, 1900.0, 2411.0, 3217.0, 4021.0,
                                   4801.0, 5623.0, 6421.0], 7200.0)
        assert main(["classify", str(irr), str(bench)]) == 0
        assert "verdict: damaged" in capsys.readouterr().out

    def test_empty_logs_are_fine(self, tmp_path, capsys):
        irr = self._events_file(tmp_path, "irr.csv", [], 1000.0)
        assert main(["classify", str(irr)]) == 0
        assert "verdict: fine" in capsys.readouterr().out

    def test_run_parameters_are_flags(self, tmp_path, capsys):
        times = [100.0 + 9.0 * k for k in range(30)]
        irr = self._events_file(tmp_path, "irr.csv", times, 400.0)
        assert main(["classify", str(irr), "--period", "9.0",
                     "--tolerance", "0.5", "--min-run", "4",
                     "--gpio-cycle", "200.0"]) == 0
        assert "verdict: broken" in capsys.readouterr().out


class TestVerifyAndReport:
    def test_verify_exits_zero_on_clean_build(self, capsys):
        assert main(["verify"]) == 0
        out = capsys.readouterr().out
        assert "27/27 reference values reproduced" in out
        assert "FAIL" not in out

    def test_verify_env_override_can_fail(self, capsys, monkeypatch):
        monkeypatch.setenv(analysis.TOLERANCE_ENV_VAR, "1e-9")
        assert main(["verify"]) == 3
        monkeypatch.delenv(analysis.TOLERANCE_ENV_VAR)

    def test_report_empty_inputs_warns_but_succeeds(self, tmp_path, capsys):
        assert main(["report", "--out", str(tmp_path / "rep")]) == 0
        assert "warning" in capsys.readouterr().err

    def test_report_renders_tables_and_series(self, tmp_path, st01_cfg_file):
        run = tmp_path / "run"
        main(["simulate", "--config", str(st01_cfg_file), "--seed", "2",
              "--out", str(run)])
        an = tmp_path / "an"
        main(["analyze", str(run / "telemetry.csv"), str(run / "events.csv"),
              "--config", str(st01_cfg_file), "--out", str(an)])
        rep = tmp_path / "rep"
        assert main(["report", str(an / "analysis.json"), "--out", str(rep)]) == 0
        tables = {p.name for p in rep.iterdir()}
        assert "table_cross_sections.csv" in tables
        assert any(name.endswith("adc_current_vs_time.csv") for name in tables)

    def test_unknown_flag_is_a_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["verify", "--frobnicate"])
        assert excinfo.value.code == 1


def test_pipeline_over_200_seeds_reproduces_the_reference_cross_section():
    """simulate -> analyze -> classify across an ensemble of campaigns."""
    base = st01_conditions_config()
    sigmas = []
    for seed in range(200):
        result = sb.run_campaign(replace(base, seed=seed), collect_telemetry=False)
        row = analysis.analyze_result(result)
        assert row.passed is True
        sigmas.append(row.sigma_cm2)
        times = tuple(sorted(result.events.times(
            sb.EventKind.HARD_RESET, sb.EventKind.SOFT_RESET)))
        verdict = chip_status(ResetLog(times, base.total_duration), None, RunParams())
        assert verdict.status is sb.Health.FINE
    mean_sigma = float(np.mean(sigmas))
    assert abs(mean_sigma - 8.08e-5) / 8.08e-5 < 0.05
