"""Command-line surface: simulate, analyze, classify, verify, report.

Exit codes: 0 success, 1 usage or config error, 2 data error,
3 verification failure. Unknown flags are errors. All commands are
idempotent on identical inputs and stamp their outputs with the config
digest for provenance.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import analysis, io, simulator
from .classify import ResetLog, RunParams, chip_status
from .domain import ConfigValidationError, EventKind, Phase, validate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VERIFY = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="seebench",
                     description="Single-event-effects test bench: simulate "
                                 "irradiation campaigns and reproduce the "
                                 "published analysis tables.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a campaign and write its logs")
    p_sim.add_argument("--config", required=True, help="campaign config file or preset name")
    p_sim.add_argument("--seed", default=None,
                       help="seed or inclusive range N..M (fans out one run per seed)")
    p_sim.add_argument("--out", required=True, help="output directory")

    p_an = sub.add_parser("analyze", help="reduce a run to its table row")
    p_an.add_argument("telemetry", help="telemetry file")
    p_an.add_argument("events", help="event log file")
    p_an.add_argument("--config", required=True, help="campaign config (beam spec source)")
    p_an.add_argument("--out", default=None, help="directory for analysis.json")

    p_cl = sub.add_parser("classify", help="health verdict from reset logs")
    p_cl.add_argument("irradiation_events", help="irradiation event log")
    p_cl.add_argument("radiationless_events", nargs="?", default=None,
                      help="radiation-less event log (optional)")
    p_cl.add_argument("--period", type=float, default=7.0, help="reset period, s")
    p_cl.add_argument("--tolerance", type=float, default=1.0, help="period tolerance, s")
    p_cl.add_argument("--min-run", type=int, default=5, dest="min_run",
                      help="minimum resets per qualifying run")
    p_cl.add_argument("--gpio-cycle", type=float, default=40.0, dest="gpio_cycle",
                      help="GPIO test cycle, s")

    sub.add_parser("verify", help="recompute the published tables from the fixture")

    p_rep = sub.add_parser("report", help="render table and plot-data files")
    p_rep.add_argument("analyses", nargs="*", help="analysis.json files")
    p_rep.add_argument("--out", required=True, help="output directory")
    return parser


def _load_config(spec: str):
    path = Path(spec)
    if not path.exists():
        preset = Path(__file__).parent / "presets" / f"{spec}.cfg"
        if preset.exists():
            path = preset
        else:
            raise io.ConfigFormatError(f"no such config file or preset: {spec}")
    return io.load_campaign_config(path)


def _parse_seeds(raw: str | None, default: int) -> list[int]:
    if raw is None:
        return [default]
    if ".." in raw:
        lo, hi = raw.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(raw)]


def cmd_simulate(args) -> int:
    try:
        config = _load_config(args.config)
        seeds = _parse_seeds(args.seed, config.seed)
    except (io.ConfigFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    violations = validate(config)
    if violations:
        for item in violations:
            print(f"invalid config: {item}", file=sys.stderr)
        return EXIT_USAGE

    out_root = Path(args.out)
    for seed in seeds:
        cfg = replace(config, seed=seed)
        result = simulator.run_campaign(cfg)
        run_dir = out_root if len(seeds) == 1 else out_root / f"seed-{seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        header = io.header_for(cfg, result.config_digest)
        io.write_telemetry(result.telemetry, header, run_dir / "telemetry.csv")
        io.write_events(result.events, header, run_dir / "events.csv")
        io.dump_campaign_config(cfg, run_dir / "config.cfg")
        beam = cfg.beam
        io.write_run_manifest(run_dir / "manifest.json", {
            "campaign_id": cfg.campaign_id,
            "seed": seed,
            "config_digest": result.config_digest,
            "species": beam.species.value,
            "let": beam.let,
            "nominal_flux": beam.nominal_flux,
            "fw_block_cross_section": cfg.dut.fw_sigma(beam.species),
            "sel_cross_section": cfg.dut.sel_sigma(beam.species),
            "total_duration_s": cfg.total_duration,
            "gpio_seconds": result.gpio_seconds,
            "beam_seconds": result.beam_seconds,
            "fluence_cm2": result.fluence.value,
            "fluence_unc_cm2": result.fluence.uncertainty,
            "break_time_s": result.break_time,
            "eeprom_before": result.eeprom_before,
            "eeprom_after": result.eeprom_after,
            "ack_enabled": cfg.ack_enabled,
            "files": {"telemetry": "telemetry.csv", "events": "events.csv"},
        })
        print(f"wrote {run_dir} (seed {seed}, digest {result.config_digest})")
    return EXIT_OK


def cmd_analyze(args) -> int:
    try:
        config = _load_config(args.config)
    except io.ConfigFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        row = analysis.analyze_files(args.telemetry, args.events, config.beam)
    except (io.TelemetryFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA

    sigma = "undefined" if row.sigma_undefined else f"{row.sigma_cm2:.3g} cm^2"
    print(f"campaign {row.campaign_id}: fluence {row.fluence.value:.3g} cm^-2, "
          f"fw_blocks {row.n_fw_block}, sel {row.n_sel}, sigma {sigma}"
          + (f", dose {row.dose_gy:.3g} Gy" if row.dose_gy is not None else "")
          + (f", passed {row.passed}" if row.passed is not None else ""))
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "analysis.json").write_text(
            json.dumps(row.to_json_dict(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8")
        print(f"wrote {out_dir / 'analysis.json'}")
    return EXIT_OK


def _reset_log_from_events(path) -> ResetLog:
    header, events = io.parse_events(path)
    times, phases = [], []
    duration = 0.0
    for ev in events:
        duration = max(duration, ev.t)
        if ev.kind in (EventKind.HARD_RESET, EventKind.SOFT_RESET):
            times.append(ev.t)
            phases.append(Phase.GPIO)  # resets are logged against the test context
    return ResetLog(tuple(times), duration, tuple(phases) if phases else None)


def cmd_classify(args) -> int:
    try:
        irr = _reset_log_from_events(args.irradiation_events)
        rl = (_reset_log_from_events(args.radiationless_events)
              if args.radiationless_events else None)
    except (io.TelemetryFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    params = RunParams(period=args.period, tolerance=args.tolerance,
                       min_count=args.min_run, gpio_cycle=args.gpio_cycle)
    verdict = chip_status(irr, rl, params)
    rl_part = (f", radiation-less resets {verdict.radiationless_resets}"
               if verdict.radiationless_resets is not None else "")
    break_part = (f", break at {verdict.break_time:.1f} s"
                  if verdict.break_time is not None else "")
    print(f"verdict: {verdict.status.value} "
          f"(irradiation resets {verdict.irradiation_resets}{rl_part}, "
          f"{len(verdict.runs)} qualifying run(s){break_part}) -- {verdict.evidence}")
    return EXIT_OK


def cmd_verify(_args) -> int:
    try:
        override = analysis.tolerance_override_from_env()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    checks = analysis.verify_reference_tables(override)
    for check in checks:
        print(check.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} reference values reproduced")
    return EXIT_OK if not failed else EXIT_VERIFY


def cmd_report(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not args.analyses:
        print("warning: no analysis inputs; writing empty report", file=sys.stderr)
    rows = []
    for path in args.analyses:
        try:
            rows.append(analysis.AnalysisRow.from_json_dict(
                json.loads(Path(path).read_text(encoding="utf-8"))))
        except (OSError, ValueError, KeyError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            return EXIT_DATA
    bundle = analysis.build_report(rows)
    for name, lines in bundle.tables.items():
        (out_dir / f"table_{name}.csv").write_text("\n".join(lines) + "\n",
                                                   encoding="utf-8")
    for row in rows:
        telemetry_path = next((s for s in row.sources if s.endswith("telemetry.csv")), None)
        if telemetry_path is None or not Path(telemetry_path).exists():
            continue
        _header, records = io.parse_telemetry(telemetry_path)
        fluence = analysis.fluence_series(records, row.flux.value, 0.0)
        adc = analysis.adc_current_series(records)
        stem = row.campaign_id
        for label, series in (("fluence_vs_time", fluence), ("adc_current_vs_time", adc)):
            lines = [f"# {label} for {stem}", "t_s,value"]
            lines += [f"{t:.4f},{v:.6g}" for t, v in series]
            (out_dir / f"{stem}_{label}.csv").write_text("\n".join(lines) + "\n",
                                                         encoding="utf-8")
    print(f"wrote report tables to {out_dir}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler = {
        "simulate": cmd_simulate,
        "analyze": cmd_analyze,
        "classify": cmd_classify,
        "verify": cmd_verify,
        "report": cmd_report,
    }[args.command]
    try:
        return handler(args)
    except ConfigValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
