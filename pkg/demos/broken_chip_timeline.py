# Reproduce the broken-chip morphology: a neutron campaign in which the
# test board's trace breaks partway through. After the break the ADC supply
# current drops by 1.5 mA and the part resets every watchdog cycle in 40 s
# bunches, one GPIO test cycle apart. Emits plot-data CSVs next to this
# script and classifies the part from its reset log.

from pathlib import Path

import seebench as sb
from seebench.analysis import adc_current_series, fluence_series
from seebench.classify import ResetLog, RunParams, chip_status

BREAK_AT = 4000.0

dut = sb.DutProfile(
    fw_block_cross_section={sb.Species.NEUTRON: 5.6e-10},
    force_break_at=BREAK_AT)
beam = sb.BeamSpec(sb.Species.NEUTRON, energy_mev=10.0, let=0.0,
                   nominal_flux=2.9026e6, spot=sb.SpotGeometry("square", 70.0))
config = sb.CampaignConfig(beam=beam, dut=dut, total_duration=8000.0,
                           phase_plan=(600.0, 0.0), seed=9,
                           campaign_id="broken-demo")

result = sb.run_campaign(config)
resets = result.events.times(sb.EventKind.HARD_RESET)
print(f"break at t = {result.break_time:.1f} s; "
      f"{len([t for t in resets if t > BREAK_AT])} resets afterwards in "
      f"{config.gpio_cycle:.0f} s bunches")

out_dir = Path(__file__).parent
for name, series in (
        ("broken_fluence_vs_time.csv",
         fluence_series(result.telemetry, beam.nominal_flux,
                        beam.background_flux.value)),
        ("broken_adc_current_vs_time.csv", adc_current_series(result.telemetry))):
    lines = ["t_s,value"] + [f"{t:.1f},{v:.6g}" for t, v in series[::10]]
    (out_dir / name).write_text("\n".join(lines) + "\n")
    print(f"wrote {out_dir / name}")

times = tuple(sorted(result.events.times(sb.EventKind.HARD_RESET,
                                         sb.EventKind.SOFT_RESET)))
verdict = chip_status(ResetLog(times, config.total_duration), None, RunParams())
print(f"\nverdict: {verdict.status.value} -- {verdict.evidence}")
print(f"estimated break time: {verdict.break_time:.1f} s (true {BREAK_AT:.1f} s)")
print(f"fluence before break: "
      f"{sb.estimate_break_fluence(verdict.break_time, result.timeline, beam.nominal_flux):.3g}"
      f" /cm^2 of {result.fluence.value:.3g} /cm^2 total")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    adc = adc_current_series(result.telemetry)
    t = [p[0] for p in adc]
    ma = [p[1] for p in adc]
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.plot(t, ma, lw=0.3)
    ax.axvline(BREAK_AT, ls="--", color="k", label="break")
    ax.set_xlabel("time since acquisition start (s)")
    ax.set_ylabel("ADC supply current (mA)")
    ax.set_xlim(BREAK_AT - 400, BREAK_AT + 400)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_dir / "broken_adc_current.png", dpi=120)
    print(f"wrote {out_dir / 'broken_adc_current.png'}")
except ImportError:
    print("matplotlib not installed; skipped the PNG render")
