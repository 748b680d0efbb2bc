# Simulate one heavy-ion campaign at the ST01 reference conditions and walk
# the full analysis chain: scintillator flux counting, effective fluence,
# absorbed dose, firmware-block cross-section, and the survival check.

from pathlib import Path

import seebench as sb
from seebench.analysis import analyze_result
from seebench.io import load_campaign_config

preset = Path(sb.__file__).parent / "presets" / "st01.cfg"
config = load_campaign_config(preset)
print(f"campaign {config.campaign_id}: {config.beam.species.value} at "
      f"LET {config.beam.let} MeV cm^2/mg, flux {config.beam.nominal_flux:.4g} /cm^2/s")
print(f"plan: {config.phase_plan[0]:.0f} s GPIO / {config.phase_plan[1]:.0f} s "
      f"beam monitor, total {config.total_duration:.0f} s\n")

result = sb.run_campaign(config)
print(f"events: {result.events.count(sb.EventKind.FW_BLOCK)} firmware blocks, "
      f"{result.events.count(sb.EventKind.SEL)} latch-ups, "
      f"{result.events.count(sb.EventKind.HARD_RESET)} hard resets")
print(f"DUT-in-beam time: {result.gpio_seconds:.0f} s, "
      f"scintillator time: {result.beam_seconds:.0f} s")

row = analyze_result(result)
print(f"\nestimated flux:     {row.flux.value:10.4g} +/- {row.flux.uncertainty:.2g} /cm^2/s")
print(f"effective fluence:  {row.fluence.value:10.4g} +/- {row.fluence.uncertainty:.2g} /cm^2")
print(f"absorbed dose:      {row.dose_gy:10.4g} Gy")
print(f"cross-section:      {row.sigma_cm2:10.4g} cm^2   (published row: 8.08e-5)")
print(f"block rate:         {row.rate_per_s:10.4g} /s -> one block every "
      f"{row.period_s:.2f} s (published: 7.41 s)")
print(f"\nabsorbed current {row.pre_current.value:.1f} -> {row.post_current.value:.1f} mA, "
      f"memory digest {'unchanged' if row.eeprom_before == row.eeprom_after else 'CHANGED'}"
      f" -> test {'passed' if row.passed else 'FAILED'}")
