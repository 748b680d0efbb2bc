"""Bit-stable serialization: telemetry, event logs, configs, and fixtures.

Everything is line-oriented text so campaign outputs diff cleanly in
tests. A telemetry file is one header line followed by one record per
line: t, the 14 channel currents (mA, 3 decimals), their sum (A, 4
decimals), phase, heartbeat flag, power flag, comma-separated. Event logs
use the same versioned-header scheme with a JSON payload column. Identical
inputs always produce identical bytes.

The campaign config format is flat dotted-key text (`beam.let = 45.0`),
strict about unknown keys, with unset fields taking the standard harness
defaults (6.7 s watchdog, 1 A latch-up cut, 2 s dead time, 40 s cycle).
Channel tables are not expressible in the file format; custom channel
layouts are constructed through the API.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

from .domain import (
    BeamSpec,
    CampaignConfig,
    DutProfile,
    AnnealPolicy,
    Event,
    EventKind,
    EventLog,
    Phase,
    Species,
    SpotGeometry,
    TelemetryRecord,
)
from .quantities import FLUX, Quantity
from .reference import ReferenceTables, load_tables

TELEMETRY_MAGIC = "#seebench-telemetry"
EVENTS_MAGIC = "#seebench-events"
FORMAT_VERSION = 1


class TelemetryFormatError(ValueError):
    """Malformed telemetry or event stream; message carries the line number."""


class SinkError(OSError):
    """A write failed partway; bytes_written is the last durable position."""

    def __init__(self, bytes_written: int, cause: OSError):
        super().__init__(f"sink failed after {bytes_written} bytes: {cause}")
        self.bytes_written = bytes_written


class ConfigFormatError(ValueError):
    """Bad config text; message names the offending key path."""


@dataclass(frozen=True, slots=True)
class TelemetryFileHeader:
    format_version: int
    campaign_id: str
    config_digest: str
    channel_order: tuple[str, ...]  # "pin:name" tokens in Table order
    tick: float
    start_timestamp: str


def header_for(config: CampaignConfig, config_digest: str) -> TelemetryFileHeader:
    order = tuple(f"{ch.pin}:{ch.name}" for ch in config.dut.channels)
    return TelemetryFileHeader(FORMAT_VERSION, config.campaign_id, config_digest,
                               order, config.tick, config.start_timestamp)


def _open_sink(sink, mode="w"):
    if isinstance(sink, (str, Path)):
        return open(sink, mode, encoding="utf-8"), True
    return sink, False


class _CountingWriter:
    def __init__(self, fh: IO[str]):
        self.fh = fh
        self.bytes_written = 0

    def line(self, text: str) -> None:
        data = text + "\n"
        try:
            self.fh.write(data)
        except OSError as exc:
            raise SinkError(self.bytes_written, exc) from exc
        self.bytes_written += len(data.encode("utf-8"))


def write_telemetry(records: Iterable[TelemetryRecord], header: TelemetryFileHeader,
                    sink) -> int:
    """Write a telemetry stream; returns the byte count."""
    fh, owned = _open_sink(sink)
    try:
        w = _CountingWriter(fh)
        w.line(",".join([
            TELEMETRY_MAGIC, str(header.format_version), header.campaign_id,
            header.config_digest, repr(header.tick), header.start_timestamp,
            ";".join(header.channel_order)]))
        pins = [tok.split(":", 1)[0] for tok in header.channel_order]
        for rec in records:
            if rec.power_on:
                cells = [f"{rec.currents[p]:.3f}" for p in pins]
            else:
                cells = [""] * len(pins)
            w.line(",".join([f"{rec.t:.4f}", *cells, f"{rec.current_sum:.4f}",
                             rec.phase.value, "1" if rec.heartbeat_ok else "0",
                             "1" if rec.power_on else "0"]))
        return w.bytes_written
    finally:
        if owned:
            fh.close()


def parse_telemetry(source) -> tuple[TelemetryFileHeader, list[TelemetryRecord]]:
    """Inverse of write_telemetry; tolerant of a trailing newline."""
    text = Path(source).read_text(encoding="utf-8") if isinstance(source, (str, Path)) \
        else source.read()
    lines = text.splitlines()
    if not lines:
        raise TelemetryFormatError("line 1: empty stream, expected telemetry header")
    header = _parse_header(lines[0], TELEMETRY_MAGIC)
    pins = [tok.split(":", 1)[0] for tok in header.channel_order]
    if len(pins) != 14:
        raise TelemetryFormatError(
            f"line 1: expected 14 channels in header, got {len(pins)}")
    n_fields = 1 + len(pins) + 4
    records = []
    phases = {p.value: p for p in Phase}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != n_fields:
            n_currents = len(cells) - 5
            raise TelemetryFormatError(
                f"line {lineno}: expected 14 channels, got {n_currents}")
        try:
            t = float(cells[0])
            power_on = cells[-1] == "1"
            heartbeat = cells[-2] == "1"
            phase = phases[cells[-3]]
            current_sum = float(cells[-4])
            currents = ({p: float(c) for p, c in zip(pins, cells[1:-4])}
                        if power_on else {})
        except (ValueError, KeyError) as exc:
            raise TelemetryFormatError(f"line {lineno}: {exc}") from exc
        records.append(TelemetryRecord(t, currents, current_sum, heartbeat,
                                       phase, power_on))
    return header, records


def _parse_header(line: str, magic: str) -> TelemetryFileHeader:
    cells = line.split(",")
    if not cells or cells[0] != magic:
        raise TelemetryFormatError(f"line 1: expected {magic} header, got {line[:40]!r}")
    if len(cells) != 7:
        raise TelemetryFormatError(f"line 1: malformed header ({len(cells)} fields)")
    try:
        version = int(cells[1])
    except ValueError as exc:
        raise TelemetryFormatError(f"line 1: bad format version {cells[1]!r}") from exc
    if version != FORMAT_VERSION:
        raise TelemetryFormatError(
            f"line 1: unsupported format version {version}, expected {FORMAT_VERSION}")
    channel_order = tuple(cells[6].split(";")) if cells[6] else ()
    return TelemetryFileHeader(version, cells[2], cells[3], channel_order,
                               float(cells[4]), cells[5])


def write_events(events: EventLog, header: TelemetryFileHeader, sink) -> int:
    """Write an event stream; deterministic bytes for identical input."""
    fh, owned = _open_sink(sink)
    try:
        w = _CountingWriter(fh)
        w.line(",".join([EVENTS_MAGIC, str(header.format_version), header.campaign_id,
                         header.config_digest, repr(header.tick), header.start_timestamp,
                         ";".join(header.channel_order)]))
        for ev in events:
            payload = json.dumps(ev.payload, sort_keys=True, separators=(",", ":"))
            w.line(f"{ev.t!r},{ev.kind.value},{payload}")
        return w.bytes_written
    finally:
        if owned:
            fh.close()


def parse_events(source) -> tuple[TelemetryFileHeader, EventLog]:
    text = Path(source).read_text(encoding="utf-8") if isinstance(source, (str, Path)) \
        else source.read()
    lines = text.splitlines()
    if not lines:
        raise TelemetryFormatError("line 1: empty stream, expected event-log header")
    header = _parse_header(lines[0], EVENTS_MAGIC)
    kinds = {k.value: k for k in EventKind}
    log = EventLog()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",", 2)
        if len(parts) != 3:
            raise TelemetryFormatError(f"line {lineno}: expected t,kind,payload")
        try:
            log.append(Event(float(parts[0]), kinds[parts[1]], json.loads(parts[2])))
        except (ValueError, KeyError) as exc:
            raise TelemetryFormatError(f"line {lineno}: {exc}") from exc
    return header, log


# --------------------------------------------------------------------------
# Campaign config text format
# --------------------------------------------------------------------------

_F, _I, _B, _S = "float", "int", "bool", "str"

_KEY_TYPES = {
    "beam.species": _S,
    "beam.energy_mev": _F,
    "beam.let": _F,
    "beam.nominal_flux": _F,
    "beam.background_flux": _F,
    "beam.background_flux_unc": _F,
    "beam.spot": _S,
    "dut.baseline_current": _F,
    "dut.baseline_current_tol": _F,
    "dut.broken_current_drop": _F,
    "dut.break_hazard": _F,
    "dut.spontaneous_halt_rate": _F,
    "dut.anneal_enabled": _B,
    "dut.anneal_recovery_days": _F,
    "dut.break_corrupts_memory_p": _F,
    "dut.sel_excess_ma": _F,
    "dut.force_break_at": _F,
    "campaign.id": _S,
    "campaign.phase_gpio": _F,
    "campaign.phase_beam": _F,
    "campaign.gpio_cycle": _F,
    "campaign.watchdog_timeout": _F,
    "campaign.latchup_threshold": _F,
    "campaign.latchup_deadtime": _F,
    "campaign.reset_overhead": _F,
    "campaign.total_duration": _F,
    "campaign.temperature_c": _F,
    "campaign.temperature_tol_c": _F,
    "campaign.seed": _I,
    "campaign.tick": _F,
    "campaign.start_timestamp": _S,
    "campaign.ack_enabled": _B,
}
_SIGMA_PREFIXES = ("dut.fw_block_cross_section.", "dut.sel_cross_section.")
_REQUIRED = ("beam.species", "beam.let", "beam.nominal_flux", "campaign.total_duration")
_SPECIES = {s.value: s for s in Species}


def _coerce(key: str, raw: str, kind: str):
    try:
        if kind == _F:
            return float(raw)
        if kind == _I:
            return int(raw)
        if kind == _B:
            if raw in ("true", "false"):
                return raw == "true"
            raise ValueError(f"expected true/false, got {raw!r}")
        return raw
    except ValueError as exc:
        raise ConfigFormatError(f"{key}: expected {kind}, got {raw!r}") from exc


def loads_campaign_config(text: str) -> CampaignConfig:
    """Parse dotted-key config text into a CampaignConfig (strict keys)."""
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigFormatError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key in _KEY_TYPES:
            kind = _KEY_TYPES[key]
        elif any(key.startswith(p) for p in _SIGMA_PREFIXES):
            species_name = key.rsplit(".", 1)[1]
            if species_name not in _SPECIES:
                raise ConfigFormatError(f"{key}: unknown species {species_name!r}")
            kind = _F
        else:
            raise ConfigFormatError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigFormatError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, raw, kind)

    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise ConfigFormatError(f"missing required keys: {', '.join(missing)}")

    species_raw = values["beam.species"]
    if species_raw not in _SPECIES:
        raise ConfigFormatError(f"beam.species: unknown species {species_raw!r}")
    spot_raw = str(values.get("beam.spot", "circle:20.0"))
    try:
        shape, size = spot_raw.split(":", 1)
        spot = SpotGeometry(shape, float(size))
    except ValueError as exc:
        raise ConfigFormatError(f"beam.spot: expected shape:size_mm, got {spot_raw!r}") from exc

    beam = BeamSpec(
        species=_SPECIES[species_raw],
        energy_mev=float(values.get("beam.energy_mev", 0.0)),
        let=float(values["beam.let"]),
        nominal_flux=float(values["beam.nominal_flux"]),
        background_flux=Quantity(float(values.get("beam.background_flux", 0.0)),
                                 float(values.get("beam.background_flux_unc", 0.0)), FLUX),
        spot=spot)

    fw_sigma = {}
    sel_sigma = {}
    for key, val in values.items():
        if key.startswith(_SIGMA_PREFIXES[0]):
            fw_sigma[_SPECIES[key.rsplit(".", 1)[1]]] = float(val)
        elif key.startswith(_SIGMA_PREFIXES[1]):
            sel_sigma[_SPECIES[key.rsplit(".", 1)[1]]] = float(val)

    dut = DutProfile(
        baseline_current=Quantity(float(values.get("dut.baseline_current", 50.0)),
                                  float(values.get("dut.baseline_current_tol", 0.5)), "mA"),
        broken_current_drop=float(values.get("dut.broken_current_drop", 1.5)),
        fw_block_cross_section=fw_sigma,
        sel_cross_section=sel_sigma,
        break_hazard=float(values.get("dut.break_hazard", 0.0)),
        spontaneous_halt_rate=float(values.get("dut.spontaneous_halt_rate", 0.0)),
        anneal=AnnealPolicy(bool(values.get("dut.anneal_enabled", False)),
                            float(values.get("dut.anneal_recovery_days", 60.0))),
        break_corrupts_memory_p=float(values.get("dut.break_corrupts_memory_p", 1.0)),
        sel_excess_ma=float(values.get("dut.sel_excess_ma", 1450.0)),
        force_break_at=(float(values["dut.force_break_at"])
                        if "dut.force_break_at" in values else None))

    return CampaignConfig(
        beam=beam, dut=dut,
        total_duration=float(values["campaign.total_duration"]),
        phase_plan=(float(values.get("campaign.phase_gpio", 600.0)),
                    float(values.get("campaign.phase_beam", 40.0))),
        gpio_cycle=float(values.get("campaign.gpio_cycle", 40.0)),
        watchdog_timeout=float(values.get("campaign.watchdog_timeout", 6.7)),
        latchup_threshold=float(values.get("campaign.latchup_threshold", 1.0)),
        latchup_deadtime=float(values.get("campaign.latchup_deadtime", 2.0)),
        reset_overhead=float(values.get("campaign.reset_overhead", 0.3)),
        temperature_c=float(values.get("campaign.temperature_c", 79.5)),
        temperature_tol_c=float(values.get("campaign.temperature_tol_c", 1.0)),
        seed=int(values.get("campaign.seed", 0)),
        tick=float(values.get("campaign.tick", 0.1)),
        campaign_id=str(values.get("campaign.id", "campaign")),
        start_timestamp=str(values.get("campaign.start_timestamp", "2000-01-01T00:00:00Z")),
        ack_enabled=bool(values.get("campaign.ack_enabled", False)))


def load_campaign_config(path) -> CampaignConfig:
    return loads_campaign_config(Path(path).read_text(encoding="utf-8"))


def dumps_campaign_config(config: CampaignConfig) -> str:
    """Canonical config text; loads(dumps(c)) == c for default channel tables."""
    beam, dut = config.beam, config.dut
    lines = [
        f"beam.species = {beam.species.value}",
        f"beam.energy_mev = {beam.energy_mev!r}",
        f"beam.let = {beam.let!r}",
        f"beam.nominal_flux = {beam.nominal_flux!r}",
        f"beam.background_flux = {beam.background_flux.value!r}",
        f"beam.background_flux_unc = {beam.background_flux.uncertainty!r}",
        f"beam.spot = {beam.spot.shape}:{beam.spot.size_mm!r}",
        f"dut.baseline_current = {dut.baseline_current.value!r}",
        f"dut.baseline_current_tol = {dut.baseline_current.uncertainty!r}",
        f"dut.broken_current_drop = {dut.broken_current_drop!r}",
    ]
    for sp in sorted(dut.fw_block_cross_section, key=lambda s: s.value):
        lines.append(f"dut.fw_block_cross_section.{sp.value} = "
                     f"{dut.fw_block_cross_section[sp]!r}")
    for sp in sorted(dut.sel_cross_section, key=lambda s: s.value):
        lines.append(f"dut.sel_cross_section.{sp.value} = {dut.sel_cross_section[sp]!r}")
    lines += [
        f"dut.break_hazard = {dut.break_hazard!r}",
        f"dut.spontaneous_halt_rate = {dut.spontaneous_halt_rate!r}",
        f"dut.anneal_enabled = {'true' if dut.anneal.enabled else 'false'}",
        f"dut.anneal_recovery_days = {dut.anneal.recovery_days!r}",
        f"dut.break_corrupts_memory_p = {dut.break_corrupts_memory_p!r}",
        f"dut.sel_excess_ma = {dut.sel_excess_ma!r}",
    ]
    if dut.force_break_at is not None:
        lines.append(f"dut.force_break_at = {dut.force_break_at!r}")
    lines += [
        f"campaign.id = {config.campaign_id}",
        f"campaign.phase_gpio = {config.phase_plan[0]!r}",
        f"campaign.phase_beam = {config.phase_plan[1]!r}",
        f"campaign.gpio_cycle = {config.gpio_cycle!r}",
        f"campaign.watchdog_timeout = {config.watchdog_timeout!r}",
        f"campaign.latchup_threshold = {config.latchup_threshold!r}",
        f"campaign.latchup_deadtime = {config.latchup_deadtime!r}",
        f"campaign.reset_overhead = {config.reset_overhead!r}",
        f"campaign.total_duration = {config.total_duration!r}",
        f"campaign.temperature_c = {config.temperature_c!r}",
        f"campaign.temperature_tol_c = {config.temperature_tol_c!r}",
        f"campaign.seed = {config.seed}",
        f"campaign.tick = {config.tick!r}",
        f"campaign.start_timestamp = {config.start_timestamp}",
        f"campaign.ack_enabled = {'true' if config.ack_enabled else 'false'}",
    ]
    return "\n".join(lines) + "\n"


def dump_campaign_config(config: CampaignConfig, path) -> None:
    Path(path).write_text(dumps_campaign_config(config), encoding="utf-8")


def load_reference_tables() -> ReferenceTables:
    """The embedded published-table fixture, checksum-verified."""
    return load_tables()


def write_run_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")


def load_run_manifest(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
