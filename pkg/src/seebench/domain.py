"""Core data model shared by the simulator, classifier, and analysis pipeline.

Values are immutable after construction and safe to share across threads.
Semantic validation is deliberately separated from construction: dataclasses
accept whatever they are given, and :func:`validate` reports every violated
rule so a bad config produces one complete report instead of the first
exception encountered.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterator, Mapping

from .quantities import AMP, FLUX, MILLIAMP, Quantity


class Species(enum.Enum):
    KR84 = "Kr84"
    KR78 = "Kr78"
    NEUTRON = "AtmosphericNeutron"


class Phase(enum.Enum):
    GPIO = "gpio"
    BEAM_MONITOR = "beam"
    OFF = "off"


class Health(enum.Enum):
    FINE = "fine"
    DAMAGED = "damaged"
    BROKEN = "broken"

    @property
    def rank(self) -> int:
        return {"fine": 0, "damaged": 1, "broken": 2}[self.value]


class EventKind(enum.Enum):
    FW_BLOCK = "FwBlock"
    SEL = "Sel"
    HARD_RESET = "HardReset"
    SOFT_RESET = "SoftReset"
    BREAK = "Break"
    POWER_OFF = "PowerOff"
    POWER_ON = "PowerOn"
    SCINT_COUNT = "ScintCount"


@dataclass(frozen=True, slots=True)
class Channel:
    """One monitored supply-current channel on the control board."""

    pin: str
    name: str
    description: str


# The 14 monitored currents, keyed by pin number (the only unique key; four
# channels share the I_IO name). Order is the canonical serialization order.
MONITORED_CHANNELS: tuple[Channel, ...] = (
    Channel("6", "I_IO", "I/O pin"),
    Channel("16", "I_REG_0", "PMU regulator"),
    Channel("21", "I_IO", "I/O pin"),
    Channel("27", "I_OSC", "Internal oscillators"),
    Channel("50", "I_ADDR0", "ADC0 reference"),
    Channel("56", "I_ADDR1", "ADC1 reference"),
    Channel("58", "I_ADV", "Integrated ADC power supply"),
    Channel("72", "I_PMU", "Power Management Unit (PMU)"),
    Channel("91", "I_IO", "I/O pin"),
    Channel("95", "I_REG_1", "PMU regulator"),
    Channel("97", "I_FLA", "2MB Flash memory"),
    Channel("126", "I_IO", "I/O pin"),
    Channel("130", "I_REG_2", "PMU regulator"),
    Channel("EXTERNAL", "I_Hall", "Whole current monitor"),
)

#: Pin of the ADC supply channel; the one that drops by ~1.5 mA on a break.
ADC_SUPPLY_PIN = "58"

# Share of the total absorbed current assigned to each channel. Only the sum
# and the ADC supply channel carry behavioral meaning; the split itself is a
# bookkeeping convention and sums to 1.
DEFAULT_CHANNEL_FRACTIONS: Mapping[str, float] = MappingProxyType({
    "6": 0.03, "16": 0.06, "21": 0.03, "27": 0.04, "50": 0.02, "56": 0.02,
    "58": 0.13, "72": 0.09, "91": 0.03, "95": 0.06, "97": 0.15, "126": 0.03,
    "130": 0.06, "EXTERNAL": 0.25,
})


@dataclass(frozen=True, slots=True)
class SpotGeometry:
    """Beam footprint: a circle (diameter) or square (side), in mm."""

    shape: str  # "circle" | "square"
    size_mm: float

    def area_cm2(self) -> float:
        side_cm = self.size_mm / 10.0
        if self.shape == "circle":
            return 3.141592653589793 * (side_cm / 2.0) ** 2
        if self.shape == "square":
            return side_cm * side_cm
        raise ValueError(f"unknown spot shape {self.shape!r}")


@dataclass(frozen=True, slots=True)
class BeamSpec:
    """Particle environment: species, LET, flux, background, and footprint.

    Units: energy MeV, let MeV cm^2 mg^-1, nominal_flux particles cm^-2 s^-1.
    background_flux is the ambient (natural-radioactivity) flux with its
    uncertainty; it irradiates the DUT in every phase.
    """

    species: Species
    energy_mev: float
    let: float
    nominal_flux: float
    background_flux: Quantity = Quantity(0.0, 0.0, FLUX)
    spot: SpotGeometry = SpotGeometry("circle", 20.0)


@dataclass(frozen=True, slots=True)
class AnnealPolicy:
    """Whether a broken reset source can self-anneal, and after how long."""

    enabled: bool = False
    recovery_days: float = 60.0


@dataclass(frozen=True)
class DutProfile:
    """Behavioral parameters of the device under test.

    baseline_current is the total absorbed current (mA) with its tolerance;
    the per-channel split follows channel_fractions. Cross-sections are per
    species in cm^2. break_hazard is a probability per unit fluence (cm^2)
    of a destructive trace break. spontaneous_halt_rate (s^-1) produces
    scattered firmware glitches without beam, the signature of a damaged
    part. force_break_at pins the break to an exact campaign time for
    reproduction runs.
    """

    baseline_current: Quantity = Quantity(50.0, 0.5, MILLIAMP)
    broken_current_drop: float = 1.5
    fw_block_cross_section: Mapping[Species, float] = field(default_factory=dict)
    sel_cross_section: Mapping[Species, float] = field(default_factory=dict)
    break_hazard: float = 0.0
    spontaneous_halt_rate: float = 0.0
    anneal: AnnealPolicy = AnnealPolicy()
    channels: tuple[Channel, ...] = MONITORED_CHANNELS
    channel_fractions: Mapping[str, float] = DEFAULT_CHANNEL_FRACTIONS
    sel_excess_ma: float = 1450.0
    break_corrupts_memory_p: float = 1.0
    force_break_at: float | None = None

    def fw_sigma(self, species: Species) -> float:
        return self.fw_block_cross_section.get(species, 0.0)

    def sel_sigma(self, species: Species) -> float:
        return self.sel_cross_section.get(species, 0.0)

    def nominal_currents_ma(self) -> dict[str, float]:
        """Per-channel nominal draw in mA, in channel order."""
        total = self.baseline_current.value
        return {ch.pin: total * self.channel_fractions[ch.pin] for ch in self.channels}


@dataclass(frozen=True, kw_only=True)
class CampaignConfig:
    """Full description of one irradiation campaign.

    phase_plan is the alternating (gpio_s, beam_s) schedule; beam_s == 0
    collapses the run to a single GPIO segment (facility-measured fluence).
    All times in seconds, latchup_threshold in A, temperature in deg C.
    """

    beam: BeamSpec
    dut: DutProfile = DutProfile()
    total_duration: float
    phase_plan: tuple[float, float] = (600.0, 40.0)
    gpio_cycle: float = 40.0
    watchdog_timeout: float = 6.7
    latchup_threshold: float = 1.0
    latchup_deadtime: float = 2.0
    reset_overhead: float = 0.3
    temperature_c: float = 79.5
    temperature_tol_c: float = 1.0
    seed: int = 0
    tick: float = 0.1
    campaign_id: str = "campaign"
    start_timestamp: str = "2000-01-01T00:00:00Z"
    ack_enabled: bool = False


@dataclass(frozen=True, slots=True)
class TelemetryRecord:
    """One acquisition-tick sample.

    currents is keyed by channel pin and is empty while the supply is off.
    heartbeat_ok means "the watchdog monitor is satisfied at this instant",
    not "the chip is alive": an unmonitored window reads True. phase is OFF
    whenever power_on is False.
    """

    t: float
    currents: dict[str, float]
    current_sum: float  # A
    heartbeat_ok: bool
    phase: Phase
    power_on: bool

    @classmethod
    def from_currents(cls, t: float, currents: dict[str, float], heartbeat_ok: bool,
                      phase: Phase, power_on: bool) -> "TelemetryRecord":
        total = sum(currents.values()) / 1000.0 if power_on else 0.0
        return cls(t, currents if power_on else {}, total, heartbeat_ok, phase, power_on)


@dataclass(frozen=True, slots=True)
class Event:
    t: float
    kind: EventKind
    payload: dict = field(default_factory=dict)


class EventLog:
    """Time-ordered event sequence; ordering is enforced on insertion."""

    def __init__(self, events: Iterator[Event] | None = None) -> None:
        self._events: list[Event] = []
        self._breaks = 0
        if events is not None:
            for ev in events:
                self.append(ev)

    def append(self, event: Event) -> None:
        if self._events and event.t < self._events[-1].t:
            raise ValueError(
                f"events must be appended in nondecreasing time order: "
                f"{event.t} after {self._events[-1].t}")
        if event.kind is EventKind.BREAK:
            if self._breaks:
                raise ValueError("at most one Break event per campaign")
            self._breaks += 1
        self._events.append(event)

    def __iter__(self) -> Iterator[Event]:
        return iter(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def __getitem__(self, i: int) -> Event:
        return self._events[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventLog):
            return NotImplemented
        return self._events == other._events

    def times(self, *kinds: EventKind) -> list[float]:
        wanted = set(kinds)
        return [e.t for e in self._events if e.kind in wanted]

    def count(self, kind: EventKind) -> int:
        return sum(1 for e in self._events if e.kind is kind)

    def check_sel_protocol(self, deadtime: float, tol: float = 1e-9) -> list[str]:
        """Verify every Sel is followed by PowerOff then PowerOn deadtime later."""
        problems = []
        for i, ev in enumerate(self._events):
            if ev.kind is not EventKind.SEL:
                continue
            off = next((e for e in self._events[i + 1:] if e.kind is EventKind.POWER_OFF), None)
            if off is None:
                problems.append(f"Sel at t={ev.t} with no following PowerOff")
                continue
            on = next((e for e in self._events[i + 1:]
                       if e.kind is EventKind.POWER_ON and e.t > off.t - tol), None)
            if on is None:
                problems.append(f"Sel at t={ev.t}: PowerOff at {off.t} never followed by PowerOn")
            elif abs((on.t - off.t) - deadtime) > tol:
                problems.append(
                    f"Sel at t={ev.t}: power restored after {on.t - off.t} s, not {deadtime} s")
        return problems


def _check(violations: list[str], ok: bool, rule: str, got: object) -> None:
    if not ok:
        violations.append(f"{rule} (got {got!r})")


def validate(config: CampaignConfig) -> list[str]:
    """Return every violated invariant of the config; empty means valid.

    Total function: never raises on bad values, only reports. Each entry
    names the offending field inside its rule text.
    """
    v: list[str] = []
    beam, dut = config.beam, config.dut

    _check(v, beam.let >= 0, "beam.let >= 0", beam.let)
    _check(v, beam.nominal_flux >= 0, "beam.nominal_flux >= 0", beam.nominal_flux)
    _check(v, beam.energy_mev >= 0, "beam.energy_mev >= 0", beam.energy_mev)
    _check(v, beam.background_flux.unit == FLUX,
           "beam.background_flux carries flux units", beam.background_flux.unit)
    _check(v, beam.background_flux.value >= 0,
           "beam.background_flux >= 0", beam.background_flux.value)
    _check(v, beam.background_flux.uncertainty >= 0,
           "beam.background_flux uncertainty >= 0", beam.background_flux.uncertainty)
    if beam.species is Species.NEUTRON:
        _check(v, beam.let == 0, "neutron species has let = 0", beam.let)
    _check(v, beam.spot.shape in ("circle", "square"),
           "beam.spot.shape is circle or square", beam.spot.shape)
    _check(v, beam.spot.size_mm > 0, "beam.spot.size_mm > 0", beam.spot.size_mm)

    _check(v, len(dut.channels) == 14, "exactly 14 channels", len(dut.channels))
    pins = [ch.pin for ch in dut.channels]
    _check(v, len(set(pins)) == len(pins), "channel pins are unique", pins)
    _check(v, dut.baseline_current.unit == MILLIAMP,
           "dut.baseline_current in mA", dut.baseline_current.unit)
    _check(v, dut.baseline_current.value > dut.broken_current_drop,
           "baseline_current > broken_current_drop",
           (dut.baseline_current.value, dut.broken_current_drop))
    _check(v, dut.broken_current_drop >= 0,
           "dut.broken_current_drop >= 0", dut.broken_current_drop)
    for label, table in (("fw_block_cross_section", dut.fw_block_cross_section),
                         ("sel_cross_section", dut.sel_cross_section)):
        for sp, sigma in table.items():
            _check(v, sigma >= 0, f"dut.{label}[{sp.value}] >= 0", sigma)
    _check(v, dut.break_hazard >= 0, "dut.break_hazard >= 0", dut.break_hazard)
    _check(v, dut.spontaneous_halt_rate >= 0,
           "dut.spontaneous_halt_rate >= 0", dut.spontaneous_halt_rate)
    _check(v, dut.anneal.recovery_days >= 0,
           "dut.anneal.recovery_days >= 0", dut.anneal.recovery_days)
    _check(v, 0 <= dut.break_corrupts_memory_p <= 1,
           "dut.break_corrupts_memory_p in [0, 1]", dut.break_corrupts_memory_p)
    if len(dut.channels) == 14 and len(set(pins)) == 14:
        missing = [ch.pin for ch in dut.channels if ch.pin not in dut.channel_fractions]
        _check(v, not missing, "channel_fractions covers every channel pin", missing)
        if not missing:
            total = sum(dut.channel_fractions[ch.pin] for ch in dut.channels)
            _check(v, abs(total - 1.0) < 1e-9, "channel_fractions sum to 1", total)
    if dut.sel_cross_section and any(s > 0 for s in dut.sel_cross_section.values()):
        latched_a = (dut.baseline_current.value + dut.sel_excess_ma) / 1000.0
        _check(v, latched_a > config.latchup_threshold,
               "latched current exceeds latchup_threshold", latched_a)

    _check(v, config.watchdog_timeout > 0, "watchdog_timeout > 0", config.watchdog_timeout)
    _check(v, config.latchup_threshold > 0, "latchup_threshold > 0", config.latchup_threshold)
    _check(v, config.total_duration > 0, "total_duration > 0", config.total_duration)
    _check(v, config.tick > 0, "tick > 0", config.tick)
    _check(v, config.tick < config.watchdog_timeout, "tick < watchdog_timeout",
           (config.tick, config.watchdog_timeout))
    _check(v, config.latchup_deadtime >= 0, "latchup_deadtime >= 0", config.latchup_deadtime)
    _check(v, config.reset_overhead >= 0, "reset_overhead >= 0", config.reset_overhead)
    _check(v, config.gpio_cycle > 0, "gpio_cycle > 0", config.gpio_cycle)
    gpio_s, beam_s = config.phase_plan
    _check(v, gpio_s > 0, "phase_plan gpio duration > 0", gpio_s)
    _check(v, beam_s >= 0, "phase_plan beam duration >= 0", beam_s)
    _check(v, config.temperature_tol_c >= 0, "temperature_tol_c >= 0", config.temperature_tol_c)
    _check(v, 0 <= config.seed < 2 ** 64, "seed is a 64-bit integer", config.seed)
    if dut.force_break_at is not None:
        _check(v, 0 <= dut.force_break_at <= config.total_duration,
               "force_break_at within campaign", dut.force_break_at)
    return v


class ConfigValidationError(ValueError):
    """Raised by operations that require a valid config."""

    def __init__(self, violations: list[str]):
        super().__init__("invalid campaign config: " + "; ".join(violations))
        self.violations = violations
