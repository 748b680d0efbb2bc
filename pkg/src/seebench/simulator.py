"""Deterministic, seedable simulation of one irradiation campaign.

Hybrid event/tick scheme: stochastic beam events (firmware-block and
latch-up strikes, the trace break, scintillator counts) occur at exact
continuous times drawn from per-concern RNG streams, while the control
board's comparators (watchdog, latch-up cut) act on the acquisition tick
grid, and telemetry is sampled per tick. Identical (config, seed) pairs
produce bit-identical event logs; telemetry collection consumes a separate
RNG stream so switching it off does not perturb the event history.

Mechanics, in the order the control firmware sees them:

* The DUT emits a heartbeat while its firmware runs. A firmware-block
  strike silences it; the watchdog hard-resets the supply at the first
  tick where the silence exceeds the timeout (strictly), and the firmware
  reboots after a fixed reset overhead.
* A latch-up strike raises the summed supply current past the threshold;
  the firmware cuts power at the detecting tick and restores it exactly
  one dead time later. No events occur while power is off.
* A break (hazard per unit fluence, or pinned via force_break_at) is
  permanent: the ADC supply current drops, the firmware never returns,
  and the watchdog then fires once per cycle inside each active GPIO test
  window. Windows tile each GPIO phase segment from its start, one
  gpio_cycle active then one gpio_cycle idle, so reset bunches sit one
  cycle apart. No further beam events are drawn for a dead device.
* Fluence accrues at beam flux during GPIO segments (the DUT sits in the
  beam) plus background everywhere; beam-monitor segments park the DUT
  aside and count ions on the scintillator instead (one aggregated
  ScintCount event per segment).
"""

from __future__ import annotations

import enum
import hashlib
import heapq
import math
from dataclasses import dataclass, replace

import numpy as np

from .domain import (
    ADC_SUPPLY_PIN,
    CampaignConfig,
    ConfigValidationError,
    DutProfile,
    Event,
    EventKind,
    EventLog,
    Health,
    Phase,
    TelemetryRecord,
    validate,
)
from .quantities import FLUENCE, MILLIAMP, Quantity


class Action(enum.Enum):
    NONE = "none"
    HARD_RESET = "hard-reset"
    SEL_POWER_OFF = "sel-power-off"


@dataclass(frozen=True, slots=True)
class PhaseTimeline:
    """Contiguous, nonoverlapping phase segments covering [0, total)."""

    segments: tuple[tuple[float, float, Phase], ...]

    @property
    def total_duration(self) -> float:
        return self.segments[-1][1] if self.segments else 0.0

    def gpio_segments(self) -> list[tuple[float, float]]:
        return [(a, b) for a, b, p in self.segments if p is Phase.GPIO]

    def beam_segments(self) -> list[tuple[float, float]]:
        return [(a, b) for a, b, p in self.segments if p is Phase.BEAM_MONITOR]

    def gpio_seconds(self) -> float:
        return sum(b - a for a, b in self.gpio_segments())

    def beam_seconds(self) -> float:
        return sum(b - a for a, b in self.beam_segments())

    def gpio_overlap(self, t: float) -> float:
        """GPIO time elapsed in [0, t)."""
        return sum(max(0.0, min(b, t) - a) for a, b in self.gpio_segments() if a < t)


@dataclass
class DutState:
    """Mutable device state carried through a run."""

    health: Health = Health.FINE
    power_on: bool = True
    last_heartbeat: float = 0.0
    accumulated_fluence: float = 0.0
    currents: dict[str, float] | None = None


@dataclass(frozen=True)
class CampaignResult:
    """Everything one campaign run produced."""

    config: CampaignConfig
    seed: int
    timeline: PhaseTimeline
    events: EventLog
    telemetry: list[TelemetryRecord] | None
    final_state: DutState
    gpio_seconds: float
    beam_seconds: float
    fluence: Quantity                 # cm^-2, uncertainty from background
    break_time: float | None
    pre_current: Quantity             # mA, campaign-start absorbed current
    post_current: Quantity            # mA, campaign-end absorbed current
    eeprom_before: str
    eeprom_after: str
    config_digest: str


def generate_phase_timeline(config: CampaignConfig) -> PhaseTimeline:
    """Alternating GPIO / beam-monitor segments, truncated at total_duration.

    A zero beam-phase duration collapses the plan to a single GPIO segment
    (neutron campaigns, where the facility measures fluence directly).
    """
    violations = validate(config)
    if violations:
        raise ConfigValidationError(violations)
    total = config.total_duration
    gpio_s, beam_s = config.phase_plan
    if beam_s == 0:
        return PhaseTimeline(((0.0, total, Phase.GPIO),))
    segments: list[tuple[float, float, Phase]] = []
    t = 0.0
    while t < total:
        for dur, phase in ((gpio_s, Phase.GPIO), (beam_s, Phase.BEAM_MONITOR)):
            if t >= total:
                break
            end = min(t + dur, total)
            segments.append((t, end, phase))
            t = end
    return PhaseTimeline(tuple(segments))


def draw_event_times(rate: float, t0: float, t1: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Times of a homogeneous Poisson process on [t0, t1), sorted.

    Conditional-uniform construction: draw N ~ Poisson(rate * (t1 - t0)),
    then N uniform times. Exact, and O(N) instead of O(span/tick).
    """
    if t1 < t0:
        raise ValueError(f"t1 must be >= t0, got [{t0}, {t1})")
    if rate < 0:
        raise ValueError(f"rate must be >= 0, got {rate}")
    if rate == 0 or t1 == t0:
        return np.empty(0)
    n = rng.poisson(rate * (t1 - t0))
    return np.sort(rng.uniform(t0, t1, n))


def watchdog_check(now: float, last_heartbeat: float, timeout: float) -> Action:
    """Hard reset iff the heartbeat has been silent for strictly more than timeout."""
    if now < last_heartbeat:
        raise ValueError(f"now ({now}) must be >= last_heartbeat ({last_heartbeat})")
    return Action.HARD_RESET if now - last_heartbeat > timeout else Action.NONE


def latchup_check(current_sum: float, threshold: float) -> Action:
    """Cut power iff the summed current strictly exceeds the threshold."""
    if current_sum < 0:
        raise ValueError(f"current_sum must be >= 0, got {current_sum}")
    return Action.SEL_POWER_OFF if current_sum > threshold else Action.NONE


def apply_annealing(profile: DutProfile, health: Health, rest_days: float) -> Health:
    """Health after resting between campaigns.

    A broken reset source may self-anneal at room temperature: after the
    profile's recovery threshold a Broken part drops back to Damaged (it
    still glitches, but the continuous reset pattern is gone). Annealing
    never yields a Fine part and never acts within a campaign.
    """
    if rest_days < 0:
        raise ValueError(f"rest_days must be >= 0, got {rest_days}")
    if (health is Health.BROKEN and profile.anneal.enabled
            and rest_days >= profile.anneal.recovery_days):
        return Health.DAMAGED
    return health


# Internal firmware execution states.
_RUNNING, _HALTED, _BOOTING = 0, 1, 2


def _grid_after(x: float, tick: float) -> int:
    """Index of the first tick strictly after x (strict comparators)."""
    return int(math.floor(x / tick + 1e-6)) + 1


def config_digest(config: CampaignConfig) -> str:
    from . import io as _io  # local import; io depends on domain only
    return hashlib.sha256(_io.dumps_campaign_config(config).encode()).hexdigest()[:16]


def run_campaign(config: CampaignConfig, *, collect_telemetry: bool = True,
                 initial_health: Health = Health.FINE) -> CampaignResult:
    """Run one campaign; deterministic for a given (config, seed).

    collect_telemetry=False skips tick-grid sampling (events are unchanged;
    they come from dedicated RNG streams). initial_health lets a previously
    damaged or broken part be re-tested, e.g. a radiation-less check of a
    chip that broke under beam.
    """
    violations = validate(config)
    if violations:
        raise ConfigValidationError(violations)
    timeline = generate_phase_timeline(config)
    beam, dut = config.beam, config.dut
    tick = config.tick
    total = config.total_duration
    n_ticks = int(round(total / tick))

    seq = np.random.SeedSequence(config.seed)
    r_events, r_break, r_noise, r_misc = (np.random.default_rng(s) for s in seq.spawn(4))

    broken_from_start = initial_health is Health.BROKEN
    damaged = initial_health is Health.DAMAGED or dut.spontaneous_halt_rate > 0

    # --- stochastic inputs, drawn in a fixed order -------------------------
    fw_rate = dut.fw_sigma(beam.species) * beam.nominal_flux
    sel_rate = dut.sel_sigma(beam.species) * beam.nominal_flux
    strikes: list[tuple[float, str]] = []
    scint_draws: list[tuple[float, int, float]] = []  # (segment end, counts, duration)
    area = beam.spot.area_cm2()
    for a, b, phase in timeline.segments:
        if phase is Phase.GPIO:
            if not broken_from_start:
                for t in draw_event_times(fw_rate, a, b, r_events):
                    strikes.append((float(t), "fw"))
                for t in draw_event_times(sel_rate, a, b, r_events):
                    strikes.append((float(t), "sel"))
        else:
            counts = int(r_events.poisson(
                (beam.nominal_flux + beam.background_flux.value) * area * (b - a)))
            scint_draws.append((b, counts, b - a))
    if not broken_from_start and dut.spontaneous_halt_rate > 0:
        for t in draw_event_times(dut.spontaneous_halt_rate, 0.0, total, r_events):
            strikes.append((float(t), "spont"))

    break_time = _draw_break_time(config, timeline, r_break, broken_from_start)

    # --- event sweep -------------------------------------------------------
    events: list[Event] = []
    hb_off_spans: list[list[float]] = []     # [start, end) with no heartbeat, pre-break
    power_off_spans: list[list[float]] = []  # [start, end) with supply off
    nominal_sum_ma = dut.baseline_current.value

    fw_state = _RUNNING
    power_on = True
    wd_generation = 0
    heap: list[tuple[float, int, str, int]] = []
    counter = 0

    def push(t: float, tag: str, gen: int = 0) -> None:
        nonlocal counter
        heapq.heappush(heap, (t, counter, tag, gen))
        counter += 1

    for t, tag in sorted(strikes):
        if break_time is None or t < break_time:
            push(t, tag)
    for t_end, _counts, _dur in scint_draws:
        push(t_end, "scint")  # the scintillator reports regardless of DUT health
    scint_iter = iter(scint_draws)
    if break_time is not None:
        push(break_time, "break")

    def open_hb_gap(t: float) -> None:
        if not hb_off_spans or hb_off_spans[-1][1] is not None:
            hb_off_spans.append([t, None])

    def close_hb_gap(t: float) -> None:
        if hb_off_spans and hb_off_spans[-1][1] is None:
            hb_off_spans[-1][1] = t

    def schedule_wd_fire(reference: float) -> None:
        idx = _grid_after(reference + config.watchdog_timeout, tick)
        if idx < n_ticks:
            push(idx * tick, "wd_fire", wd_generation)

    broken_at: float | None = 0.0 if broken_from_start else None
    broken_ref = 0.0
    last_heartbeat = 0.0

    while heap:
        t, _, tag, gen = heapq.heappop(heap)
        if tag == "scint":
            _seg_end, counts, dur = next(scint_iter)
            events.append(Event(min(t, total), EventKind.SCINT_COUNT,
                                {"counts": counts, "area_cm2": area, "duration_s": dur}))
            continue
        if t >= total:
            continue
        if broken_at is not None and tag in ("fw", "sel", "spont", "wd_fire", "boot_done"):
            continue  # dead device: power management and scintillation continue
        if tag == "break":
            events.append(Event(t, EventKind.BREAK, {}))
            broken_at = t
            # The watchdog keeps counting the silence it was already
            # measuring; a break must not silently absorb a pending reset.
            broken_ref = t if fw_state == _RUNNING else last_heartbeat
            wd_generation += 1  # cancel pending watchdog/boot bookkeeping
            if fw_state == _RUNNING:
                open_hb_gap(t)
            fw_state = _HALTED
            continue
        if tag == "fw":
            if not power_on:
                continue  # dead time: the supply is off
            events.append(Event(t, EventKind.FW_BLOCK, {}))
            if fw_state == _RUNNING:
                fw_state = _HALTED
                last_heartbeat = t
                open_hb_gap(t)
                wd_generation += 1
                schedule_wd_fire(t)
            elif fw_state == _BOOTING:
                # strike killed the reboot; watchdog re-fires from its grace mark
                fw_state = _HALTED
                wd_generation += 1
                schedule_wd_fire(last_heartbeat)
            continue
        if tag == "spont":
            if not power_on or fw_state != _RUNNING:
                continue
            events.append(Event(t, EventKind.SOFT_RESET, {"cause": "spontaneous"}))
            fw_state = _BOOTING
            last_heartbeat = t + config.reset_overhead
            open_hb_gap(t)
            wd_generation += 1
            push(t + config.reset_overhead, "boot_done", wd_generation)
            continue
        if tag == "sel":
            if not power_on:
                continue
            t_detect = int(math.ceil(t / tick - 1e-9)) * tick  # first tick at or after t
            if t_detect >= total:
                continue  # latch at the very end; never sampled, never logged
            latched_sum_a = (nominal_sum_ma + dut.sel_excess_ma) / 1000.0
            if latchup_check(latched_sum_a, config.latchup_threshold) is not Action.SEL_POWER_OFF:
                continue  # sub-threshold latch: invisible to the protection
            events.append(Event(t, EventKind.SEL, {}))
            push(t_detect, "power_cut", wd_generation)
            continue
        if tag == "power_cut":
            if not power_on:
                continue
            events.append(Event(t, EventKind.POWER_OFF, {"cause": "latchup"}))
            power_on = False
            power_off_spans.append([t, t + config.latchup_deadtime])
            open_hb_gap(t)
            wd_generation += 1
            push(t + config.latchup_deadtime, "power_on")
            continue
        if tag == "power_on":
            events.append(Event(t, EventKind.POWER_ON, {}))
            power_on = True
            fw_state = _BOOTING
            last_heartbeat = t + config.reset_overhead
            wd_generation += 1
            push(t + config.reset_overhead, "boot_done", wd_generation)
            continue
        if tag == "boot_done":
            if gen != wd_generation or fw_state != _BOOTING:
                continue
            fw_state = _RUNNING
            last_heartbeat = t
            close_hb_gap(t)
            continue
        if tag == "wd_fire":
            if gen != wd_generation or fw_state != _HALTED or not power_on:
                continue
            if watchdog_check(t, last_heartbeat, config.watchdog_timeout) is not Action.HARD_RESET:
                continue
            events.append(Event(t, EventKind.HARD_RESET, {"cause": "watchdog"}))
            fw_state = _BOOTING
            last_heartbeat = t + config.reset_overhead
            wd_generation += 1
            push(t + config.reset_overhead, "boot_done", wd_generation)
            continue

    if hb_off_spans and hb_off_spans[-1][1] is None:
        hb_off_spans[-1][1] = broken_at if broken_at is not None else total

    # --- broken-pattern resets: bunches inside active test windows ----------
    monitor_spans: list[tuple[float, float]] = []
    if broken_at is not None:
        for w0, w1 in _active_windows(timeline, config.gpio_cycle):
            if w1 <= broken_at:
                continue
            if w0 <= broken_at:
                ref = broken_ref  # break mid-window: silence already counting
                monitor_spans.append((broken_at, w1))
            else:
                ref = w0          # later windows re-arm at window start
                monitor_spans.append((w0, w1))
            idx = _grid_after(ref + config.watchdog_timeout, tick)
            while idx * tick < min(w1, total):
                t_fire = idx * tick
                if t_fire > broken_at:
                    events.append(Event(t_fire, EventKind.HARD_RESET, {"cause": "watchdog"}))
                idx = _grid_after(t_fire + config.reset_overhead + config.watchdog_timeout, tick)

    events.sort(key=lambda e: e.t)
    log = EventLog(iter(events))

    # --- fluence accounting --------------------------------------------------
    bg = beam.background_flux
    fluence_value = beam.nominal_flux * timeline.gpio_seconds() + bg.value * total
    fluence = Quantity(fluence_value, bg.uncertainty * total, FLUENCE)

    # --- telemetry -----------------------------------------------------------
    telemetry = None
    pre_current, post_current = None, None
    if collect_telemetry:
        telemetry, pre_current, post_current = _sample_telemetry(
            config, timeline, n_ticks, hb_off_spans, power_off_spans,
            monitor_spans, broken_at, r_noise)
    else:
        pre_current, post_current = _summary_currents(config, broken_at, r_noise)

    digest = config_digest(config)
    eeprom_before = hashlib.sha256(f"{digest}:{config.seed}:eeprom".encode()).hexdigest()[:16]
    eeprom_after = eeprom_before
    if broken_at is not None and not broken_from_start:
        if r_misc.random() < dut.break_corrupts_memory_p:
            eeprom_after = hashlib.sha256(f"{eeprom_before}:corrupted".encode()).hexdigest()[:16]

    final_health = Health.BROKEN if broken_at is not None else (
        Health.DAMAGED if damaged else initial_health)
    final_currents = dut.nominal_currents_ma()
    if broken_at is not None:
        final_currents[ADC_SUPPLY_PIN] -= dut.broken_current_drop
    state = DutState(health=final_health, power_on=power_on,
                     last_heartbeat=last_heartbeat,
                     accumulated_fluence=fluence_value, currents=final_currents)

    return CampaignResult(
        config=config, seed=config.seed, timeline=timeline, events=log,
        telemetry=telemetry, final_state=state,
        gpio_seconds=timeline.gpio_seconds(), beam_seconds=timeline.beam_seconds(),
        fluence=fluence, break_time=broken_at if not broken_from_start else None,
        pre_current=pre_current, post_current=post_current,
        eeprom_before=eeprom_before, eeprom_after=eeprom_after,
        config_digest=digest)


def _draw_break_time(config: CampaignConfig, timeline: PhaseTimeline,
                     rng: np.random.Generator, broken_from_start: bool) -> float | None:
    """First tick at which the per-tick break Bernoulli fires, if any."""
    if broken_from_start:
        return None
    dut, beam = config.dut, config.beam
    if dut.force_break_at is not None:
        return dut.force_break_at
    if dut.break_hazard <= 0:
        return None
    tick = config.tick
    n = int(round(config.total_duration / tick))
    t_grid = np.arange(n) * tick
    dphi = np.full(n, beam.background_flux.value * tick)
    for a, b in timeline.gpio_segments():
        i0, i1 = int(math.ceil(a / tick - 1e-9)), int(math.ceil(b / tick - 1e-9))
        dphi[i0:i1] += beam.nominal_flux * tick
    p = np.clip(dut.break_hazard * dphi, 0.0, 1.0)
    hits = np.nonzero(rng.random(n) < p)[0]
    return float(t_grid[hits[0]]) if hits.size else None


def _active_windows(timeline: PhaseTimeline, gpio_cycle: float) -> list[tuple[float, float]]:
    """GPIO test windows: one cycle active, one idle, tiled per GPIO segment."""
    windows = []
    for a, b in timeline.gpio_segments():
        w0 = a
        while w0 < b:
            windows.append((w0, min(w0 + gpio_cycle, b)))
            w0 += 2 * gpio_cycle
    return windows


def _spans_to_mask(spans, n_ticks: int, tick: float) -> np.ndarray:
    mask = np.zeros(n_ticks, dtype=bool)
    for a, b in spans:
        i0 = int(math.ceil(a / tick - 1e-9))
        i1 = int(math.ceil(b / tick - 1e-9))
        mask[max(i0, 0):min(i1, n_ticks)] = True
    return mask


def _sample_telemetry(config, timeline, n_ticks, hb_off_spans, power_off_spans,
                      monitor_spans, broken_at, rng):
    dut = config.dut
    tick = config.tick
    pins = [ch.pin for ch in dut.channels]
    nominal = np.array([dut.nominal_currents_ma()[p] for p in pins])
    sigma_ch = dut.baseline_current.uncertainty / math.sqrt(len(pins))

    currents = nominal + rng.normal(0.0, sigma_ch, size=(n_ticks, len(pins)))
    if broken_at is not None:
        adc_col = pins.index(ADC_SUPPLY_PIN)
        i_break = int(math.ceil(broken_at / tick - 1e-9))
        currents[i_break:, adc_col] -= dut.broken_current_drop

    power_off = _spans_to_mask(power_off_spans, n_ticks, tick)
    hb_bad = _spans_to_mask(hb_off_spans, n_ticks, tick)
    hb_bad |= _spans_to_mask(monitor_spans, n_ticks, tick)
    hb_bad |= power_off

    phase_code = np.zeros(n_ticks, dtype=np.int8)  # 0 gpio, 1 beam, 2 off
    for a, b, ph in timeline.segments:
        if ph is Phase.BEAM_MONITOR:
            i0 = int(math.ceil(a / tick - 1e-9))
            i1 = int(math.ceil(b / tick - 1e-9))
            phase_code[i0:i1] = 1
    phase_code[power_off] = 2

    currents[power_off, :] = 0.0
    sums = currents.sum(axis=1) / 1000.0
    sums[power_off] = 0.0

    phases = (Phase.GPIO, Phase.BEAM_MONITOR, Phase.OFF)
    records = []
    for i in range(n_ticks):
        on = not power_off[i]
        row = {p: float(c) for p, c in zip(pins, currents[i])} if on else {}
        records.append(TelemetryRecord(
            t=i * tick, currents=row, current_sum=float(sums[i]) if on else 0.0,
            heartbeat_ok=not hb_bad[i], phase=phases[phase_code[i]], power_on=on))

    clean = ~power_off
    k = max(1, min(200, n_ticks // 10))
    head = sums[clean][:k] * 1000.0
    tail = sums[clean][-k:] * 1000.0
    tol = dut.baseline_current.uncertainty
    pre = Quantity(float(head.mean()), tol, MILLIAMP)
    post = Quantity(float(tail.mean()), tol, MILLIAMP)
    return records, pre, post


def _summary_currents(config, broken_at, rng):
    """Start/end absorbed-current summaries without materializing telemetry."""
    dut = config.dut
    k = 200
    # per-channel noise is tol/sqrt(14), so the summed current has std = tol
    sigma_sum = dut.baseline_current.uncertainty
    base = dut.baseline_current.value
    head = base + rng.normal(0.0, sigma_sum, k)
    tail_base = base - (dut.broken_current_drop if broken_at is not None else 0.0)
    tail = tail_base + rng.normal(0.0, sigma_sum, k)
    tol = dut.baseline_current.uncertainty
    return (Quantity(float(head.mean()), tol, MILLIAMP),
            Quantity(float(tail.mean()), tol, MILLIAMP))


def bernoulli_break_probability(hazard: float, dphi: float) -> float:
    """Per-tick break probability for a fluence increment dphi."""
    return min(1.0, max(0.0, hazard * dphi))
