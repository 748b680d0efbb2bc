"""Chip-health classification from reset logs, and campaign pass/fail.

A broken part resets continuously, one watchdog cycle apart, inside its
GPIO test windows; a damaged part resets now and then with no beam and no
such pattern; a fine part does neither. The verdict is evidence-based:
detect periodic reset runs, then ask whether the pattern persists to the
end of the most recent test context.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .domain import Health, Phase
from .quantities import AMP, MILLIAMP, Quantity, UnitError
from .simulator import PhaseTimeline


@dataclass(frozen=True, slots=True)
class ResetRun:
    """A maximal train of resets with near-constant spacing."""

    start: float
    count: int
    mean_interval: float
    interval_stddev: float

    @property
    def end(self) -> float:
        return self.start + self.mean_interval * (self.count - 1)


@dataclass(frozen=True, slots=True)
class RunParams:
    """Qualifying-run definition: period +/- tolerance, minimum train length.

    Defaults pick out watchdog-cycle trains (about 7 s) of at least five
    resets, the shortest bunch a 40 s test window can hold, while scattered
    damage-style resets never qualify.
    """

    period: float = 7.0
    tolerance: float = 1.0
    min_count: int = 5
    gpio_cycle: float = 40.0


@dataclass(frozen=True, slots=True)
class ResetLog:
    """Reset times from one test context.

    duration is the context length in seconds (the log's own end time, not
    the last reset). phases, when given, annotates each reset with the
    campaign phase it occurred in; run detection then only considers
    GPIO-phase resets. A radiation-less bench test carries no phases: all
    of its time is test time.
    """

    times: tuple[float, ...]
    duration: float
    phases: tuple[Phase, ...] | None = None

    def gpio_times(self) -> tuple[float, ...]:
        if self.phases is None:
            return self.times
        return tuple(t for t, p in zip(self.times, self.phases) if p is Phase.GPIO)


@dataclass(frozen=True, slots=True)
class HealthVerdict:
    status: Health
    irradiation_resets: int
    radiationless_resets: int | None
    runs: tuple[ResetRun, ...]
    break_time: float | None
    evidence: str = ""


def detect_reset_runs(reset_times, period: float, tolerance: float,
                      min_count: int) -> list[ResetRun]:
    """Maximal runs of consecutive resets spaced period +/- tolerance apart.

    Runs are disjoint; a single out-of-tolerance gap always splits. Input
    must be sorted; unsorted input raises ValueError.
    """
    if period <= 0:
        raise ValueError(f"period must be > 0, got {period}")
    if tolerance < 0:
        raise ValueError(f"tolerance must be >= 0, got {tolerance}")
    if min_count < 2:
        raise ValueError(f"min_count must be >= 2, got {min_count}")
    times = list(reset_times)
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("reset times must be sorted")
    runs = []
    for i0, i1 in _run_segments(times, period, tolerance):
        if i1 - i0 >= min_count:
            segment = times[i0:i1]
            intervals = [b - a for a, b in zip(segment, segment[1:])]
            mean = sum(intervals) / len(intervals)
            var = sum((x - mean) ** 2 for x in intervals) / len(intervals)
            runs.append(ResetRun(segment[0], len(segment), mean, math.sqrt(var)))
    return runs


def _run_segments(times, period, tolerance, min_count: int = 2):
    """Index ranges [i0, i1) of maximal in-tolerance trains."""
    lo, hi = period - tolerance, period + tolerance
    segments = []
    i = 0
    while i < len(times) - 1:
        j = i
        while j + 1 < len(times) and lo <= times[j + 1] - times[j] <= hi:
            j += 1
        if j > i and (j - i + 1) >= min_count:
            segments.append((i, j + 1))
        i = max(j, i + 1)
    return segments


def _covered(runs: list[ResetRun], lo: float, hi: float) -> bool:
    return any(r.start < hi and r.end >= lo for r in runs)


def _pattern_persists(runs: list[ResetRun], duration: float,
                      gpio_cycle: float) -> bool:
    """True if the run pattern continues to the log end.

    A broken part produces one reset bunch per GPIO test cycle, so every
    full active-plus-idle stride (2 x gpio_cycle) contains a run no matter
    how the windows are phased. The last two such strides, anchored at the
    log end, must each hold a qualifying run.
    """
    if not runs:
        return False
    stride = 2 * gpio_cycle
    hi = duration
    for _ in range(2):
        lo = max(0.0, hi - stride)
        if not _covered(runs, lo, hi):
            return False
        if lo == 0.0:
            break
        hi = lo
    return True


def _first_chained_train(trains: list[ResetRun], duration: float,
                         gpio_cycle: float) -> ResetRun | None:
    """Earliest reset train from which the pattern covers every later stride.

    Timing uses two-reset trains, not full qualifying runs: the bunch in
    which the part actually broke may be truncated by its test window.
    Strides shorter than a full cycle at the log end cannot be required to
    hold a bunch (the log may end mid-idle).
    """
    stride = 2 * gpio_cycle
    for train in trains:
        lo = train.start
        chained = True
        while lo + stride <= duration:
            if not _covered(trains, lo, lo + stride):
                chained = False
                break
            lo += stride
        if chained:
            return train
    return None


def chip_status(irradiation: ResetLog | None, radiationless: ResetLog | None,
                params: RunParams = RunParams()) -> HealthVerdict:
    """Classify a part from its irradiation and/or radiation-less reset logs.

    Broken: a qualifying continuous-run pattern persists to the end of the
    most recent context (the radiation-less log when provided, since it is
    the later test). Damaged: at least one radiation-less reset without the
    persisting pattern. Fine: neither. The break-time estimate backs off
    one period from the first reset train that chains into the persisting
    pattern, since the first watchdog firing trails the break by about one
    cycle. A break landing in the monitor's idle half-cycle stays invisible
    until the next test window, so the estimate can trail the true break by
    up to one gpio_cycle; a part that acted broken only after irradiation
    is assumed to have broken at acquisition end.
    """
    p = params
    runs_irr: list[ResetRun] = []
    broken_irr = False
    first_train_irr = None
    if irradiation is not None:
        gpio = irradiation.gpio_times()
        runs_irr = detect_reset_runs(gpio, p.period, p.tolerance, p.min_count)
        broken_irr = _pattern_persists(runs_irr, irradiation.duration, p.gpio_cycle)
        if broken_irr:
            trains = detect_reset_runs(gpio, p.period, p.tolerance, 2)
            first_train_irr = _first_chained_train(trains, irradiation.duration,
                                                   p.gpio_cycle)

    runs_rl: list[ResetRun] = []
    broken_rl = False
    first_train_rl = None
    if radiationless is not None:
        runs_rl = detect_reset_runs(radiationless.times, p.period, p.tolerance,
                                    p.min_count)
        broken_rl = _pattern_persists(runs_rl, radiationless.duration, p.gpio_cycle)
        if broken_rl:
            trains = detect_reset_runs(radiationless.times, p.period, p.tolerance, 2)
            first_train_rl = _first_chained_train(trains, radiationless.duration,
                                                  p.gpio_cycle)

    n_irr = len(irradiation.times) if irradiation is not None else 0
    n_rl = len(radiationless.times) if radiationless is not None else None

    broken = broken_rl if radiationless is not None else broken_irr

    if broken:
        if broken_irr and first_train_irr is not None:
            break_time = max(0.0, first_train_irr.start - p.period)
            evidence = "continuous reset pattern during irradiation, persisting"
        elif irradiation is not None:
            break_time = irradiation.duration
            evidence = ("broken pattern only after irradiation; "
                        "assumed broken at acquisition end")
        else:
            break_time = max(0.0, first_train_rl.start - p.period) \
                if first_train_rl is not None else 0.0
            evidence = "continuous reset pattern in radiation-less test"
        status = Health.BROKEN
    elif n_rl is not None and n_rl >= 1:
        status, break_time = Health.DAMAGED, None
        evidence = f"{n_rl} reset(s) without beam, no continuous pattern"
    else:
        status, break_time = Health.FINE, None
        evidence = "no disqualifying resets"

    return HealthVerdict(status=status, irradiation_resets=n_irr,
                         radiationless_resets=n_rl,
                         runs=tuple(runs_irr + runs_rl),
                         break_time=break_time, evidence=evidence)


def _as_milliamp(q: Quantity) -> Quantity:
    if q.unit == MILLIAMP:
        return q
    if q.unit == AMP:
        return Quantity(q.value * 1000.0, q.uncertainty * 1000.0, MILLIAMP)
    raise UnitError(f"expected a current, got {q.unit!r}")


def test_passed(pre_current: Quantity, post_current: Quantity,
                eeprom_pre: str, eeprom_post: str) -> bool:
    """Survival check: absorbed current and memory content both unchanged.

    Currents agree within the combined tolerance; memory equality is by
    digest. Accepts mA or A; the comparison is scale-invariant.
    """
    pre, post = _as_milliamp(pre_current), _as_milliamp(post_current)
    current_ok = abs(post.value - pre.value) <= pre.uncertainty + post.uncertainty
    return current_ok and eeprom_pre == eeprom_post


def estimate_break_fluence(break_time: float, timeline: PhaseTimeline,
                           flux: float, background: float = 0.0) -> float:
    """Fluence accumulated before the break: beam flux over GPIO time plus
    background over wall time, integrated up to break_time."""
    if not 0.0 <= break_time <= timeline.total_duration:
        raise ValueError(
            f"break_time {break_time} outside campaign [0, {timeline.total_duration}]")
    if flux < 0 or background < 0:
        raise ValueError("flux and background must be >= 0")
    return flux * timeline.gpio_overlap(break_time) + background * break_time
