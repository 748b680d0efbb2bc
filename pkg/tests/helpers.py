"""Shared test scaffolding: reference conditions and independent oracles.

The oracles here deliberately avoid the library's own samplers: the
per-tick Bernoulli simulator is the brute-force ground truth the
event-driven Poisson sampler is checked against, and the chi-square
binning is built straight from scipy's Poisson pmf.
"""

from __future__ import annotations

import numpy as np
from scipy import stats

import seebench as sb

# ST01-conditions, expressed through the unrounded chain so the expected
# firmware-block count is exactly 816 over one campaign:
# sigma = 816 / fluence, flux = fluence / duration => rate * duration = 816.
ST01_FLUENCE = 1.01e7
ST01_DURATION = 6027.0
ST01_COUNT = 816
ST01_SIGMA = ST01_COUNT / ST01_FLUENCE
ST01_FLUX = ST01_FLUENCE / ST01_DURATION


def st01_conditions_config(seed: int = 0, **overrides) -> sb.CampaignConfig:
    """Single-GPIO-segment campaign at the reference ion conditions."""
    dut = sb.DutProfile(fw_block_cross_section={sb.Species.KR84: ST01_SIGMA})
    beam = sb.BeamSpec(sb.Species.KR84, 1678.24, 45.0, ST01_FLUX)
    defaults = dict(beam=beam, dut=dut, total_duration=ST01_DURATION,
                    phase_plan=(600.0, 0.0), seed=seed, campaign_id="st01-cond")
    defaults.update(overrides)
    return sb.CampaignConfig(**defaults)


def ion_phased_config(seed: int = 0, **overrides) -> sb.CampaignConfig:
    """Short multi-phase ion campaign for telemetry-level protocol checks."""
    dut = sb.DutProfile(fw_block_cross_section={sb.Species.KR84: ST01_SIGMA})
    beam = sb.BeamSpec(sb.Species.KR84, 1678.24, 45.0, ST01_FLUX,
                       background_flux=sb.Quantity(20.0, 5.0, "cm^-2 s^-1"))
    defaults = dict(beam=beam, dut=dut, total_duration=1280.0,
                    phase_plan=(600.0, 40.0), seed=seed, campaign_id="ion-short")
    defaults.update(overrides)
    return sb.CampaignConfig(**defaults)


def bernoulli_counts(rate: float, duration: float, tick: float,
                     n_runs: int, seed: int) -> np.ndarray:
    """Brute-force per-tick Bernoulli event counts (the sampler oracle)."""
    rng = np.random.default_rng(seed)
    n_ticks = int(round(duration / tick))
    p = rate * tick
    counts = np.empty(n_runs, dtype=np.int64)
    for i in range(n_runs):
        counts[i] = int((rng.random(n_ticks) < p).sum())
    return counts


def poisson_chisquare_pvalue(samples: np.ndarray) -> float:
    """Goodness-of-fit p-value of integer samples against Poisson(mean).

    Bins consecutive counts until each expected bin holds >= 8 samples,
    folds the distribution tails into the edge bins, and loses one extra
    degree of freedom for the estimated mean.
    """
    lam = samples.mean()
    n = len(samples)
    k_lo = int(stats.poisson.ppf(1e-6, lam))
    k_hi = int(stats.poisson.ppf(1 - 1e-6, lam))
    ks = np.arange(k_lo, k_hi + 1)
    probs = stats.poisson.pmf(ks, lam)
    probs[0] += stats.poisson.cdf(k_lo - 1, lam)
    probs[-1] += stats.poisson.sf(k_hi, lam)
    bins: list[tuple[int, int, float]] = []
    acc, lo = 0.0, k_lo
    for k, p in zip(ks, probs):
        acc += p
        if acc * n >= 8:
            bins.append((lo, int(k), acc))
            acc, lo = 0.0, int(k) + 1
    if acc > 0 and bins:
        first, _, mass = bins[-1]
        bins[-1] = (first, k_hi, mass + acc)
    obs = np.array([((samples >= a) & (samples <= b)).sum() for a, b, _ in bins])
    obs[0] += (samples < bins[0][0]).sum()
    obs[-1] += (samples > bins[-1][1]).sum()
    expected = np.array([mass for _, _, mass in bins]) * n
    _stat, pvalue = stats.chisquare(obs, expected, ddof=1)
    return float(pvalue)


def heartbeat_gaps(records, tick: float) -> list[tuple[float, float]]:
    """Maximal [start, end) spans where the heartbeat monitor is unsatisfied."""
    gaps, start = [], None
    for rec in records:
        if not rec.heartbeat_ok and start is None:
            start = rec.t
        elif rec.heartbeat_ok and start is not None:
            gaps.append((start, rec.t))
            start = None
    if start is not None:
        gaps.append((start, records[-1].t + tick))
    return gaps


def bunched_reset_times(start: float, end: float, period: float = 7.1,
                        first_offset: float = 6.8, window: float = 40.0,
                        stride: float = 80.0) -> list[float]:
    """Broken-chip pattern: trains of `period`-spaced resets inside active
    windows tiled every `stride` seconds from `start`."""
    times = []
    w0 = start
    while w0 < end:
        t = w0 + first_offset
        while t < min(w0 + window, end):
            times.append(round(t, 4))
            t += period
        w0 += stride
    return times
