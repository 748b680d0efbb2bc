"""Dosimetry, fluence accounting, cross-sections, and orbital rate extrapolation.

Pure, stateless functions. Bare floats carry the units stated in each
docstring; arguments typed as Quantity are unit-checked on entry. Domain
errors (negative fluence, zero duration, ...) raise ValueError.

Conventions: LET in MeV cm^2 mg^-1, fluence in particles cm^-2, flux in
particles cm^-2 s^-1, cross-sections in cm^2, dose in Gy.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .quantities import FLUENCE, FLUX, Quantity

#: Gy per unit (fluence x LET): converts MeV/mg deposited per kg to J/kg.
DOSE_COEFFICIENT = 1.602e-7

#: Julian year; mission-duration arithmetic uses 365.25 days.
SECONDS_PER_YEAR = 365.25 * 86400.0


class EnvironmentName(enum.Enum):
    EXPERIMENT = "experiment"
    LEO = "LEO"
    GEO = "GEO"


@dataclass(frozen=True, slots=True)
class EnvironmentFlux:
    """A particle environment at one LET: the experiment itself, LEO, or GEO."""

    name: EnvironmentName
    let: float
    flux: float  # cm^-2 s^-1

    def __post_init__(self) -> None:
        if self.flux < 0:
            raise ValueError(f"flux must be >= 0, got {self.flux}")


def dose_gy(fluence: float, let: float) -> float:
    """Absorbed dose in Gy for a fluence (cm^-2) at the given LET."""
    if fluence < 0:
        raise ValueError(f"fluence must be >= 0, got {fluence}")
    if let < 0:
        raise ValueError(f"let must be >= 0, got {let}")
    return DOSE_COEFFICIENT * fluence * let


def sel_fw_cross_section(n_sel: int, n_fw_block: int, fluence: float) -> float:
    """Combined SEL + firmware-block cross-section in cm^2.

    Events per unit fluence: (n_sel + n_fw_block) / fluence.
    """
    if fluence <= 0:
        raise ValueError(f"fluence must be > 0, got {fluence}")
    if n_sel < 0 or n_fw_block < 0:
        raise ValueError(f"counts must be >= 0, got {(n_sel, n_fw_block)}")
    return (n_sel + n_fw_block) / fluence


def mean_flux(fluence: float, duration: float) -> float:
    """Mean flux (cm^-2 s^-1) that accumulates `fluence` over `duration` s."""
    if duration <= 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    if fluence < 0:
        raise ValueError(f"fluence must be >= 0, got {fluence}")
    return fluence / duration


def effective_fluence(flux: float, duration: float, background: Quantity) -> Quantity:
    """Fluence over an irradiation interval, with background-driven uncertainty.

    Value is flux x duration. The uncertainty is the time integral of the
    background-flux uncertainty (the ambient-radioactivity term), so a
    (20 +/- 5) cm^-2 s^-1 background over 1e4 s contributes +/- 5e4 cm^-2.
    """
    background.expect(FLUX)
    if duration < 0:
        raise ValueError(f"duration must be >= 0, got {duration}")
    if flux < 0:
        raise ValueError(f"flux must be >= 0, got {flux}")
    return Quantity(flux * duration, background.uncertainty * duration, FLUENCE)


def event_rate(sigma: float, flux: float) -> float:
    """Event rate (s^-1) for a cross-section (cm^2) in a flux (cm^-2 s^-1)."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if flux < 0:
        raise ValueError(f"flux must be >= 0, got {flux}")
    return sigma * flux


def mean_period(rate: float) -> float:
    """Mean time between events (s) for a rate (s^-1)."""
    if rate <= 0:
        raise ValueError(f"rate must be > 0, got {rate}")
    return 1.0 / rate


def expected_mission_events(rate: float, mission_seconds: float) -> float:
    """Expected event count over a mission of the given length."""
    if rate < 0:
        raise ValueError(f"rate must be >= 0, got {rate}")
    if mission_seconds < 0:
        raise ValueError(f"mission_seconds must be >= 0, got {mission_seconds}")
    return rate * mission_seconds


def estimate_flux_from_scintillator(counts: int, area: float, duration: float,
                                    background: Quantity) -> Quantity:
    """Net beam flux from scintillator counting, background-subtracted.

    counts over `duration` s on a scintillator of `area` cm^2 give the raw
    flux; the background mean is subtracted (clamped at zero) and the
    Poisson counting error sqrt(N)/(area x duration) combines in quadrature
    with the background uncertainty.
    """
    background.expect(FLUX)
    if area <= 0:
        raise ValueError(f"area must be > 0, got {area}")
    if duration <= 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    if counts < 0:
        raise ValueError(f"counts must be >= 0, got {counts}")
    raw = counts / (area * duration)
    net = max(raw - background.value, 0.0)
    counting = math.sqrt(counts) / (area * duration)
    return Quantity(net, math.hypot(counting, background.uncertainty), FLUX)
