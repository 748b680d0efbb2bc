"""Physical quantities with uncertainties over a closed unit vocabulary.

Every number that crosses a module boundary with physical meaning travels
as a Quantity so unit mismatches fail loudly (a fluence handed to an
operation expecting a flux raises) instead of silently producing garbage.
The vocabulary is deliberately closed: this tool only ever deals in
fluences, fluxes, times, doses, areas, rates, currents, and counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

FLUENCE = "cm^-2"
FLUX = "cm^-2 s^-1"
SECONDS = "s"
GRAY = "Gy"
AREA = "cm^2"
PER_SECOND = "s^-1"
MILLIAMP = "mA"
AMP = "A"
COUNT = "count"

UNITS = frozenset({FLUENCE, FLUX, SECONDS, GRAY, AREA, PER_SECOND, MILLIAMP, AMP, COUNT})


class UnitError(ValueError):
    """A quantity carried the wrong unit for an operation."""


@dataclass(frozen=True, slots=True)
class Quantity:
    """A value with a symmetric uncertainty and a unit from the closed set."""

    value: float
    uncertainty: float = 0.0
    unit: str = COUNT

    def __post_init__(self) -> None:
        if self.unit not in UNITS:
            raise UnitError(f"unknown unit {self.unit!r}; allowed: {sorted(UNITS)}")
        if not math.isfinite(self.value):
            raise ValueError(f"value must be finite, got {self.value!r}")
        if not math.isfinite(self.uncertainty) or self.uncertainty < 0:
            raise ValueError(f"uncertainty must be finite and >= 0, got {self.uncertainty!r}")

    def expect(self, unit: str) -> Quantity:
        """Return self if the unit matches, otherwise raise UnitError."""
        if self.unit != unit:
            raise UnitError(f"expected a quantity in {unit!r}, got {self.unit!r}")
        return self

    def __str__(self) -> str:
        if self.uncertainty:
            return f"({self.value:g} +/- {self.uncertainty:g}) {self.unit}"
        return f"{self.value:g} {self.unit}"
