"""Embedded reference fixtures: the published campaign-result tables.

Every number is stored twice: as the printed text (so tolerance checks can
honor the printed precision) and as the parsed float. The fixture is
read-only and checksummed; accidental edits surface as an integrity error
at load time rather than as silently shifted verification baselines.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass

from .domain import Species
from .physics import EnvironmentName


class ReferenceIntegrityError(RuntimeError):
    """The embedded fixture does not match its build-time checksum."""


@dataclass(frozen=True, slots=True)
class PrintedValue:
    """A number exactly as printed, plus its parsed value."""

    text: str

    @property
    def value(self) -> float:
        return float(self.text)

    @property
    def sig_figs(self) -> int:
        mantissa = re.split("[eE]", self.text)[0]
        digits = mantissa.lstrip("+-").replace(".", "").lstrip("0")
        return len(digits)


def round_to_sig(value: float, n: int) -> float:
    """Round to n significant figures (n >= 1)."""
    if value == 0:
        return 0.0
    return round(value, -int(math.floor(math.log10(abs(value)))) + (n - 1))


def matches_printed(computed: float, printed: PrintedValue) -> bool:
    """True if `computed` rounds to the printed value at its printed precision."""
    rounded = round_to_sig(computed, printed.sig_figs)
    target = printed.value
    if target == 0:
        return rounded == 0
    return abs(rounded - target) <= 1e-9 * abs(target)


@dataclass(frozen=True, slots=True)
class IonResultRow:
    """Per-sample ion campaign outcome: fluence, time, current check."""

    sample: str
    species: Species
    fluence: PrintedValue          # cm^-2
    irradiation_time_s: float
    absorbed_current_ma: PrintedValue
    current_tolerance_ma: float
    passed: bool


@dataclass(frozen=True, slots=True)
class CrossSectionRow:
    """Per-sample event counts and the printed combined cross-section."""

    sample: str
    fluence: PrintedValue          # cm^-2
    n_sel: int
    n_fw_block: int
    sigma: PrintedValue            # cm^2


@dataclass(frozen=True, slots=True)
class EnvironmentRow:
    name: EnvironmentName
    sample: str | None
    flux: PrintedValue             # cm^-2 s^-1
    rate: PrintedValue             # s^-1
    note: str = ""


@dataclass(frozen=True, slots=True)
class EnvironmentBlock:
    """One LET block of the flux/event-rate table."""

    let: float
    sigma: PrintedValue
    rows: tuple[EnvironmentRow, ...]


@dataclass(frozen=True, slots=True)
class NeutronResultRow:
    sample: str
    total_fluence: PrintedValue    # cm^-2
    fluence_before_break: PrintedValue | None
    irradiation_time_s: float
    broken: bool
    note: str = ""


@dataclass(frozen=True, slots=True)
class ResetSummaryRow:
    """Reset counts per test context for one neutron sample.

    radiationless is the beam-off test right after irradiation; after_60_days
    the two-hour test two months later; after_transistor the repeat with a
    known-fine regulator transistor (only the three suspect samples).
    """

    sample: str
    during_irradiation: int
    radiationless: int
    after_60_days: int
    after_transistor: int | None
    radiationless_missing_in_source: bool = False


ION_RESULTS: tuple[IonResultRow, ...] = (
    IonResultRow("ST01", Species.KR84, PrintedValue("1.01e7"), 6027, PrintedValue("50.0"), 0.5, True),
    IonResultRow("ST02", Species.KR84, PrintedValue("1.21e7"), 6321, PrintedValue("30.0"), 0.5, False),
    IonResultRow("ST03", Species.KR84, PrintedValue("1.33e7"), 8205, PrintedValue("50.0"), 0.5, True),
    IonResultRow("ST05", Species.KR84, PrintedValue("1.27e7"), 10790, PrintedValue("50.0"), 0.5, True),
    IonResultRow("ST06", Species.KR84, PrintedValue("2.1e6"), 3592, PrintedValue("50.0"), 0.5, True),
    IonResultRow("ST04", Species.KR78, PrintedValue("1.14e7"), 13813, PrintedValue("50.0"), 0.5, True),
    IonResultRow("ST07", Species.KR78, PrintedValue("2.3e6"), 2706, PrintedValue("50.0"), 0.5, True),
    IonResultRow("ST08", Species.KR78, PrintedValue("2.6e5"), 900, PrintedValue("50.0"), 0.5, True),
)

CROSS_SECTIONS: tuple[CrossSectionRow, ...] = (
    CrossSectionRow("ST01", PrintedValue("1.01e7"), 0, 816, PrintedValue("8.08e-5")),
    CrossSectionRow("ST02", PrintedValue("1.21e7"), 0, 802, PrintedValue("6.63e-5")),
    CrossSectionRow("ST03", PrintedValue("1.33e7"), 0, 56, PrintedValue("4.21e-6")),
    CrossSectionRow("ST04", PrintedValue("1.14e7"), 0, 479, PrintedValue("4.20e-5")),
    CrossSectionRow("ST05", PrintedValue("1.27e7"), 0, 1248, PrintedValue("9.83e-5")),
    CrossSectionRow("ST06", PrintedValue("2.1e6"), 0, 130, PrintedValue("6.19e-5")),
    CrossSectionRow("ST07", PrintedValue("2.3e6"), 0, 120, PrintedValue("5.22e-5")),
    CrossSectionRow("ST08", PrintedValue("2.6e5"), 0, 15, PrintedValue("5.77e-5")),
)

# The ST04 experiment row is printed inside the LET-45 block but pairs with
# the 78Kr cross-section; it is normalized under LET 34 here. Editorial
# placement fix only; no value changed.
ENVIRONMENTS: tuple[EnvironmentBlock, ...] = (
    EnvironmentBlock(45.0, PrintedValue("8.08e-5"), (
        EnvironmentRow(EnvironmentName.EXPERIMENT, "ST01", PrintedValue("1.68e3"), PrintedValue("1.35e-1")),
        EnvironmentRow(EnvironmentName.LEO, None, PrintedValue("2.31e-8"), PrintedValue("1.87e-12")),
        EnvironmentRow(EnvironmentName.GEO, None, PrintedValue("6.37e-9"), PrintedValue("5.14e-13")),
    )),
    EnvironmentBlock(34.0, PrintedValue("4.20e-5"), (
        EnvironmentRow(EnvironmentName.EXPERIMENT, "ST04", PrintedValue("8.25e2"), PrintedValue("3.47e-2"),
                       note="printed inside the LET-45 block in the source"),
        EnvironmentRow(EnvironmentName.LEO, None, PrintedValue("8.10e-8"), PrintedValue("3.40e-12")),
        EnvironmentRow(EnvironmentName.GEO, None, PrintedValue("2.08e-8"), PrintedValue("8.75e-13")),
    )),
)

NEUTRON_RESULTS: tuple[NeutronResultRow, ...] = (
    NeutronResultRow("S3", PrintedValue("3.78e10"), None, 13885, False),
    NeutronResultRow("S5", PrintedValue("1.98e11"), None, 62220, False),
    NeutronResultRow("S7", PrintedValue("1.34e11"), PrintedValue("5.89e9"), 50365, True),
    NeutronResultRow("S9", PrintedValue("3.06e10"), PrintedValue("2.31e10"), 10543, True),
    NeutronResultRow("S10", PrintedValue("3.27e10"), None, 11938, False),
    NeutronResultRow("S13", PrintedValue("2.86e10"), PrintedValue("2.86e10"), 11361, True,
                     note="acted broken only in the post-irradiation test; "
                          "assumed to have broken at the end of acquisition"),
    NeutronResultRow("S15", PrintedValue("1.82e11"), None, 59886, False),
)

RESET_SUMMARY: tuple[ResetSummaryRow, ...] = (
    ResetSummaryRow("S3", 20, 2, 0, None),
    ResetSummaryRow("S5", 29, 20, 0, None),
    ResetSummaryRow("S7", 3782, 30, 8, 32),
    ResetSummaryRow("S9", 194, 18, 547, 16),
    ResetSummaryRow("S10", 147, 4, 0, None),
    ResetSummaryRow("S13", 181, 62, 30, 12),
    ResetSummaryRow("S15", 24, 0, 0, None, radiationless_missing_in_source=True),
)

# Values quoted in prose rather than tables: periods between firmware blocks,
# three-year mission event counts, dose envelope endpoints, background flux.
PROSE: dict[str, PrintedValue] = {
    "period_experiment_let45_s": PrintedValue("7.41"),
    "period_leo_let45_s": PrintedValue("5.35e11"),
    "period_geo_let45_s": PrintedValue("1.94e12"),
    "mission_3yr_leo_let45": PrintedValue("1.76e-4"),
    "mission_3yr_geo_let45": PrintedValue("4.85e-5"),
    "dose_min_kr84_gy": PrintedValue("15.14"),
    "dose_max_kr84_gy": PrintedValue("95.9"),
    "dose_min_kr78_gy": PrintedValue("1.4"),
    "dose_max_kr78_gy": PrintedValue("62"),
    "background_flux": PrintedValue("20"),
    "background_flux_unc": PrintedValue("5"),
    "baseline_current_ma": PrintedValue("50.0"),
    "baseline_current_tol_ma": PrintedValue("0.5"),
    "broken_current_drop_ma": PrintedValue("1.5"),
}


@dataclass(frozen=True)
class ReferenceTables:
    """In-memory fixture of every published table, keyed by sample id."""

    ion_results: tuple[IonResultRow, ...]
    cross_sections: tuple[CrossSectionRow, ...]
    environments: tuple[EnvironmentBlock, ...]
    neutron_results: tuple[NeutronResultRow, ...]
    reset_summary: tuple[ResetSummaryRow, ...]
    prose: dict[str, PrintedValue]

    def ion_row(self, sample: str) -> IonResultRow:
        return _pick(self.ion_results, sample)

    def cross_section_row(self, sample: str) -> CrossSectionRow:
        return _pick(self.cross_sections, sample)

    def neutron_row(self, sample: str) -> NeutronResultRow:
        return _pick(self.neutron_results, sample)

    def reset_row(self, sample: str) -> ResetSummaryRow:
        return _pick(self.reset_summary, sample)

    def environment_block(self, let: float) -> EnvironmentBlock:
        for block in self.environments:
            if block.let == let:
                return block
        raise KeyError(f"no environment block for LET {let}")


def _pick(rows, sample):
    for row in rows:
        if row.sample == sample:
            return row
    raise KeyError(f"no row for sample {sample!r}")


def _canonical_blob() -> bytes:
    def plain(obj):
        if isinstance(obj, PrintedValue):
            return obj.text
        if isinstance(obj, (Species, EnvironmentName)):
            return obj.value
        if isinstance(obj, tuple):
            return [plain(x) for x in obj]
        if hasattr(obj, "__dataclass_fields__"):
            return {k: plain(getattr(obj, k)) for k in obj.__dataclass_fields__}
        return obj

    payload = {
        "ion_results": plain(ION_RESULTS),
        "cross_sections": plain(CROSS_SECTIONS),
        "environments": plain(ENVIRONMENTS),
        "neutron_results": plain(NEUTRON_RESULTS),
        "reset_summary": plain(RESET_SUMMARY),
        "prose": {k: v.text for k, v in sorted(PROSE.items())},
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()


#: sha256 of the canonical fixture serialization, pinned at build time.
FIXTURE_SHA256 = "2645aa76938b2b80c282c1bb27758f918cea82888225d91f3115c9f277a0fe39"


def fixture_digest() -> str:
    return hashlib.sha256(_canonical_blob()).hexdigest()


def load_tables() -> ReferenceTables:
    """Return the fixture after verifying its build-time checksum."""
    digest = fixture_digest()
    if digest != FIXTURE_SHA256:
        raise ReferenceIntegrityError(
            f"reference fixture checksum mismatch: {digest} != {FIXTURE_SHA256}")
    return ReferenceTables(ION_RESULTS, CROSS_SECTIONS, ENVIRONMENTS,
                           NEUTRON_RESULTS, RESET_SUMMARY, dict(PROSE))
