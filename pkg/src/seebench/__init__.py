"""seebench: a desk-scale single-event-effects test bench.

Seedable simulation of heavy-ion and atmospheric-like-neutron irradiation
campaigns against a microcontroller test board, plus the analysis pipeline
that turns campaign logs into dosimetry, cross-sections, orbital event-rate
extrapolations, and chip-health verdicts.
"""

from .quantities import Quantity, UnitError
from .domain import (
    ADC_SUPPLY_PIN,
    AnnealPolicy,
    BeamSpec,
    CampaignConfig,
    Channel,
    ConfigValidationError,
    DutProfile,
    Event,
    EventKind,
    EventLog,
    Health,
    MONITORED_CHANNELS,
    Phase,
    Species,
    SpotGeometry,
    TelemetryRecord,
    validate,
)
from .physics import (
    EnvironmentFlux,
    EnvironmentName,
    SECONDS_PER_YEAR,
    dose_gy,
    effective_fluence,
    estimate_flux_from_scintillator,
    event_rate,
    expected_mission_events,
    mean_flux,
    mean_period,
    sel_fw_cross_section,
)
from .simulator import (
    Action,
    CampaignResult,
    DutState,
    PhaseTimeline,
    apply_annealing,
    draw_event_times,
    generate_phase_timeline,
    latchup_check,
    run_campaign,
    watchdog_check,
)
from .classify import (
    HealthVerdict,
    ResetLog,
    ResetRun,
    RunParams,
    chip_status,
    detect_reset_runs,
    estimate_break_fluence,
    test_passed,
)
from .analysis import (
    AnalysisRow,
    ReportBundle,
    analyze_files,
    analyze_result,
    build_report,
    verify_reference_tables,
)
from .io import (
    load_campaign_config,
    load_reference_tables,
    parse_events,
    parse_telemetry,
    write_events,
    write_telemetry,
)

__version__ = "0.1.0"
