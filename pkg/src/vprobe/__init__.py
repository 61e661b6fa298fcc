"""Virtual probe station for force-deflection tests of cantilever MEMS devices."""

from ._kernels import BACKEND
from .analysis import (
    AnalysisError,
    AnalysisReport,
    RegimeSegmentation,
    StiffnessFit,
    Trace,
    VariationReport,
    analyze_trace,
    compare_samples,
    correct_calibration,
    correct_compliance,
    fit_stiffness,
    placement_sensitivity,
    segment_regimes,
    series_stiffness,
)
from .contact import (
    ContactMode,
    EquilibriumState,
    Event,
    EventKind,
    PlacementSpec,
    SimTrace,
    SolverConfig,
    SolverError,
    contact_path,
    contact_point,
    edge_contact_state,
    flank_contact_state,
    run_sweep,
    solve_equilibrium,
)
from .instrument import (
    ActuatorModel,
    ApparatusModel,
    InstrumentModel,
    LoadCellModel,
    MeasurementTrace,
    actual_position,
    deflection_partition,
    read_force,
    run_virtual_measurement,
)
from .mechanics import (
    DIAMOND,
    SILICON,
    BeamSpec,
    DeviceSpec,
    DomainError,
    MaterialProps,
    ModelValidityWarning,
    ProofMassSpec,
    SpecError,
    StylusSpec,
    beam_tip_response,
    hertz_contact_radius,
    hertz_peak_pressure,
    is_fractured,
    linear_stiffness_at,
    root_bending_stress,
)
from .presets import DEFAULT_STYLUS, load_preset

__version__ = "0.1.0"
