"""Behavioral simulator of finite state automata on a 1T1R ReRAM crossbar."""
from .device import (
    DEFAULT_TABLE,
    CellDevice,
    PhysicalModelParams,
    PulseSpec,
    StateId,
    StateTable,
    VariationProfile,
    apply_reset,
    apply_set,
    nominal_state_for_exposure,
    read_current,
    sample_d2d,
)
from .crossbar import AdcConfig, Crossbar, CrossbarConfig, adc_bits, adc_quantize, default_thresholds
from .controller import (
    Controller,
    EnergyLedger,
    LatencyLedger,
    energy_of,
    plan_transition,
    validate_trace,
)
from .automaton import (
    FsaSpec,
    KrinskyConfig,
    MultiCellEncoding,
    action_of,
    decode_state,
    encode_state,
    krinsky_next,
    krinsky_software,
    map_fsa_to_cells,
    run_krinsky,
)
from .analysis import MonteCarloConfig, margin_report, run_detection_mc, workload_report

__version__ = "0.1.0"
