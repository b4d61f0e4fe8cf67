"""Forming Index, system strength and grid strength of converter-dominated grids."""

__version__ = "0.1.0"

from .converters import (
    CONTROL_STRATEGIES,
    DEFAULT_OP,
    NO_LOAD,
    STRATEGIES,
    AdmittanceModel,
    ConverterSpec,
    FilterParams,
    OperatingPoint,
    build_admittance,
    converter,
    eval_admittance,
    flat_profile_op,
    linearize_power,
)
from .errors import ConfigError, FormidexError, NumericalError
from .forming_index import Classification, SweepResult, classify, forming_index, forming_index_sweep, sensitivity
from .network import (
    BlockEvaluation,
    Device,
    NetworkCase,
    absorb_device,
    build_susceptance,
    closed_loop,
    evaluate_blocks,
    full_system,
    load_bundled,
    load_case,
    load_device,
)
from .strength import (
    Prop1Report,
    ScenarioComparison,
    StrengthSweep,
    compare_scenarios,
    prop1_check,
    strength_point,
    strength_sweep,
)
from .tfcore import FrequencyGrid, LineParams, eval_Z, eval_Zinv, make_freq_grid, sigma_max, sigma_min, svd_extremes
from .time_response import DisturbanceSpec, TimeSeries, ilt_bromwich, step_response
