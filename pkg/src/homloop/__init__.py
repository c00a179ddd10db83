"""Local and global two-photon HOM interference in time-multiplexed
loop networks: mode synthesis, correlation analysis, and delay-scan
simulation."""

from .errors import (
    BinOutOfWindowError,
    DegenerateInputError,
    DimensionMismatchError,
    FitFailureError,
    HomloopError,
    InfeasibleTargetError,
    PatternValidationError,
    ScenarioValidationError,
    UndefinedCorrelationError,
    WindowOverflowError,
)
from .modes import (
    ModeSubset,
    ModeVector,
    Polarization,
    equal_up_to_global_phase,
    inner_product,
    mode_vector,
    normalize,
    restrict,
)
from .network import (
    BALANCED,
    REFLECT,
    TRANSMIT,
    CoinKind,
    CoinSetting,
    LoopConfig,
    LoopState,
    SwitchingPattern,
    coin_from_eom_phase,
    coin_matrix,
    compile_pattern,
    jones_eom,
    jones_qwp,
    run_loop,
    step,
    validate_pattern,
)
from .interference import (
    CorrelationMatrix,
    Indistinguishability,
    clamp_visibility,
    g1_counts,
    g11_matrix,
    global_correlation,
    global_correlation_closed_form,
    global_visibility,
    local_correlation,
    local_visibility,
    normalized_g,
    visibility,
)
from .wavepacket import DEFAULT_SIGMA_T, GaussianPacket, indistinguishability, overlap
from .source import (
    PdcSourceModel,
    calibrate_floor,
    fourfold_coincidence,
    fourfold_visibility,
    pair_distribution,
    visibility_curve,
)
from .experiment import (
    DetectionParams,
    DipFit,
    ScanGrid,
    ScanResult,
    Scenario,
    TraceResult,
    count_stream,
    default_delays,
    fit_dip,
    klyshko_budget,
    normalize_visibility,
    run_scan,
    sample_counts,
    visibility_error,
)

__version__ = "0.1.0"
