"""Simulator and optimizer for entanglement-swapping QKD with realistic
down-conversion sources and noisy threshold detectors, plus a decoy-state
BB84 baseline for comparison."""

__version__ = "0.1.0"

from .detectors import (
    DEFAULT_CONSTRAINT,
    DetectorConstraint,
    ThresholdDetector,
    constraint_pdc,
)
from .errors import (
    ConstraintViolationError,
    NoCoincidenceError,
    TruncationError,
    UndefinedStateError,
    UndefinedVisibilityError,
)
from .fock import ConditionalState, ModeRegister, TruncationPolicy
from .metrics import (
    AnalyzerSetting,
    CoincidenceTable,
    QberReport,
    X_BASIS,
    Z_BASIS,
    bell_psi_minus,
    chsh,
    embed_qubit_pair,
    fidelity_visibility,
    fourfold_coincidence,
    qber,
    visibility,
    visibility_scan,
)
from .optimize import (
    OptimumPoint,
    Scenario,
    SweepRow,
    es_optimal_rate,
    decoy_optimal_rate,
    evaluate,
    find_crossover,
    max_positive_alpha,
    optimize_chi,
    optimize_joint,
    sweep,
)
from .rates import (
    DecoyInputs,
    DecoyRateReport,
    KeyRateReport,
    decoy_inputs,
    decoy_rate_report,
    decoy_secret_rate,
    h2,
    optimal_mu,
    qber_threshold,
    secret_rate,
    sifted_rate,
)
from .sources import PdcSource, pair_amplitudes, pdc_two_mode_state, two_source_state
from .swap import (
    HeraldPattern,
    SwapResult,
    accepted_patterns,
    apply_psi_plus_correction,
    bsm_detector,
    perform_bsm,
    swap_conditional_state,
)

__all__ = [
    "__version__",
    "AnalyzerSetting",
    "CoincidenceTable",
    "ConditionalState",
    "ConstraintViolationError",
    "DecoyInputs",
    "DecoyRateReport",
    "DEFAULT_CONSTRAINT",
    "DetectorConstraint",
    "HeraldPattern",
    "KeyRateReport",
    "ModeRegister",
    "NoCoincidenceError",
    "OptimumPoint",
    "PdcSource",
    "QberReport",
    "Scenario",
    "SwapResult",
    "SweepRow",
    "ThresholdDetector",
    "TruncationError",
    "TruncationPolicy",
    "UndefinedStateError",
    "UndefinedVisibilityError",
    "X_BASIS",
    "Z_BASIS",
    "accepted_patterns",
    "apply_psi_plus_correction",
    "bell_psi_minus",
    "bsm_detector",
    "chsh",
    "constraint_pdc",
    "decoy_inputs",
    "decoy_optimal_rate",
    "decoy_rate_report",
    "decoy_secret_rate",
    "embed_qubit_pair",
    "es_optimal_rate",
    "evaluate",
    "fidelity_visibility",
    "find_crossover",
    "fourfold_coincidence",
    "h2",
    "max_positive_alpha",
    "optimal_mu",
    "optimize_chi",
    "optimize_joint",
    "pair_amplitudes",
    "pdc_two_mode_state",
    "perform_bsm",
    "qber",
    "qber_threshold",
    "secret_rate",
    "sifted_rate",
    "sweep",
    "swap_conditional_state",
    "two_source_state",
    "visibility",
    "visibility_scan",
]
