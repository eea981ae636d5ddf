"""Stochastic delayed SIR model with Brownian and Lévy-jump noise."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ChiTwoNonPositive,
    DegenerateDiffusion,
    EmptyWindow,
    InvalidOrder,
    LevySIRError,
    NonFiniteState,
    ParseError,
    ThetaNonPositive,
    ValidationError,
)
from .model import (  # noqa: E402
    LevyAtom,
    ModelParams,
    NoiseSpec,
    Regime,
    ThresholdReport,
    deterministic_threshold,
    drift_reduced,
    extinction_report,
    find_p,
    gamma_kernel,
    moment_condition,
    persistence_report,
    threshold_report,
    validate_hypotheses,
)
from .integrator import (  # noqa: E402
    RngStreams,
    SimConfig,
    Trajectory,
    em_step,
    simulate,
    simulate_deterministic,
    simulate_psi,
)
from .analysis import (  # noqa: E402
    EnsembleSummary,
    LemmaVerdict,
    ensemble,
    extinction_verdict,
    lyapunov_slope,
    persistence_verdict,
    time_average,
    verify_lemma2,
)

__all__ = [
    "ChiTwoNonPositive", "DegenerateDiffusion", "EmptyWindow", "InvalidOrder", "LevySIRError",
    "NonFiniteState", "ParseError", "ThetaNonPositive", "ValidationError",
    "LevyAtom", "ModelParams", "NoiseSpec", "Regime", "ThresholdReport",
    "deterministic_threshold", "drift_reduced", "extinction_report", "find_p", "gamma_kernel",
    "moment_condition", "persistence_report", "threshold_report", "validate_hypotheses",
    "RngStreams", "SimConfig", "Trajectory", "em_step", "simulate", "simulate_deterministic",
    "simulate_psi",
    "EnsembleSummary", "LemmaVerdict", "ensemble", "extinction_verdict", "lyapunov_slope",
    "persistence_verdict", "time_average", "verify_lemma2",
]
