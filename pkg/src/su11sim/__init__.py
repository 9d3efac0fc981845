"""Adaptive phase estimation in a vacuum-seeded twin-beam interferometer.

The simulator covers the full chain: exact twin-pair coefficient tables,
photon-number and bound-saturating detection models, grid-based Bayesian
posteriors, adaptive feedback protocols, and seeded ensemble campaigns
benchmarked against the quantum Cramer-Rao, Heisenberg, and shot-noise
limits.
"""
from ._version import __version__
from .checks import CheckResult, run_verify
from .analysis import (
    Benchmarks,
    benchmarks,
    error_propagation_variance,
    fisher_information,
    quantum_fisher,
)
from .ensemble import (
    CampaignConfig,
    CampaignResult,
    CellStats,
    DEFAULT_MASTER_SEED,
    ThresholdRow,
    ThresholdScanResult,
    TrialSummary,
    derive_seed,
    run_campaign,
    threshold_scan,
)
from .errors import (
    CampaignError,
    DegenerateRowError,
    DerivativeCheckError,
    ResidualMassError,
    SU11Error,
    TruncationError,
)
from .measurement import (
    LikelihoodGrid,
    LikelihoodModel,
    Outcome,
    POLICY_EXACT_TAIL,
    POLICY_RENORMALIZE,
    Scheme,
    detection_asymmetry,
    likelihood,
    likelihood_curve,
    make_model,
    pair_ratio,
    pmf,
    residual_mass,
    sample,
    shared_grid_tables,
)
from .posterior import (
    Peak,
    PeakReport,
    PhaseGrid,
    Posterior,
    density,
    detect_peaks,
    map_estimate,
    posterior_mean,
    posterior_variance,
    prune_secondary,
    uniform_posterior,
    update,
    update_log,
)
from .protocols import (
    MODE_FIXED,
    MODE_LADDER,
    MODE_OPTIMAL,
    ProtocolConfig,
    StepRecord,
    TrialRecord,
    run_fixed,
    run_ladder,
    run_optimal,
    run_trial,
    scheme_for_mode,
)
from .tmsq import (
    AmplitudeVector,
    OpaParams,
    SchmidtTable,
    amplitudes,
    build_schmidt_table,
    pair_amplitude_matrix,
)

__all__ = [
    "__version__",
    "AmplitudeVector",
    "Benchmarks",
    "CampaignConfig",
    "CampaignError",
    "CampaignResult",
    "CellStats",
    "CheckResult",
    "DEFAULT_MASTER_SEED",
    "DegenerateRowError",
    "DerivativeCheckError",
    "LikelihoodGrid",
    "LikelihoodModel",
    "MODE_FIXED",
    "MODE_LADDER",
    "MODE_OPTIMAL",
    "OpaParams",
    "Outcome",
    "POLICY_EXACT_TAIL",
    "POLICY_RENORMALIZE",
    "Peak",
    "PeakReport",
    "PhaseGrid",
    "Posterior",
    "ProtocolConfig",
    "ResidualMassError",
    "SU11Error",
    "Scheme",
    "SchmidtTable",
    "StepRecord",
    "ThresholdRow",
    "ThresholdScanResult",
    "TrialRecord",
    "TrialSummary",
    "TruncationError",
    "amplitudes",
    "benchmarks",
    "build_schmidt_table",
    "density",
    "derive_seed",
    "detect_peaks",
    "detection_asymmetry",
    "error_propagation_variance",
    "fisher_information",
    "likelihood",
    "likelihood_curve",
    "make_model",
    "map_estimate",
    "pair_amplitude_matrix",
    "pair_ratio",
    "pmf",
    "posterior_mean",
    "posterior_variance",
    "prune_secondary",
    "quantum_fisher",
    "residual_mass",
    "run_campaign",
    "run_fixed",
    "run_ladder",
    "run_optimal",
    "run_trial",
    "run_verify",
    "sample",
    "scheme_for_mode",
    "shared_grid_tables",
    "threshold_scan",
    "uniform_posterior",
    "update",
    "update_log",
]
