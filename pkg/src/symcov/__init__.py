"""Symmetry-aware covariance shrinkage.

Reynolds projection of sample covariances under finite permutation groups,
convex structural blends with closed-form and cross-validated intensity
calibration, two-tier data-driven group selection, and a seeded Monte Carlo
benchmarking harness with a CSV-only CLI.
"""

from .matrixcore import (
    Dataset,
    SpectralDecomposition,
    SymmetricMatrix,
    frobenius_inner,
    frobenius_norm,
    gaussian_nll_per_sample,
    sample_covariance,
    spectral,
)
from .groups import GroupAction, OrbitPartition, orbit_partition, reynolds_project
from .shrinkage import (
    EstimatorResult,
    ad_blend,
    ad_lwnl_blend,
    lw2004,
    lw2004_auto,
    lwnl,
    shah_projection,
)
from .calibration import (
    AlphaGrid,
    CalibrationResult,
    FoldScheme,
    cv_nll_alpha,
    mse_plugin_alpha,
    predict_alpha_nll_asymptotic,
    predict_n_star,
)
from .bmg import BMGReport, CandidateLibrary, bmg_with_fallback, delta_residual, tier1_admit, tier2_select
from .synth import (
    PopulationSpec,
    SweepConfig,
    TrialRecord,
    build_decoy_library,
    make_population,
    run_mp_verification,
    run_trial_sweep,
    sample_gaussian,
)

__version__ = "0.1.0"
