"""Least-squares autoregressive order selection for same-realization prediction."""

from ._backend import BACKEND
from .criteria import CriterionId, CriterionScores, parse_criteria, score, select, write_scores
from .fit import (
    DesignSummary,
    FitSequence,
    decomposition_check,
    design_summary,
    empirical_R_distance,
    fit_all_orders,
    innovation_identity_residual,
    normal_equation_residual,
    predict_one,
    pseudo_innovation_stats,
)
from .process import (
    ARCoeffs,
    AutocovTable,
    MACoeffs,
    ProcessSpec,
    SamplePath,
    ar_coefficients,
    autocovariances,
    conditional_mean_next,
    ma_coefficients,
    simulate,
)
from .theory import (
    OrderKProjection,
    TheoreticalCurve,
    basin_profile,
    fit_norm,
    kstar_asymptotic_algebraic,
    kstar_asymptotic_exponential,
    loss_curve,
    quadratic_R_norm,
    yule_walker,
)

__version__ = "0.1.0"
