"""Granger-Geweke causality from a single full VAR regression via
state-space innovations models, with a dual-regression baseline and a Monte
Carlo harness for sampling distributions and null thresholds."""

__version__ = "0.1.0"

from .causality import (
    GcSpectralResult,
    GcTimeResult,
    affine_invariance_check,
    dual_regression_all_pairs,
    dual_regression_gc_time,
    gc_all_pairs_spectral,
    gc_all_pairs_time,
    gc_spectral_exact,
    gc_time_exact,
    single_regression_gc,
)
from .statespace import StateSpaceInnovations, solve_dare, ss_spectrum, subprocess_innovations, var_to_ss
from .var import (
    AutocovSequence,
    SpectralMatrix,
    TimeSeries,
    VarModel,
    fit_var_ols,
    simulate_var,
    validate_and_build_model,
    var_autocov,
    var_spectrum,
)
from .whittle import gc_time_via_whittle, whittle_factorize
