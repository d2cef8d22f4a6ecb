"""Tail probabilities for the maximum of score-statistic random fields on
pixel grids, with a line-segment signal model: analytic approximation,
Monte Carlo harness, and an invariant verification suite."""

__version__ = "0.1.0"

from .errors import ConfigError, DegeneracyError, QuadratureError
from .families import FamilySpec, cumulant, cumulant_triple, tilted_success_prob
from .geometry import Grid, SignalParams, segment_distance, theta, theta_grad
from .functionals import (
    FieldContext, LocalFunctionals, fisher_info, lambda_matrix,
    local_functionals, score, score_grad,
)
from .approximation import (
    ApproxResult, Edge, QuadResult, RegionSpec, ValidityWarning,
    boundary_coefficient, boundary_integrand, interior_integrand,
    quadrature_1d, quadrature_2d, tail_approx, tail_approx_multi, tail_prefactor,
)
from .numerics import (
    finite_diff_grad, mills_expansion, normal_cdf, normal_pdf, normal_sf,
    tilted_tail_exact, trunc_moment,
)
from .simulate import (
    MaximizeResult, SimConfig, SimResult, estimate_pvalues, iteration_rng,
    maximize_score, sample_field,
)
from .verification import CheckResult, run_all_checks

__all__ = [name for name in dir() if not name.startswith("_")]
