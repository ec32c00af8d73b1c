"""randode: random second-order linear ODEs by mean-square power series,
with Monte Carlo estimation of the solution's probability density."""

__version__ = "0.1.0"

from .distributions import DistributionSpec, RngStream, density, l2_norm, raw_moment, sample
from .series import (
    CoefficientModel,
    ProblemSpec,
    SeriesPair,
    advise_truncation,
    eval_series,
    realize_series_pair,
    recur_coefficients,
    sample_coefficients,
)
from .polymoments import (
    SparsePolynomial,
    VariableSet,
    expectation,
    mean_and_variance,
    series_polynomial,
    symbolic_series,
)
from .estimator import (
    DensityEstimate,
    EstimatorConfig,
    auto_grid,
    density_kernel,
    estimate_control_variates,
    estimate_crude,
    exact_density,
    resolve_role,
)
from .analysis import (
    ConvergenceStudy,
    SamplingStudy,
    consecutive_norms,
    hellinger_distance,
    lp_distance,
    lp_distance_on_grid,
    pointwise_differences,
    reference_errors,
    regress_error_vs_difference,
    run_convergence_study,
    run_sampling_study,
    tv_distance,
)
from .config import (
    build_problem,
    load_config,
    preset_names,
    problem_to_config,
    resolve_config,
)

__all__ = [name for name in dir() if not name.startswith("_")]
