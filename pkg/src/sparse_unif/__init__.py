"""Sparse uniformity testing for discrete distributions.

Given n samples on a domain of size d, decide whether their distribution is
uniform or differs from uniform in exactly s coordinates with L1 distance at
least eps.  The package provides the test statistics and their analytic and
Monte-Carlo calibrations, the detection-threshold formulas, least-favorable
prior constructions with exact likelihood-ratio second moments, and a
reproducible Monte-Carlo harness for power phase diagrams.
"""

from .backend import BACKEND, HAVE_NUMBA, USE_NUMBA
from .errors import ConfigError, DomainError, InfeasibleError, SparseUnifError
from .model import (
    Density,
    ProbabilityVector,
    ProblemParams,
    Regime,
    RegimeConstants,
    SampleSizeRegime,
    c_alpha,
    classify_regime,
    epsilon_max,
    even_sparsity,
    l0_distance_to_uniform,
    l1_distance_to_uniform,
    make_block_alternative,
    threshold_eps1,
    threshold_eps2,
    uniform_vector,
)
from .sampling import (
    Histogram,
    Scheme,
    SeedSpec,
    sample_histogram_matrix,
    sample_multinomial,
    sample_poissonized,
)
from .statistics import (
    AnalyticCalibration,
    MonteCarloCalibration,
    NullTailTable,
    TestReport,
    batch_statistic,
    build_null_tail_table,
    calibrate_many,
    calibrate_null,
    chi_sq_moments,
    chi_sq_statistic,
    chi_sq_test_analytic,
    combined_test,
    ghc_grid,
    ghc_grid_test,
    ghc_statistic,
    max_std_statistic,
    max_tests_analytic,
)
from .lowerbound import (
    PriorKind,
    PriorSpec,
    SecondMomentReport,
    check_variational_identity,
    expected_l1_of_impossibility_prior,
    f_r,
    f_r_threshold,
    paired_second_moment_exact,
    paired_second_moment_mc,
    risk_lower_bound_from_second_moment,
    sample_impossibility_prior,
    sample_paired_dense_prior,
    sample_sparse_twosided_prior,
)
from .harness import (
    NRule,
    PhaseGridSpec,
    PowerCell,
    PowerGrid,
    emit_grid,
    load_config,
    run_phase_diagram,
    run_power_cell,
)

__version__ = "0.1.0"
