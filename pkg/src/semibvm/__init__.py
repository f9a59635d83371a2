"""Bayesian and frequentist inference for regression models with symmetric
errors, with numeric Bernstein-von Mises diagnostics.

Layers:

* densities / error_laws / priors - symmetric densities with analytic
  scores, divergence functionals, the E1-E5 benchmark laws, and the two
  nonparametric priors (symmetrized DPM, random Fourier series);
* regression / mixed - data containers, likelihoods, and theta-scores for
  the linear model and the random-intercept mixed model;
* samplers / baselines - blocked-Gibbs and Metropolis-within-Gibbs
  posterior samplers plus Gaussian ML and OLS references;
* diagnostics - efficient information, the centering statistic Delta_n,
  LAN remainders, KL-ball sums, and posterior-vs-normal KS distances;
* harness / cli - seeded replication studies and their command line.
"""

from .densities import (
    Density,
    SymmetricDensity,
    from_pdf,
    hellinger_sq,
    kl_mean_and_variation,
    standard_normal_density,
    symmetric_gaussian_mixture,
    symmetrize,
    symmetry_diagnostics,
    total_variation,
)
from .error_laws import ERROR_LAW_TAGS, make_error_law, point_mass_zero
from .exceptions import (
    ConfigError,
    DivergenceInfiniteError,
    ImpreciseIntegrationError,
    InsufficientMcSizeError,
    NumericalFailureError,
    OptimizerFailureError,
    OutOfSupportError,
    SemibvmError,
    SingularDesignError,
    SingularInformationError,
    UnreliableChainError,
)
from .quadrature import QuadratureScheme, gauss_hermite_standard_normal, integrate
from .priors import (
    DpmDraw,
    DpmSpec,
    SeriesDraw,
    SeriesSpec,
    dpm_density,
    dpm_prior_draw,
    series_density,
    series_prior_draw,
)
from .regression import (
    RegressionDataset,
    generate_regression,
    loglik_regression,
    read_regression_csv,
    score_regression,
    write_regression_csv,
)
from .mixed import (
    MixedDataset,
    RandomEffectLaw,
    check_design_richness,
    generate_mixed,
    loglik_mixed,
    make_integrator,
    psi_density,
    psi_log_density,
    psi_score,
    read_mixed_csv,
    score_mixed,
    write_mixed_csv,
)
from .baselines import FrequentistFit, gaussian_ml_mixed, gls_fixed_effects, ols
from .samplers import (
    PosteriorChain,
    SamplerConfig,
    fit_b1_mixed,
    fit_b2_mixed,
    fit_b2_regression,
    fit_series_regression,
)
from .diagnostics import (
    BvmReport,
    FisherInfo,
    bvm_distance,
    d2_distance,
    delta_n,
    fisher_mixed,
    fisher_regression,
    kl_ball_membership,
    lan_remainder,
    mean_hellinger_regression,
)
from .harness import (
    ExperimentConfig,
    ResultTable,
    derive_rng,
    derive_seed,
    load_config,
    run_bvm_sweep,
    run_lan_sweep,
    run_table1,
)

__version__ = "0.1.0"
