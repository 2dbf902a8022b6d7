"""Exact Bayesian inference for SDE mixed-effects models.

Per-unit stochastic dynamics with random effects, fitted by a blocked
Metropolis-within-Gibbs sampler whose intractable likelihoods are replaced
by unbiased particle-filter estimates, optionally correlated across
iterations through a Crank-Nicolson move on the driving randomness.
"""

from .aux_random import (
    AuxStream,
    StreamSpec,
    crank_nicolson,
    gaussian_to_uniform,
    init_stream,
    kernel_log_density,
    substream,
    systematic_resample,
)
from .diagnostics import (
    EfficiencyReport,
    autocorrelation_time,
    efficiency_table,
    ess,
    mess,
    perf_measure,
    wasserstein1d,
)
from .errors import (
    ConfigError,
    DegenerateKernelError,
    DegenerateWeightsError,
    InvalidStateError,
    NumericalModelError,
    StartupDegeneracyError,
    TuningFailureError,
    UndefinedStatisticError,
    UnsupportedModelError,
)
from .filters import (
    FilterResult,
    bootstrap_filter,
    bridge_filter,
    kalman_loglik,
    lna_forward_filter,
    lna_ode_step,
    sort_particles,
)
from .filters.backend import have_compiled
from .models import (
    Dataset,
    GammaPrior,
    LogNormalPrior,
    ModelSpec,
    NormalGammaPrior,
    NormalPrior,
    ParameterState,
    PriorSpec,
    UnitData,
    get_model,
    list_models,
    load_dataset,
    load_truth,
    register_model,
    save_dataset,
    save_truth,
    simulate_dataset,
    truth_to_state,
)
from .samplers import (
    AdaptConfig,
    ChainOutput,
    GibbsConfig,
    ProposalAdapter,
    adapt_proposal,
    draw_eta_conjugate,
    eta_posterior_params,
    mh_log_accept,
    run_gibbs,
    run_pmmh_reference,
)
from .tuning import (
    TuningReport,
    estimate_loglik_correlation,
    estimate_loglik_variance,
    tune_particles,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig",
    "AuxStream",
    "ChainOutput",
    "ConfigError",
    "Dataset",
    "DegenerateKernelError",
    "DegenerateWeightsError",
    "EfficiencyReport",
    "FilterResult",
    "GammaPrior",
    "GibbsConfig",
    "InvalidStateError",
    "LogNormalPrior",
    "ModelSpec",
    "NormalGammaPrior",
    "NormalPrior",
    "NumericalModelError",
    "ParameterState",
    "PriorSpec",
    "ProposalAdapter",
    "StartupDegeneracyError",
    "StreamSpec",
    "TuningFailureError",
    "TuningReport",
    "UndefinedStatisticError",
    "UnitData",
    "UnsupportedModelError",
    "adapt_proposal",
    "autocorrelation_time",
    "bootstrap_filter",
    "bridge_filter",
    "crank_nicolson",
    "draw_eta_conjugate",
    "eta_posterior_params",
    "efficiency_table",
    "ess",
    "estimate_loglik_correlation",
    "estimate_loglik_variance",
    "gaussian_to_uniform",
    "get_model",
    "have_compiled",
    "init_stream",
    "kalman_loglik",
    "kernel_log_density",
    "list_models",
    "lna_forward_filter",
    "lna_ode_step",
    "load_dataset",
    "load_truth",
    "mess",
    "mh_log_accept",
    "perf_measure",
    "register_model",
    "run_gibbs",
    "run_pmmh_reference",
    "save_dataset",
    "save_truth",
    "simulate_dataset",
    "sort_particles",
    "substream",
    "systematic_resample",
    "truth_to_state",
    "tune_particles",
    "wasserstein1d",
    "__version__",
]
