"""Bayesian nonparametric inference for time-varying SIR infection rates."""
__version__ = "0.1.0"

from .chain import ChainOutput, PosteriorSummary, effective_sample_size, summarize
from .cts_gp import (CtsGpPriors, ThinnedAugmentedState, run_cts_gp_mcmc, sgcp_augmented_loglik,
                     sir_thinned_augmented_loglik)
from .discrete_gp import (BetaPrior, DiscreteAugmentedState, discrete_augmented_loglik, discrete_log_h,
                          ml_daily_estimate, run_discrete_gp_mcmc)
from .epi import (Constant, EpidemicEvents, Event, Exponential, Function, Geometric, RemovalData, Tabulated,
                  TimeScale, Transformed, trajectory_counts, trajectory_counts_left)
from .errors import ConfigError, DataError, EpinpError, InitializationError, NumericalError, ParameterError
from .gp import GpField, KernelParams, conditional_extend, sample_prior, underrelaxed_propose
from .parametric import GammaPrior, ParametricPriors, augmented_loglik, run_parametric_mcmc
from .simulate import final_size_oracle, simulate_continuous, simulate_discrete

__all__ = [
    "BetaPrior", "ChainOutput", "ConfigError", "Constant", "CtsGpPriors", "DataError", "DiscreteAugmentedState",
    "EpidemicEvents", "EpinpError", "Event", "Exponential", "Function", "GammaPrior", "Geometric", "GpField",
    "InitializationError", "KernelParams", "NumericalError", "ParameterError", "ParametricPriors",
    "PosteriorSummary", "RemovalData", "Tabulated", "ThinnedAugmentedState", "TimeScale", "Transformed",
    "augmented_loglik", "conditional_extend", "discrete_augmented_loglik", "discrete_log_h",
    "effective_sample_size", "final_size_oracle", "ml_daily_estimate", "run_cts_gp_mcmc",
    "run_discrete_gp_mcmc", "run_parametric_mcmc", "sample_prior", "sgcp_augmented_loglik",
    "simulate_continuous", "simulate_discrete", "sir_thinned_augmented_loglik", "summarize",
    "trajectory_counts", "trajectory_counts_left", "underrelaxed_propose",
]
