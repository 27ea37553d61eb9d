"""Poisson-Pareto loss models for data reported above a time-varying threshold.

Maximum likelihood and MCMC fitting of the rate and severity parameters, and
annual-loss quantiles with and without parameter uncertainty.
"""

from .annual_loss import (
    TRUE_QUANTILE_999,
    CompoundResult,
    GridTooSmallError,
    PanjerConfig,
    QuantileSampleSet,
    conditional_quantile_distribution,
    mc_quantile,
    panjer_quantile,
    predictive_quantile,
    sample_annual_loss,
    sample_annual_losses,
)
from .likelihood import (
    loglik,
    loglik_annual_counts,
    loglik_constant_threshold,
    loglik_event_times,
    score_event_times,
)
from .mcmc import McmcChain, McmcConfig, chain_summary, run_chain, tune_sigmas
from .mle import MleResult, fit_joint, fit_marginal, fit_misspecified, observed_information
from .model import (
    AnnualCounts,
    DomainError,
    EventTimes,
    IntensityFunction,
    ModelParams,
    NoEventsError,
    ObservationWindow,
    ThresholdSchedule,
    ThresholdViolation,
    cumulative_intensity,
    thinned_intensity,
)
from .simulate import SimConfig, apply_threshold, simulate_dataset, simulate_events, to_annual_counts

__version__ = "0.1.0"
