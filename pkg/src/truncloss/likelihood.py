"""Log-likelihoods and scores for Poisson/Pareto data above a known threshold.

Two data shapes are supported.  Event-time data use the simplified joint
likelihood ``lam**J * exp(-Lambda(t0, tE - t0)) * prod f(x_j)``; annual-count
data use the truncated-severity / yearly Poisson form (including the
``log n_m!`` terms).  The two differ by a constant in the parameters, so
values from different shapes should not be compared; their maximizers agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from .model import (
    AnnualCounts,
    DomainError,
    EventTimes,
    IntensityFunction,
    ModelParams,
    exposure_segments,
    severity_logsf,
    truncated_severity_logpdf,
)

__all__ = [
    "LogLikValue",
    "ParetoStats",
    "pareto_stats",
    "loglik_from_stats",
    "loglik_event_times",
    "loglik_constant_threshold",
    "loglik_annual_counts",
    "loglik",
    "score_event_times",
    "between_events_exposure",
    "central_gradient",
]


@dataclass(frozen=True)
class LogLikValue:
    value: float
    gradient: Optional[np.ndarray] = None

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class ParetoStats:
    """What the constant-intensity Pareto likelihood needs from a dataset.

    ``losses`` are the reported losses; ``durations``/``levels`` describe the
    exposure as time spent under each threshold level.
    """

    losses: np.ndarray
    durations: np.ndarray
    levels: np.ndarray

    @property
    def n_events(self) -> int:
        return int(self.losses.size)


def between_events_exposure(data: EventTimes):
    """Exposure with the threshold held constant between reported events.

    Each inter-arrival gap takes the level in force at the event that ends
    it, and the final gap up to ``t_end`` takes ``L(t_end)``.  Useful when
    the threshold is only known at the event times; for annual schedules the
    exact segment sum is preferred.
    """
    w = data.window
    tau = data.inter_arrivals
    lv = data.schedule.level_at(data.times, w) if data.n_events else np.empty(0)
    tail = w.t_end - (data.times[-1] if data.n_events else w.t_start)
    durations = np.append(tau, tail)
    levels = np.append(lv, data.schedule.level_at(w.t_end, w))
    return durations, levels


def pareto_stats(data, exposure: str = "exact") -> ParetoStats:
    if isinstance(data, AnnualCounts):
        M = data.window.n_years
        return ParetoStats(data.losses, np.ones(M), data.schedule.year_levels(M))
    if not isinstance(data, EventTimes):
        raise DomainError("unsupported data type")
    if exposure == "exact":
        d, L, _ = exposure_segments(data.schedule, data.window)
    elif exposure == "between_events":
        d, L = between_events_exposure(data)
    else:
        raise DomainError(f"unknown exposure mode {exposure!r}")
    return ParetoStats(data.losses, d, L)


def _survival(levels, alpha, beta):
    return np.exp(severity_logsf(levels, alpha, beta))


def loglik_from_stats(stats: ParetoStats, lam, alpha, beta) -> float:
    """Event-time form of the Pareto log-likelihood for constant intensity."""
    J = stats.n_events
    s1 = np.sum(np.log1p(stats.losses / beta))
    expo = np.sum(stats.durations * _survival(stats.levels, alpha, beta))
    return float(J * math.log(alpha / beta) - (1.0 + alpha) * s1 + J * math.log(lam) - lam * expo)


def loglik_event_times(
    params: ModelParams,
    data: EventTimes,
    intensity: Optional[IntensityFunction] = None,
    *,
    exposure: str = "exact",
    gradient: bool = False,
) -> LogLikValue:
    """Log-likelihood of event-time data.

    Parameters
    ----------
    params : ModelParams
        ``params.lam`` is the rate unless ``intensity`` is given.
    data : EventTimes
    intensity : IntensityFunction, optional
        Time-varying pre-truncation rate; supersedes ``params.lam``.  The
        gradient is then taken by finite differences in (alpha, beta) only
        and its lambda entry is ``nan``.
    exposure : {"exact", "between_events"}
        How the expected count is integrated (see
        :func:`between_events_exposure`).
    gradient : bool
        Also return ``(d/dlam, d/dalpha, d/dbeta)``.
    """
    if not isinstance(data, EventTimes):
        raise DomainError("event-time data required")
    if intensity is None or intensity.is_constant:
        lam = params.lam if intensity is None else intensity.levels[0]
        p = ModelParams(lam, params.alpha, params.beta)
        stats = pareto_stats(data, exposure)
        value = loglik_from_stats(stats, p.lam, p.alpha, p.beta)
        grad = _score_from_stats(stats, p.lam, p.alpha, p.beta) if gradient else None
        return LogLikValue(value, grad)

    if exposure != "exact":
        raise DomainError("between-events exposure needs constant intensity")

    def value_at(alpha, beta):
        d, L, rates = exposure_segments(data.schedule, data.window, intensity=intensity)
        J = data.n_events
        s1 = np.sum(np.log1p(data.losses / beta))
        log_rates = np.sum(np.log(intensity(data.times))) if J else 0.0
        expo = np.sum(rates * d * _survival(L, alpha, beta))
        return float(J * math.log(alpha / beta) - (1.0 + alpha) * s1 + log_rates - expo)

    value = value_at(params.alpha, params.beta)
    grad = None
    if gradient:
        g = central_gradient(lambda v: value_at(v[0], v[1]), [params.alpha, params.beta])
        grad = np.array([np.nan, g[0], g[1]])
    return LogLikValue(value, grad)


def loglik_constant_threshold(params: ModelParams, data: EventTimes) -> float:
    """Constant-threshold likelihood built from its unsimplified factors.

    Sum over events of ``log f_L(x_j) + log g(tau_j | theta)`` plus the log
    probability of no further event before ``t_end``, with ``theta`` the
    thinned rate.  Serves as an independent check of the simplified form.
    """
    if not data.schedule.is_constant:
        raise DomainError("constant schedule required")
    L = data.schedule.level
    a, b = params.alpha, params.beta
    theta = params.lam * float(_survival(L, a, b))
    tau = data.inter_arrivals
    ll = 0.0
    for x, t in zip(data.losses, tau):
        ll += truncated_severity_logpdf(x, a, b, L)
        ll += math.log(theta) - theta * t
    last = data.times[-1] if data.n_events else data.window.t_start
    ll += -theta * (data.window.t_end - last)
    return ll


def loglik_annual_counts(params: ModelParams, data: AnnualCounts, *, gradient: bool = False) -> LogLikValue:
    """Truncated severities plus a Poisson term for each year's count."""
    if not isinstance(data, AnnualCounts):
        raise DomainError("annual-count data required")
    if not data.window.is_whole_years:
        raise DomainError("schedule must be piecewise constant per whole year")
    M = data.window.n_years
    year_levels = data.schedule.year_levels(M)

    def value_at(v):
        lam, a, b = v
        sev = 0.0
        if data.losses.size:
            sev = np.sum(truncated_severity_logpdf(data.losses, a, b, year_levels[data.years - 1]))
        theta = lam * _survival(year_levels, a, b)
        n = data.counts
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = np.where(n > 0, n * np.log(theta), 0.0) - theta - gammaln(n + 1.0)
        return float(sev + np.sum(logp))

    v0 = params.as_array()
    value = value_at(v0)
    grad = central_gradient(value_at, v0) if gradient else None
    return LogLikValue(value, grad)


def loglik(params: ModelParams, data, **kw) -> LogLikValue:
    """Dispatch to the evaluator matching the data shape."""
    if isinstance(data, AnnualCounts):
        return loglik_annual_counts(params, data, **kw)
    return loglik_event_times(params, data, **kw)


def _score_from_stats(stats: ParetoStats, lam, alpha, beta) -> np.ndarray:
    x, d, L = stats.losses, stats.durations, stats.levels
    J = stats.n_events
    surv = _survival(L, alpha, beta)
    live = surv > 0
    Ll, dl, sl = L[live], d[live], surv[live]
    expo = np.sum(dl * sl)
    d_lam = J / lam - expo
    # d/dalpha of (1 + L/beta)**-alpha is -log1p(L/beta) * survival
    d_alpha = J / alpha - np.sum(np.log1p(x / beta)) + lam * np.sum(dl * np.log1p(Ll / beta) * sl)
    # d/dbeta of (1 + L/beta)**-alpha is alpha * L / (beta * (beta + L)) * survival
    d_beta = (
        -J / beta
        + (1.0 + alpha) * np.sum(x / (beta * (beta + x)))
        - lam * alpha * np.sum(dl * Ll / (beta * (beta + Ll)) * sl)
    )
    return np.array([d_lam, d_alpha, d_beta])


def score_event_times(params: ModelParams, data, *, exposure: str = "exact") -> np.ndarray:
    """Analytic gradient ``(d/dlam, d/dalpha, d/dbeta)`` of the log-likelihood.

    Constant intensity only.  Also valid for annual-count data, whose
    log-likelihood differs from the event-time form by a constant.
    """
    stats = pareto_stats(data, exposure)
    return _score_from_stats(stats, params.lam, params.alpha, params.beta)


def central_gradient(f: Callable, x, rel_step: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient with step ``rel_step * max(|x_i|, 1e-8)``."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = rel_step * max(abs(x[i]), 1e-8)
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (xp[i] - xm[i])
    return g
