"""Synthetic loss data: Poisson event times, Pareto losses, threshold removal.

All randomness comes from numpy's PCG64 generator.  A seed is expanded with
``numpy.random.SeedSequence``; child streams (event times, losses, and
replicate seeds) are obtained with ``SeedSequence.spawn`` so that every
stream is reproducible on its own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    AnnualCounts,
    DomainError,
    EventTimes,
    ModelParams,
    ObservationWindow,
    ThresholdSchedule,
)

__all__ = [
    "SimConfig",
    "replicate_seeds",
    "pareto_rvs",
    "simulate_events",
    "apply_threshold",
    "to_annual_counts",
    "simulate_dataset",
]

TRUE_PARAMS = ModelParams(lam=50.0, alpha=2.0, beta=3.0)
TRUE_SCHEDULE = ThresholdSchedule.exponential(2.0, 0.03)


@dataclass(frozen=True)
class SimConfig:
    true_params: ModelParams = TRUE_PARAMS
    schedule: ThresholdSchedule = TRUE_SCHEDULE
    years: int = 5
    seed: int = 0

    def __post_init__(self):
        if int(self.years) != self.years or self.years < 1:
            raise DomainError("years must be a positive integer")
        self.schedule.year_levels(int(self.years))


def replicate_seeds(seed: int, n: int) -> list[int]:
    """Independent 64-bit seeds for ``n`` replicates derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def pareto_rvs(alpha, beta, size, rng):
    """Pareto(alpha, beta) variates by inverse CDF."""
    u = rng.random(size)
    return beta * np.expm1(-np.log1p(-u) / alpha)


def _event_times(lam, t_end, rng):
    # Inter-arrival times by inverse CDF, drawn in blocks until past t_end.
    block = int(lam * t_end + 6.0 * np.sqrt(lam * t_end) + 16)
    chunks, last = [], 0.0
    while True:
        tau = -np.log1p(-rng.random(block)) / lam
        t = last + np.cumsum(tau)
        chunks.append(t)
        if t[-1] > t_end:
            break
        last = t[-1]
    t = np.concatenate(chunks)
    return t[t <= t_end]


def simulate_events(config: SimConfig) -> EventTimes:
    """All events (before truncation) over ``config.years`` years.

    Returned with a zero threshold attached; use :func:`apply_threshold`
    to keep only reported events.
    """
    p = config.true_params
    ss_times, ss_losses = np.random.SeedSequence(config.seed).spawn(2)
    rng_t = np.random.Generator(np.random.PCG64(ss_times))
    rng_x = np.random.Generator(np.random.PCG64(ss_losses))
    years = int(config.years)
    t = _event_times(p.lam, float(years), rng_t)
    x = pareto_rvs(p.alpha, p.beta, t.size, rng_x)
    return EventTimes(t, x, ObservationWindow(0.0, float(years)))


def apply_threshold(data: EventTimes, schedule: ThresholdSchedule) -> EventTimes:
    """Keep the events whose loss is at or above the level in force."""
    if not isinstance(data, EventTimes):
        raise DomainError("apply_threshold needs event-time data")
    levels = schedule.level_at(data.times, data.window)
    keep = data.losses >= levels
    return EventTimes(data.times[keep], data.losses[keep], data.window, schedule)


def to_annual_counts(data: EventTimes) -> AnnualCounts:
    w = data.window
    if not w.is_whole_years:
        raise DomainError("window length must be a whole number of years")
    M = w.n_years
    years = w.year_index(data.times)
    counts = np.bincount(years - 1, minlength=M)
    return AnnualCounts(counts, data.losses, years, w, data.schedule)


def simulate_dataset(config: SimConfig) -> EventTimes:
    """Simulate and truncate in one go (the reported sample)."""
    return apply_threshold(simulate_events(config), config.schedule)
