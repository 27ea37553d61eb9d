"""End-to-end runs: simulate -> fit -> posterior -> predictive quantile."""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

import numpy as np

from .annual_loss import TRUE_QUANTILE_999, predictive_quantile
from .mcmc import McmcConfig, run_chain
from .model import EventTimes, ThresholdSchedule
from .simulate import SimConfig, replicate_seeds, simulate_dataset

__all__ = [
    "reduced_dataset",
    "pipeline_seeds",
    "predictive_pipeline",
    "convergence_study",
]


def reduced_dataset(data: EventTimes) -> EventTimes:
    """Keep only losses above the highest threshold, treated as a constant threshold."""
    top = data.schedule.max_level(data.window.n_years)
    keep = data.losses >= top
    return EventTimes(data.times[keep], data.losses[keep], data.window,
                      ThresholdSchedule.constant(top))


def pipeline_seeds(seed: int) -> dict:
    """Independent seeds for the simulation, chain and predictive stages."""
    sim, chain, pred = replicate_seeds(seed, 3)
    return {"simulate": sim, "mcmc": chain, "predictive": pred}


def predictive_pipeline(seed: int, years: int = 5, iterations: int = 1_000_000,
                        level: float = 0.999, config: Optional[McmcConfig] = None,
                        sim: Optional[SimConfig] = None, reduced: bool = False) -> dict:
    """One simulated dataset carried through to the predictive quantile.

    With ``reduced=True`` the same simulated sample is cut at its highest
    threshold before fitting; the chain and predictive seeds are unchanged so
    the full and reduced runs share random numbers.
    """
    seeds = pipeline_seeds(seed)
    sim = replace(sim or SimConfig(), years=years, seed=seeds["simulate"])
    data = simulate_dataset(sim)
    if reduced:
        data = reduced_dataset(data)
    config = replace(config or McmcConfig(), iterations=iterations, seed=seeds["mcmc"])
    chain = run_chain(data, config)
    q = predictive_quantile(chain, level, seed=seeds["predictive"])
    return {
        "seed": seed,
        "years": years,
        "n_events": data.n_events,
        "reduced": reduced,
        "q_hat": q.value,
        "q_error": q.error,
        "acceptance": chain.acceptance_rates.tolist(),
        "posterior_mean": chain.post_burn_in().mean(axis=0).tolist(),
    }


def convergence_study(m_values=(2, 5, 10, 20), replicates: int = 20, seed: int = 0,
                      iterations: int = 100_000, level: float = 0.999,
                      config: Optional[McmcConfig] = None) -> dict:
    """Predictive quantile over replicate datasets for each observation length.

    Returns per-cell rows, the per-length mean of the predictive quantile,
    the mean absolute distance to the true quantile, and whether the means
    move monotonically closer to the true quantile as the length grows.
    """
    seeds = np.array(replicate_seeds(seed, len(m_values) * replicates)).reshape(len(m_values), replicates)
    rows = []
    for i, M in enumerate(m_values):
        for r in range(replicates):
            out = predictive_pipeline(int(seeds[i, r]), years=int(M), iterations=iterations,
                                      level=level, config=config)
            rows.append({"M": int(M), "replicate": r, "seed": int(seeds[i, r]),
                         "n_events": out["n_events"], "q_hat": out["q_hat"]})
    means, gaps, spreads = [], [], []
    for M in m_values:
        q = np.array([row["q_hat"] for row in rows if row["M"] == M])
        means.append(float(q.mean()))
        gaps.append(float(np.mean(np.abs(q - TRUE_QUANTILE_999))))
        spreads.append(float(q.std(ddof=1)) if q.size > 1 else 0.0)
    return {
        "m_values": [int(m) for m in m_values],
        "rows": rows,
        "means": means,
        "mean_abs_gap": gaps,
        "spread": spreads,
        "reference": TRUE_QUANTILE_999,
        "means_decreasing": bool(np.all(np.diff(means) < 0)),
        "means_approach": bool(np.all(np.diff(np.abs(np.array(means) - TRUE_QUANTILE_999)) < 0)),
        "gap_decreasing": bool(np.all(np.diff(gaps) < 0)),
    }
