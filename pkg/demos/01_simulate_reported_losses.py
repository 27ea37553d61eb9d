"""Simulating losses that are only reported above a rising threshold.

Events arrive as a Poisson process with rate lambda and Pareto severities.
A loss is kept only if it exceeds the threshold in force in its year, so the
reported process is a thinned, non-homogeneous Poisson process.
"""

import numpy as np

from truncloss import ModelParams, SimConfig, ThresholdSchedule, simulate_dataset, to_annual_counts
from truncloss.model import thinned_intensity

# %% The default setting: L_m = 2 exp(0.03 m) over five years
params = ModelParams(50.0, 2.0, 3.0)
schedule = ThresholdSchedule.exponential(2.0, 0.03)
data = simulate_dataset(SimConfig(true_params=params, schedule=schedule, years=5, seed=1))
print(f"{data.n_events} reported losses over {data.window.t_end:g} years")

# %% Reported counts by year against the thinned rate
counts = to_annual_counts(data).counts
levels = schedule.year_levels(5)
for m, (n, L) in enumerate(zip(counts, levels), start=1):
    print(f"year {m}: threshold {L:.3f}, reported {n:3d}, expected {thinned_intensity(params, L):.2f}")

# %% Severities are reported only above the threshold of their year
gap = data.losses - schedule.level_at(data.times, data.window)
print("smallest margin above threshold:", gap.min())

# %% A long constant-threshold run recovers lambda (1 + L/beta)^-alpha = 18
long = simulate_dataset(SimConfig(schedule=ThresholdSchedule.constant(2.0), years=10_000, seed=2))
print("mean reported count per year:", long.n_events / 10_000)
