"""The 0.999 quantile of annual loss, with and without parameter uncertainty.

At known parameters the Panjer recursion gives the quantile to grid
accuracy, and Monte Carlo confirms it.  Averaging over the posterior gives
the predictive quantile, which is larger because it also carries the
estimation error.
"""

import numpy as np

from truncloss import (
    McmcConfig,
    ModelParams,
    PanjerConfig,
    conditional_quantile_distribution,
    mc_quantile,
    panjer_quantile,
    predictive_quantile,
    run_chain,
)
from truncloss.pipeline import pipeline_seeds, predictive_pipeline, reduced_dataset
from truncloss.simulate import SimConfig, simulate_dataset

truth = ModelParams(50.0, 2.0, 3.0)

# %% Known parameters
exact = panjer_quantile(truth, 0.999)
mc = mc_quantile(truth, 0.999, 1_000_000, seed=0)
print(f"Panjer {exact.value:.2f}; Monte Carlo {mc.value:.1f} "
      f"[{mc.details['ci_low']:.1f}, {mc.details['ci_high']:.1f}]")

# %% Full predictive quantile on one simulated five-year history
seeds = pipeline_seeds(7)
data = simulate_dataset(SimConfig(seed=seeds["simulate"]))
chain = run_chain(data, McmcConfig(iterations=300_000, seed=seeds["mcmc"]))
pred = predictive_quantile(chain, 0.999, seed=seeds["predictive"])
print(f"predictive quantile {pred.value:.1f}")

# %% Keeping only losses above the final threshold loses information
reduced = run_chain(reduced_dataset(data), McmcConfig(iterations=300_000, seed=seeds["mcmc"]))
print(f"reduced-data predictive quantile {predictive_quantile(reduced, 0.999, seed=seeds['predictive']).value:.1f}")

# %% The spread of the quantile itself over the posterior
qs = conditional_quantile_distribution(chain, 0.999, PanjerConfig(), 2000)
for k, v in qs.summary().items():
    print(f"{k:>8s} {v:10.1f}")

# %% Repeating the whole pipeline on fresh data
q = [predictive_pipeline(s, iterations=100_000)["q_hat"] for s in range(5)]
print("predictive quantiles over five histories:", np.round(q, 1))
