"""Maximum likelihood fits that honour the reporting threshold.

The rate is profiled out in closed form, so the optimizer only searches over
the two severity parameters.  Ignoring the drift in the threshold and
fitting as if it stayed at L_0 biases the estimates.
"""

import numpy as np

from truncloss import SimConfig, fit_joint, fit_marginal, fit_misspecified, simulate_dataset

data = simulate_dataset(SimConfig(years=5, seed=2024))
print(f"{data.n_events} reported losses")

# %% Joint, severity-only and constant-threshold fits
fits = {
    "joint": fit_joint(data),
    "marginal": fit_marginal(data),
    "misspecified": fit_misspecified(data, 2.0),
}
for name, r in fits.items():
    est = np.array2string(r.params_hat.as_array(), precision=3)
    se = np.array2string(r.std_errors, precision=3) if r.std_errors is not None else "n/a"
    print(f"{name:13s} lambda, alpha, beta = {est}  se {se}  converged {r.converged}")

# %% The mis-specified fit overstates the tail index on this design
print("alpha inflated:", fits["misspecified"].params_hat.alpha > fits["joint"].params_hat.alpha)

# %% Sampling spread shrinks with more years of data
for years in (5, 20):
    est = np.array([fit_joint(simulate_dataset(SimConfig(years=years, seed=s)), covariance=False)
                    .params_hat.as_array() for s in range(100)])
    print(f"M={years:2d}: median estimate {np.median(est, axis=0).round(3)}, "
          f"interquartile range {np.subtract(*np.percentile(est, [75, 25], axis=0)).round(3)}")
