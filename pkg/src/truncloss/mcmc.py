"""Random-walk Metropolis-Hastings within Gibbs for (lambda, alpha, beta).

Priors are independent uniforms on a box.  Each coordinate is proposed from
a normal centred at its current value and truncated to its prior interval,
and the sweep order is fixed: lambda, then alpha, then beta.

Random numbers come from a PCG64 generator seeded with ``config.seed``;
for every sweep the generator yields three proposal uniforms followed by
three acceptance uniforms, in blocks of sweeps.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.stats import norm

from . import _kernels
from .likelihood import loglik_from_stats, pareto_stats
from .mle import fit_joint, observed_information
from .model import DomainError, ModelParams, NoEventsError

__all__ = [
    "PARAM_NAMES",
    "McmcConfig",
    "McmcChain",
    "ChainSummary",
    "TuneResult",
    "propose_truncated_normal",
    "log_proposal_density",
    "acceptance_probability",
    "run_chain",
    "chain_summary",
    "tune_sigmas",
    "laplace_approximation",
]

PARAM_NAMES = ("lambda", "alpha", "beta")
_BLOCK = 65536


@dataclass(frozen=True)
class McmcConfig:
    """Sampler settings; per-parameter tuples are ordered (lambda, alpha, beta)."""

    bounds: tuple = ((0.1, 500.0), (0.1, 6.0), (0.1, 8.0))
    sigmas: tuple = (5.0, 0.2, 0.3)
    iterations: int = 1_000_000
    burn_in: int = 1000
    seed: int = 0
    order: tuple = PARAM_NAMES

    def __post_init__(self):
        b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        s = tuple(float(v) for v in self.sigmas)
        object.__setattr__(self, "bounds", b)
        object.__setattr__(self, "sigmas", s)
        if len(b) != 3 or len(s) != 3:
            raise DomainError("need three bounds and three sigmas")
        if any(not lo < hi for lo, hi in b):
            raise DomainError("each lower bound must be below its upper bound")
        if any(not v > 0 for v in s):
            raise DomainError("proposal sigmas must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise DomainError("need 0 <= burn_in < iterations")
        if tuple(self.order) != PARAM_NAMES:
            raise DomainError("only the lambda -> alpha -> beta sweep is supported")

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.bounds])

    def center(self) -> ModelParams:
        return ModelParams.from_array(0.5 * (self.lower + self.upper))

    def inside(self, v) -> bool:
        v = np.asarray(v, dtype=float)
        return bool(np.all(v > self.lower) and np.all(v < self.upper))

    def to_dict(self) -> dict:
        return {
            "bounds": {n: list(b) for n, b in zip(PARAM_NAMES, self.bounds)},
            "sigmas": dict(zip(PARAM_NAMES, self.sigmas)),
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "order": list(self.order),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "McmcConfig":
        kw = {}
        if "bounds" in d:
            kw["bounds"] = tuple(tuple(d["bounds"][n]) for n in PARAM_NAMES)
        if "sigmas" in d:
            kw["sigmas"] = tuple(d["sigmas"][n] for n in PARAM_NAMES)
        for key in ("iterations", "burn_in", "seed"):
            if key in d:
                kw[key] = int(d[key])
        return cls(**kw)


@dataclass(frozen=True)
class McmcChain:
    """Samples ``(K, 3)``; row 0 is the initial state."""

    samples: np.ndarray
    accepted: np.ndarray
    attempted: np.ndarray
    config: McmcConfig
    forced_rejections: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=np.int64))

    @property
    def acceptance_rates(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.accepted / self.attempted

    @property
    def initial(self) -> ModelParams:
        return ModelParams.from_array(self.samples[0])

    def post_burn_in(self, burn_in: Optional[int] = None) -> np.ndarray:
        b = self.config.burn_in if burn_in is None else burn_in
        return self.samples[b:]

    def __len__(self):
        return self.samples.shape[0]


@dataclass(frozen=True)
class ChainSummary:
    mean: np.ndarray
    std: np.ndarray
    nse: np.ndarray
    n_samples: int
    n_bins: int

    def to_dict(self) -> dict:
        return {
            n: {"mean": float(m), "std": float(s), "nse": float(e)}
            for n, m, s, e in zip(PARAM_NAMES, self.mean, self.std, self.nse)
        }


@dataclass(frozen=True)
class TuneResult:
    sigmas: tuple
    acceptance_rates: np.ndarray
    in_band: bool
    informative: np.ndarray
    rounds: int


def propose_truncated_normal(current: float, sigma: float, a: float, b: float, rng) -> float:
    """Draw from a normal(current, sigma) truncated to ``(a, b)``."""
    if not (a < b and sigma > 0):
        raise DomainError("need a < b and sigma > 0")
    return _kernels.trunc_normal_draw(float(current), float(sigma), float(a), float(b), rng.random())


def log_proposal_density(x, mu, sigma, a, b) -> float:
    """Log density at ``x`` of normal(mu, sigma) truncated to (a, b)."""
    mass = norm.cdf(b, mu, sigma) - norm.cdf(a, mu, sigma)
    return float(norm.logpdf(x, mu, sigma) - math.log(mass))


def acceptance_probability(gamma_star, gamma_current, coord_index: int,
                           config: McmcConfig, loglik_fn: Callable) -> float:
    """Metropolis-Hastings acceptance probability for a single-coordinate move.

    ``loglik_fn`` maps a 3-vector to the log posterior up to a constant
    (the log-likelihood under flat priors).  A non-finite value at the
    proposal gives probability 0.
    """
    gs = np.asarray(gamma_star, dtype=float)
    gc = np.asarray(gamma_current, dtype=float)
    if not (config.inside(gs) and config.inside(gc)):
        raise DomainError("states must lie inside the prior box")
    if np.array_equal(gs, gc):
        return 1.0
    i = coord_index
    a, b = config.bounds[i]
    s = config.sigmas[i]
    ll_star = loglik_fn(gs)
    if not math.isfinite(ll_star):
        return 0.0
    log_r = (
        ll_star - loglik_fn(gc)
        + log_proposal_density(gc[i], gs[i], s, a, b)
        - log_proposal_density(gs[i], gc[i], s, a, b)
    )
    return math.exp(min(log_r, 0.0))


def _uniform_blocks(seed, n_sweeps):
    rng = np.random.Generator(np.random.PCG64(seed))
    done = 0
    while done < n_sweeps:
        m = min(_BLOCK, n_sweeps - done)
        u = rng.random((m, 6))
        yield np.ascontiguousarray(u[:, :3]), np.ascontiguousarray(u[:, 3:])
        done += m


def _resolve_init(data, config, init):
    if init is None:
        try:
            v = fit_joint(data, covariance=False).params_hat.as_array()
        except NoEventsError:
            v = None
        if v is None or not np.all(np.isfinite(v)):
            init = config.center()
        else:
            # pull an MLE outside the box just inside it
            lo, hi = config.lower, config.upper
            pad = 1e-3 * (hi - lo)
            init = ModelParams.from_array(np.clip(v, lo + pad, hi - pad))
    if not config.inside(init.as_array()):
        raise DomainError("initial state outside the prior bounds")
    return init


def _python_sweeps(stats, state, config, u_prop, u_acc, out, accepted, forced):
    # Reference implementation of the compiled kernel (same random stream).
    def ll(v):
        return loglik_from_stats(stats, v[0], v[1], v[2])

    cur = state.copy()
    for k in range(u_prop.shape[0]):
        for i in range(3):
            a, b = config.bounds[i]
            prop = cur.copy()
            prop[i] = _kernels.trunc_normal_draw(cur[i], config.sigmas[i], a, b, u_prop[k, i])
            if not math.isfinite(ll(prop)):
                forced[i] += 1
                continue
            if u_acc[k, i] < acceptance_probability(prop, cur, i, config, ll):
                accepted[i] += 1
                cur = prop
        out[k] = cur
    state[:] = cur


def run_chain(data, config: McmcConfig, init: Optional[ModelParams] = None,
              *, engine: str = "compiled") -> McmcChain:
    """Sample the posterior; returns ``config.iterations`` states.

    ``init`` defaults to the joint MLE (or the prior-box centre if the MLE is
    unavailable or outside the box).  ``engine="python"`` runs the slow
    reference sweep, which consumes the same random numbers.
    """
    init = _resolve_init(data, config, init)
    stats = pareto_stats(data)
    x = np.ascontiguousarray(stats.losses, dtype=np.float64)
    dur = np.ascontiguousarray(stats.durations, dtype=np.float64)
    lev = np.ascontiguousarray(stats.levels, dtype=np.float64)
    lo, hi = config.lower, config.upper
    sig = np.array(config.sigmas)
    K = int(config.iterations)
    samples = np.empty((K, 3))
    samples[0] = init.as_array()
    state = init.as_array().copy()
    accepted = np.zeros(3, dtype=np.int64)
    forced = np.zeros(3, dtype=np.int64)
    row = 1
    for u_prop, u_acc in _uniform_blocks(config.seed, K - 1):
        out = samples[row:row + u_prop.shape[0]]
        if engine == "compiled":
            _kernels.gibbs_sweeps(x, dur, lev, state, lo, hi, sig, u_prop, u_acc, out, accepted, forced)
        elif engine == "python":
            _python_sweeps(stats, state, config, u_prop, u_acc, out, accepted, forced)
        else:
            raise DomainError(f"unknown engine {engine!r}")
        row += u_prop.shape[0]
    attempted = np.full(3, K - 1, dtype=np.int64)
    samples.setflags(write=False)
    chain = McmcChain(samples, accepted, attempted, config, forced)
    _warn_if_frozen(chain)
    return chain


def _warn_if_frozen(chain: McmcChain):
    if len(chain) < 3:
        return
    rates = chain.acceptance_rates
    spread = np.ptp(chain.samples, axis=0)
    width = chain.config.upper - chain.config.lower
    for i, name in enumerate(PARAM_NAMES):
        if rates[i] > 0.95 and spread[i] < 1e-6 * width[i]:
            warnings.warn(
                f"{name}: acceptance {rates[i]:.3f} but the chain barely moves; "
                "proposal sigma is too small",
                RuntimeWarning,
                stacklevel=3,
            )


def chain_summary(chain, burn_in: Optional[int] = None, n_bins: int = 100) -> ChainSummary:
    """Posterior mean, stdev and binned numerical standard error.

    The post-burn-in chain is cut into ``n_bins`` equal non-overlapping bins
    (remainder dropped from the end); the numerical standard error is the
    stdev of the bin means over ``sqrt(n_bins)``.
    """
    s = chain.post_burn_in(burn_in) if isinstance(chain, McmcChain) else np.asarray(chain)[burn_in or 0:]
    n = s.shape[0]
    if n < n_bins or n_bins < 2:
        raise DomainError(f"{n} post-burn-in samples cannot fill {n_bins} bins")
    size = n // n_bins
    bins = s[: size * n_bins].reshape(n_bins, size, -1).mean(axis=1)
    return ChainSummary(
        mean=s.mean(axis=0),
        std=s.std(axis=0, ddof=1),
        nse=bins.std(axis=0, ddof=1) / math.sqrt(n_bins),
        n_samples=n,
        n_bins=n_bins,
    )


def tune_sigmas(data, config: McmcConfig, target_rate: float = 0.234, *,
                init: Optional[ModelParams] = None, pilot_iterations: int = 2000,
                max_rounds: int = 50, band=(0.15, 0.35)) -> TuneResult:
    """Adjust proposal sigmas with short pilot chains.

    After each pilot run every sigma is multiplied by
    ``exp(rate - target_rate)``; sigmas are first capped at the width of
    their prior interval, beyond which the proposal no longer changes.
    Stops once all acceptance rates are inside ``band``.  A coordinate whose
    rate stays above 0.9 at the cap is reported as non-informative.
    """
    init = _resolve_init(data, config, init)
    width = config.upper - config.lower
    sig = np.minimum(np.array(config.sigmas), width)
    rates = np.full(3, np.nan)
    state = init
    in_band = False
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        pilot = replace(config, sigmas=tuple(sig), iterations=pilot_iterations, burn_in=0,
                        seed=config.seed + rounds)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            ch = run_chain(data, pilot, state)
        rates = ch.acceptance_rates
        state = ModelParams.from_array(ch.samples[-1])
        if np.all((rates >= band[0]) & (rates <= band[1])):
            in_band = True
            break
        sig = np.minimum(sig * np.exp(rates - target_rate), width)
    informative = ~((rates > 0.9) & (sig >= width * (1 - 1e-12)))
    if not in_band:
        warnings.warn(f"acceptance rates {np.round(rates, 3)} outside {band} after tuning",
                      RuntimeWarning, stacklevel=2)
    return TuneResult(tuple(float(v) for v in sig), rates, in_band, informative, rounds)


def laplace_approximation(data, mode_hat: ModelParams, config: Optional[McmcConfig] = None):
    """Gaussian approximation of the posterior around its mode.

    With flat priors the log posterior equals the log-likelihood inside the
    box, so the covariance is the observed-information inverse.  Returns
    ``(mean, covariance)``; covariance is ``None`` if the Hessian is not
    negative definite.
    """
    config = config or McmcConfig(iterations=2, burn_in=0)
    if not config.inside(mode_hat.as_array()):
        raise DomainError("mode must lie inside the prior bounds")
    info = observed_information(mode_hat, data)
    return mode_hat.as_array(), info.covariance
