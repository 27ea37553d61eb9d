"""Annual loss Z = X_1 + ... + X_N with N ~ Poisson(lam), X ~ Pareto(alpha, beta).

Quantiles by Monte Carlo (order statistics with a binomial rank interval) or
by Panjer recursion on a discretized severity, and the two ways of carrying
posterior parameter uncertainty into the quantile: the full predictive
distribution, and the distribution of conditional quantiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import norm

from ._kernels import panjer_poisson
from .mcmc import McmcChain
from .model import DomainError, ModelParams, severity_cdf
from .simulate import pareto_rvs

__all__ = [
    "TRUE_QUANTILE_999",
    "CompoundResult",
    "QuantileSampleSet",
    "PanjerConfig",
    "GridTooSmallError",
    "sample_annual_loss",
    "sample_annual_losses",
    "empirical_quantile",
    "mc_quantile",
    "discretize_severity",
    "panjer_pmf",
    "panjer_quantile",
    "auto_panjer_grid",
    "predictive_quantile",
    "conditional_quantile_distribution",
]

# 0.999 quantile of Poisson(50)-Pareto(2, 3) annual loss
TRUE_QUANTILE_999 = 824.4

_CHUNK_EVENTS = 4_000_000


class GridTooSmallError(DomainError):
    """The Panjer grid leaves too much probability mass uncovered."""

    def __init__(self, covered_mass, required_residual):
        self.covered_mass = float(covered_mass)
        self.required_residual = float(required_residual)
        super().__init__(
            f"grid too small: achieved mass {self.covered_mass:.10f}; residual "
            f"{1 - self.covered_mass:.3e} must be below {self.required_residual:.3e}"
        )


@dataclass(frozen=True)
class CompoundResult:
    level: float
    value: float
    method: str
    error: float
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.level < 1:
            raise DomainError("level must be in (0, 1)")
        if not self.value >= 0:
            raise DomainError("quantile must be nonnegative")

    def to_dict(self) -> dict:
        return {"level": self.level, "value": self.value, "method": self.method,
                "error": self.error, **self.details}


@dataclass(frozen=True)
class QuantileSampleSet:
    values: np.ndarray
    level: float
    n_failed: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size == 0:
            raise DomainError("empty quantile sample")
        if np.any(v < 0):
            raise DomainError("quantiles must be nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def median(self) -> float:
        return float(np.median(self.values))

    @property
    def std(self) -> float:
        v = self.values
        # exact zero for a constant sample (np.std rounds through the mean)
        if v.size < 2 or v.min() == v.max():
            return 0.0
        return float(np.std(v, ddof=1))

    @property
    def mode(self) -> float:
        """Midpoint of the fullest histogram bin, Freedman-Diaconis width."""
        v = self.values
        q75, q25 = np.percentile(v, [75, 25])
        width = 2.0 * (q75 - q25) / v.size ** (1.0 / 3.0)
        if width <= 0:
            vals, counts = np.unique(v, return_counts=True)
            return float(vals[np.argmax(counts)])
        lo = v.min()
        idx = np.floor((v - lo) / width).astype(np.int64)
        bins, counts = np.unique(idx, return_counts=True)
        return float(lo + (bins[np.argmax(counts)] + 0.5) * width)

    def quantile(self, q) -> float:
        return empirical_quantile(self.values, q)

    def summary(self) -> dict:
        return {
            "level": self.level,
            "n": int(self.values.size),
            "n_failed": int(self.n_failed),
            "mean": self.mean,
            "median": self.median,
            "mode": self.mode,
            "std": self.std,
            "q0.9": self.quantile(0.9),
            "q0.95": self.quantile(0.95),
            "q0.99": self.quantile(0.99),
        }


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.PCG64(rng))


def sample_annual_losses(lam, alpha, beta, rng) -> np.ndarray:
    """One annual loss per entry of the (broadcast) parameter arrays.

    Counts are Poisson(lam); severities are drawn by inverse CDF and summed
    per year.  Processed in chunks to bound memory.
    """
    rng = _as_rng(rng)
    lam, alpha, beta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (lam, alpha, beta)))
    lam, alpha, beta = lam.ravel(), alpha.ravel(), beta.ravel()
    K = lam.size
    n = rng.poisson(lam)
    out = np.zeros(K)
    start = 0
    while start < K:
        csum = np.cumsum(n[start:])
        stop = start + max(1, int(np.searchsorted(csum, _CHUNK_EVENTS, side="right")))
        cnt = n[start:stop]
        total = int(cnt.sum())
        if total:
            owner = np.repeat(np.arange(stop - start), cnt)
            x = pareto_rvs(alpha[start:stop][owner], beta[start:stop][owner], total, rng)
            out[start:stop] = np.bincount(owner, weights=x, minlength=stop - start)
        start = stop
    return out


def sample_annual_loss(params: ModelParams, rng) -> float:
    return float(sample_annual_losses(params.lam, params.alpha, params.beta, rng)[0])


def empirical_quantile(z, q) -> float:
    """Lower order statistic at rank ``ceil(K q)`` (1-based)."""
    z = np.asarray(z)
    K = z.size
    r = min(max(int(math.ceil(K * q - 1e-9)), 1), K)
    return float(np.partition(z, r - 1)[r - 1])


def _rank_interval(z, q, conf=0.95):
    K = z.size
    zc = norm.ppf(0.5 + conf / 2)
    half = zc * math.sqrt(K * q * (1 - q))
    lo = min(max(int(math.floor(K * q - half)), 1), K)
    hi = min(max(int(math.ceil(K * q + half)), 1), K)
    part = np.partition(z, [lo - 1, hi - 1])
    return float(part[lo - 1]), float(part[hi - 1])


def _mc_result(z, level, method, details):
    K = z.size
    if K * (1 - level) < 10:
        raise DomainError(f"K={K} is too small for level {level}; need K*(1-level) >= 10")
    value = empirical_quantile(z, level)
    lo, hi = _rank_interval(z, level)
    details = {**details, "K": int(K), "ci_low": lo, "ci_high": hi}
    return CompoundResult(level, value, method, 0.5 * (hi - lo), details)


def mc_quantile(params: ModelParams, level: float, K: int, seed) -> CompoundResult:
    """Monte Carlo quantile of the annual loss.

    ``error`` is the half-width of the 95% interval between the order
    statistics at ranks ``K p -/+ 1.96 sqrt(K p (1 - p))``.
    """
    if K * (1 - level) < 10:
        raise DomainError(f"K={K} is too small for level {level}; need K*(1-level) >= 10")
    z = sample_annual_losses(np.full(int(K), params.lam), params.alpha, params.beta, seed)
    return _mc_result(z, level, "monte_carlo", {"seed": seed})


def discretize_severity(alpha, beta, step, n):
    """Rounding discretization: cell 0 gets F(h/2), cell j gets F((j+1/2)h) - F((j-1/2)h)."""
    edges = (np.arange(n) + 0.5) * step
    F = severity_cdf(edges, alpha, beta)
    f = np.empty(n)
    f[0] = F[0]
    f[1:] = np.diff(F)
    return f


def panjer_pmf(severity_pmf, lam) -> np.ndarray:
    """Compound Poisson pmf on the severity lattice (coefficients a=0, b=lam)."""
    return panjer_poisson(severity_pmf, lam)


def panjer_quantile(params: ModelParams, level: float, step: float = 0.25,
                    max_grid: float = 6000.0) -> CompoundResult:
    """Quantile from the Panjer recursion on ``[0, max_grid]`` with cell ``step``.

    Raises
    ------
    GridTooSmallError
        If the grid leaves residual mass ``>= (1 - level) / 10``.
    """
    if not (step > 0 and max_grid > step):
        raise DomainError("need step > 0 and max_grid > step")
    n = int(round(max_grid / step)) + 1
    f = discretize_severity(params.alpha, params.beta, step, n)
    p = panjer_pmf(f, params.lam)
    cdf = np.cumsum(p)
    residual = 1.0 - cdf[-1]
    required = (1.0 - level) / 10.0
    if not residual < required:
        raise GridTooSmallError(cdf[-1], required)
    k = int(np.searchsorted(cdf, level, side="left"))
    return CompoundResult(level, k * step, "panjer", float(residual),
                          {"step": step, "max_grid": (n - 1) * step, "grid_size": n})


@dataclass(frozen=True)
class PanjerConfig:
    """Panjer settings for many parameter draws.

    If ``step`` is ``None`` the grid is sized per draw by
    :func:`auto_panjer_grid` with ``n_cells`` cells.
    """

    step: Optional[float] = None
    max_grid: Optional[float] = None
    n_cells: int = 8192
    retries: int = 3

    def to_dict(self) -> dict:
        return {"step": self.step, "max_grid": self.max_grid, "n_cells": self.n_cells,
                "retries": self.retries}


def auto_panjer_grid(params: ModelParams, level: float, n_cells: int = 16384):
    """``(step, max_grid)`` so the grid should leave residual below ``(1 - level)/10``.

    Uses the single-large-loss tail ``P(Z > z) ~ lam (1 + z/beta)**-alpha``
    with a safety factor of 4, plus the mean body when it is finite.
    """
    lam, a, b = params.lam, params.alpha, params.beta
    eps = (1.0 - level) / 40.0
    # log-space to survive tiny alpha
    log_tail = math.log(b) + math.log(max(math.exp(math.log(lam / eps) / a) - 1.0, 1.0))
    upper = math.exp(log_tail)
    if a > 1:
        upper += 2.0 * lam * b / (a - 1.0)
    upper = min(upper, 1e300)
    return upper / (n_cells - 1), upper


def _quantile_for_draw(params, level, cfg: PanjerConfig):
    if cfg.step is not None:
        return panjer_quantile(params, level, cfg.step, cfg.max_grid or 6000.0).value
    step, upper = auto_panjer_grid(params, level, cfg.n_cells)
    last = None
    for _ in range(cfg.retries + 1):
        try:
            return panjer_quantile(params, level, step, upper).value
        except GridTooSmallError as e:
            last = e
            step, upper = 2 * step, 2 * upper
    raise last


def predictive_quantile(chain, level: float = 0.999, draws_per_sample: int = 1,
                        seed=0, burn_in: Optional[int] = None) -> CompoundResult:
    """Quantile of the full predictive annual loss.

    Each retained posterior draw produces ``draws_per_sample`` simulated
    annual losses; the pooled sample's empirical quantile is returned with
    its rank-interval half-width.
    """
    s = _posterior_draws(chain, burn_in)
    if s.shape[0] < 10_000:
        raise DomainError(f"need at least 10000 post-burn-in draws, got {s.shape[0]}")
    rep = np.repeat(s, int(draws_per_sample), axis=0)
    z = sample_annual_losses(rep[:, 0], rep[:, 1], rep[:, 2], seed)
    return _mc_result(z, level, "predictive",
                      {"seed": seed, "draws_per_sample": int(draws_per_sample),
                       "n_posterior": int(s.shape[0])})


def _posterior_draws(chain, burn_in):
    if isinstance(chain, McmcChain):
        return chain.post_burn_in(burn_in)
    return np.asarray(chain, dtype=float)[burn_in or 0:]


def conditional_quantile_distribution(chain, level: float = 0.999,
                                      panjer_config: Optional[PanjerConfig] = None,
                                      subsample: int = 10_000,
                                      burn_in: Optional[int] = None,
                                      max_fail_fraction: float = 0.05) -> QuantileSampleSet:
    """Distribution of the conditional quantile over posterior draws.

    ``subsample`` draws are taken evenly spaced from the post-burn-in chain
    and each gets a Panjer quantile.  Draws whose grid fails the mass check
    are dropped and counted; more than ``max_fail_fraction`` failures abort.
    """
    cfg = panjer_config or PanjerConfig()
    s = _posterior_draws(chain, burn_in)
    if subsample > s.shape[0] or subsample < 1:
        raise DomainError("subsample must be between 1 and the chain length")
    idx = np.linspace(0, s.shape[0] - 1, int(subsample)).round().astype(np.int64)
    draws = s[idx]
    cache = {}
    values, failed = [], 0
    for row in draws:
        key = tuple(row)
        if key not in cache:
            try:
                cache[key] = _quantile_for_draw(ModelParams.from_array(row), level, cfg)
            except GridTooSmallError:
                cache[key] = None
        q = cache[key]
        if q is None:
            failed += 1
        else:
            values.append(q)
    if failed > max_fail_fraction * len(draws):
        raise DomainError(f"{failed} of {len(draws)} draws failed the grid-mass check")
    return QuantileSampleSet(np.array(values), level, failed)
