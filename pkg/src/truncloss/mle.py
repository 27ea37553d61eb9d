"""Maximum-likelihood fitting: joint (lambda profiled out), marginal, mis-specified."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .likelihood import (
    loglik,
    loglik_from_stats,
    pareto_stats,
    score_event_times,
)
from .model import (
    AnnualCounts,
    DomainError,
    EventTimes,
    ModelParams,
    NoEventsError,
    ThresholdSchedule,
    severity_logsf,
)

__all__ = [
    "MleResult",
    "ObservedInformation",
    "profile_lambda",
    "default_init",
    "fit_joint",
    "fit_marginal",
    "fit_misspecified",
    "loglik_hessian",
    "observed_information",
]

MAX_ITER = 500
GRAD_TOL = 1e-6
REL_LL_TOL = 1e-10


@dataclass(frozen=True)
class ObservedInformation:
    hessian: np.ndarray
    covariance: Optional[np.ndarray]
    positive_definite: bool

    @property
    def std_errors(self) -> Optional[np.ndarray]:
        if self.covariance is None:
            return None
        return np.sqrt(np.diag(self.covariance))


@dataclass(frozen=True)
class MleResult:
    params_hat: ModelParams
    covariance: Optional[np.ndarray]
    mode: str
    converged: bool
    loglik_at_optimum: float
    n_iter: int = 0
    message: str = ""
    local_max_ok: bool = True
    degenerate: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def std_errors(self) -> Optional[np.ndarray]:
        if self.covariance is None:
            return None
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def to_dict(self) -> dict:
        se = self.std_errors
        return {
            "mode": self.mode,
            "estimates": self.params_hat.to_dict(),
            "std_errors": None if se is None else dict(zip(("lambda", "alpha", "beta"), se.tolist())),
            "covariance": None if self.covariance is None else self.covariance.tolist(),
            "converged": bool(self.converged),
            "loglik_at_optimum": self.loglik_at_optimum,
            "n_iter": self.n_iter,
            "message": self.message,
            "local_max_ok": bool(self.local_max_ok),
            "degenerate": bool(self.degenerate),
        }


def profile_lambda(alpha: float, beta: float, data) -> float:
    """Rate maximizing the likelihood for fixed severity parameters.

    Reported count divided by the survival-weighted exposure (years under
    each threshold level times the probability of exceeding it).
    """
    stats = pareto_stats(data)
    if stats.n_events == 0:
        raise NoEventsError("no reported events: the rate estimate is 0")
    expo = np.sum(stats.durations * np.exp(severity_logsf(stats.levels, alpha, beta)))
    return stats.n_events / float(expo)


def default_init(data) -> ModelParams:
    """Crude starting point from the reported sample.

    Shape from a Hill-type estimate on the top decile, scale from the median
    loss, rate from the naive count per year inflated by the survival at the
    starting severity.
    """
    x = np.sort(data.losses)
    if x.size == 0:
        raise NoEventsError("no reported events")
    beta0 = float(max(np.median(x), 1e-3))
    top = x[int(0.9 * x.size):]
    logs = np.log((top + beta0) / (top[0] + beta0))
    alpha0 = 1.0 / float(np.mean(logs[1:])) if top.size > 1 and np.mean(logs[1:]) > 0 else 1.0
    alpha0 = float(np.clip(alpha0, 0.2, 10.0))
    try:
        lam0 = profile_lambda(alpha0, beta0, data)
    except (FloatingPointError, ZeroDivisionError):
        lam0 = x.size / data.window.duration
    return ModelParams(lam0, alpha0, beta0)


def _is_degenerate(data) -> bool:
    x = data.losses
    return x.size < 2 or bool(np.all(x == x[0]))


def _threshold_levels(data) -> np.ndarray:
    if isinstance(data, AnnualCounts):
        return data.schedule.year_levels(data.window.n_years)[data.years - 1]
    return data.schedule.level_at(data.times, data.window)


def _maximize(neg_f, jac, z0, tol):
    history = []

    def track(intermediate_result):
        history.append(float(intermediate_result.fun))

    res = minimize(neg_f, z0, jac=jac, method="BFGS", callback=track,
                   options={"gtol": tol, "maxiter": MAX_ITER})
    z = res.x
    g = jac(z) if callable(jac) else res.jac
    grad_inf = float(np.max(np.abs(g)))
    stalled = len(history) >= 2 and abs(history[-1] - history[-2]) <= REL_LL_TOL * max(abs(history[-1]), 1.0)
    # BFGS often stops for precision loss right at the optimum; accept that
    # when the objective has stopped moving and the gradient is small
    converged = grad_inf < tol or (stalled and grad_inf < max(tol, 1e-5))
    return res, z, bool(converged)


def _local_max_check(params, data, n=20, scale=1e-3, seed=12345) -> bool:
    rng = np.random.default_rng(seed)
    base = loglik(params, data).value
    v = params.as_array()
    for _ in range(n):
        w = v * np.exp(scale * rng.standard_normal(3))
        if loglik(ModelParams.from_array(w), data).value > base + 1e-9 * max(1.0, abs(base)):
            return False
    return True


def _finish(params, data, mode, res, converged, degenerate, with_cov=True):
    ll = loglik(params, data).value
    cov = None
    if with_cov:
        info = observed_information(params, data)
        cov = info.covariance
    return MleResult(
        params_hat=params,
        covariance=cov,
        mode=mode,
        converged=converged,
        loglik_at_optimum=ll,
        n_iter=int(res.nit),
        message=str(res.message),
        local_max_ok=_local_max_check(params, data) if mode != "marginal" else True,
        degenerate=degenerate,
    )


def fit_joint(data, init: Optional[ModelParams] = None, tol: float = GRAD_TOL,
              *, covariance: bool = True) -> MleResult:
    """Joint MLE of (lambda, alpha, beta) maximizing over the severity only.

    The rate is profiled out in closed form; BFGS runs over
    ``(log alpha, log beta)``.
    """
    if data.n_events == 0:
        raise NoEventsError("no reported events")
    init = init or default_init(data)
    event_form = isinstance(data, EventTimes)
    stats = pareto_stats(data)

    def neg_profile(z):
        a, b = math.exp(z[0]), math.exp(z[1])
        lam = profile_lambda(a, b, data)
        if event_form:
            return -loglik_from_stats(stats, lam, a, b)
        return -loglik(ModelParams(lam, a, b), data).value

    def neg_grad(z):
        a, b = math.exp(z[0]), math.exp(z[1])
        lam = profile_lambda(a, b, data)
        # d/dlam vanishes at the profiled rate, so only the severity partials remain
        g = score_event_times(ModelParams(lam, a, b), data)
        return -np.array([g[1] * a, g[2] * b])

    z0 = np.log([init.alpha, init.beta])
    res, z, converged = _maximize(neg_profile, neg_grad if event_form else "3-point", z0, tol)
    a, b = float(np.exp(z[0])), float(np.exp(z[1]))
    params = ModelParams(profile_lambda(a, b, data), a, b)
    return _finish(params, data, "joint", res, converged, _is_degenerate(data), covariance)


def fit_marginal(data, init: Optional[ModelParams] = None, tol: float = GRAD_TOL,
                 *, covariance: bool = True) -> MleResult:
    """Severity fitted from the truncated losses alone, then the rate profiled."""
    if data.n_events == 0:
        raise NoEventsError("no reported events")
    init = init or default_init(data)
    x = data.losses
    L = _threshold_levels(data)

    def neg_ll(z):
        a, b = math.exp(z[0]), math.exp(z[1])
        return -float(np.sum(math.log(a / b) - (a + 1) * np.log1p(x / b) + a * np.log1p(L / b)))

    def neg_grad(z):
        a, b = math.exp(z[0]), math.exp(z[1])
        ga = np.sum(1.0 / a - np.log1p(x / b) + np.log1p(L / b))
        gb = np.sum(-1.0 / b + (a + 1) * x / (b * (b + x)) - a * L / (b * (b + L)))
        return -np.array([ga * a, gb * b])

    z0 = np.log([init.alpha, init.beta])
    res, z, converged = _maximize(neg_ll, neg_grad, z0, tol)
    a, b = float(np.exp(z[0])), float(np.exp(z[1]))
    params = ModelParams(profile_lambda(a, b, data), a, b)
    return _finish(params, data, "marginal", res, converged, _is_degenerate(data), covariance)


def _with_schedule(data, schedule):
    if isinstance(data, AnnualCounts):
        return AnnualCounts(data.counts, data.losses, data.years, data.window, schedule)
    return data.with_schedule(schedule)


def fit_misspecified(data, L0: float, init: Optional[ModelParams] = None,
                     tol: float = GRAD_TOL, *, covariance: bool = True) -> MleResult:
    """Joint MLE under the (wrong) assumption of a constant threshold ``L0``."""
    wrong = _with_schedule(data, ThresholdSchedule.constant(L0))
    r = fit_joint(wrong, init, tol, covariance=covariance)
    return MleResult(
        params_hat=r.params_hat,
        covariance=r.covariance,
        mode="misspecified",
        converged=r.converged,
        loglik_at_optimum=r.loglik_at_optimum,
        n_iter=r.n_iter,
        message=r.message,
        local_max_ok=r.local_max_ok,
        degenerate=r.degenerate,
        extra={"assumed_threshold": float(L0)},
    )


def loglik_hessian(params: ModelParams, data, loglik_fn=None) -> np.ndarray:
    """Central finite-difference Hessian in (lambda, alpha, beta).

    Step ``h_i = 1e-4 * max(|gamma_i|, 1)``.
    """
    if loglik_fn is None:
        def loglik_fn(v):
            return loglik(ModelParams.from_array(v), data).value
    v = params.as_array()
    h = 1e-4 * np.maximum(np.abs(v), 1.0)
    # keep every probe point positive
    h = np.minimum(h, 0.5 * v)
    n = v.size
    H = np.empty((n, n))
    f0 = loglik_fn(v)
    for i in range(n):
        e_i = np.zeros(n)
        e_i[i] = h[i]
        H[i, i] = (loglik_fn(v + e_i) - 2.0 * f0 + loglik_fn(v - e_i)) / h[i] ** 2
        for j in range(i + 1, n):
            e_j = np.zeros(n)
            e_j[j] = h[j]
            H[i, j] = (
                loglik_fn(v + e_i + e_j) - loglik_fn(v + e_i - e_j)
                - loglik_fn(v - e_i + e_j) + loglik_fn(v - e_i - e_j)
            ) / (4.0 * h[i] * h[j])
            H[j, i] = H[i, j]
    return H


def observed_information(params_hat: ModelParams, data, loglik_fn=None) -> ObservedInformation:
    """Covariance estimate as the inverse of the negative log-likelihood Hessian.

    The covariance is withheld (``None``) when the information matrix is not
    positive definite.
    """
    H = loglik_hessian(params_hat, data, loglik_fn)
    info = -H
    try:
        np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        return ObservedInformation(H, None, False)
    cov = np.linalg.inv(info)
    cov = 0.5 * (cov + cov.T)
    return ObservedInformation(H, cov, True)
