"""Compiled inner loops: normal CDF/inverse, Gibbs sweeps, Panjer recursion."""

import math

import numpy as np
from numba import njit

_SQRT2 = math.sqrt(2.0)
_LN_RESCALE = 250.0 * math.log(10.0)

# Acklam's rational approximation to the normal quantile
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)


@njit(cache=True)
def ndtr(z):
    return 0.5 * math.erfc(-z / _SQRT2)


@njit(cache=True)
def ndtri(p):
    if p <= 0.0:
        return -np.inf
    if p >= 1.0:
        return np.inf
    plow = 0.02425
    if p < plow:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    elif p <= 1.0 - plow:
        q = p - 0.5
        r = q * q
        x = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
              / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    # one Halley step against erfc
    if p < 0.5:
        e = ndtr(x) - p
    else:
        e = -(ndtr(-x) - (1.0 - p))
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


@njit(cache=True)
def log_trunc_mass(mu, sigma, a, b):
    """log of the normal(mu, sigma) mass on (a, b)."""
    za = (a - mu) / sigma
    zb = (b - mu) / sigma
    if za > 0.0:
        m = ndtr(-za) - ndtr(-zb)
    else:
        m = ndtr(zb) - ndtr(za)
    return math.log(m)


@njit(cache=True)
def trunc_normal_draw(mu, sigma, a, b, u):
    """Inverse-CDF draw from normal(mu, sigma) restricted to (a, b)."""
    za = (a - mu) / sigma
    zb = (b - mu) / sigma
    if za > 0.0:
        # upper tail: sample the mirror image for precision
        pa = ndtr(-zb)
        pb = ndtr(-za)
        z = -ndtri(pb - u * (pb - pa))
    else:
        pa = ndtr(za)
        pb = ndtr(zb)
        z = ndtri(pa + u * (pb - pa))
    x = mu + sigma * z
    if not x > a:
        x = np.nextafter(a, b)
    if not x < b:
        x = np.nextafter(b, a)
    return x


@njit(cache=True)
def _sum_log1p(x, beta):
    s = 0.0
    for i in range(x.size):
        s += math.log1p(x[i] / beta)
    return s


@njit(cache=True)
def _exposure(dur, lev, alpha, beta):
    s = 0.0
    for i in range(dur.size):
        if lev[i] < np.inf:
            s += dur[i] * math.exp(-alpha * math.log1p(lev[i] / beta))
    return s


@njit(cache=True)
def pareto_loglik(J, s1, expo, lam, alpha, beta):
    return J * math.log(alpha / beta) - (1.0 + alpha) * s1 + J * math.log(lam) - lam * expo


@njit(cache=True)
def gibbs_sweeps(x, dur, lev, state, lo, hi, sig, u_prop, u_acc, out, accepted, forced):
    """Run ``u_prop.shape[0]`` sweeps lam -> alpha -> beta, writing states to ``out``.

    ``state`` is updated in place; ``accepted``/``forced`` accumulate counts.
    """
    J = x.size
    lam, alpha, beta = state[0], state[1], state[2]
    s1 = _sum_log1p(x, beta)
    expo = _exposure(dur, lev, alpha, beta)
    ll = pareto_loglik(J, s1, expo, lam, alpha, beta)
    for k in range(u_prop.shape[0]):
        for i in range(3):
            cur = lam if i == 0 else (alpha if i == 1 else beta)
            prop = trunc_normal_draw(cur, sig[i], lo[i], hi[i], u_prop[k, i])
            s1_new = s1
            expo_new = expo
            if i == 0:
                ll_new = pareto_loglik(J, s1, expo, prop, alpha, beta)
            elif i == 1:
                expo_new = _exposure(dur, lev, prop, beta)
                ll_new = pareto_loglik(J, s1, expo_new, lam, prop, beta)
            else:
                s1_new = _sum_log1p(x, prop)
                expo_new = _exposure(dur, lev, alpha, prop)
                ll_new = pareto_loglik(J, s1_new, expo_new, lam, alpha, prop)
            if not math.isfinite(ll_new):
                forced[i] += 1
                continue
            log_r = (ll_new - ll
                     + log_trunc_mass(cur, sig[i], lo[i], hi[i])
                     - log_trunc_mass(prop, sig[i], lo[i], hi[i]))
            if u_acc[k, i] < math.exp(min(log_r, 0.0)):
                accepted[i] += 1
                ll = ll_new
                s1 = s1_new
                expo = expo_new
                if i == 0:
                    lam = prop
                elif i == 1:
                    alpha = prop
                else:
                    beta = prop
        out[k, 0] = lam
        out[k, 1] = alpha
        out[k, 2] = beta
    state[0] = lam
    state[1] = alpha
    state[2] = beta


@njit(cache=True, fastmath=True)
def _panjer_scaled(f, lam):
    n = f.size
    p = np.zeros(n)
    jf = np.empty(n)
    for j in range(n):
        jf[j] = j * f[j]
    p[0] = 1.0
    log_scale = lam * (f[0] - 1.0)
    for k in range(1, n):
        s = 0.0
        for j in range(1, k + 1):
            s += jf[j] * p[k - j]
        p[k] = lam / k * s
        if p[k] > 1e250:
            for j in range(k + 1):
                p[j] *= 1e-250
            log_scale += _LN_RESCALE
    return p, log_scale


def panjer_poisson(f, lam):
    """Compound Poisson(lam) pmf for a severity pmf ``f`` on a lattice.

    Values at index ``k`` depend only on ``f[0..k]``, so the result is exact
    for every index kept even when ``f`` is a truncated severity pmf.
    """
    f = np.ascontiguousarray(f, dtype=np.float64)
    p, log_scale = _panjer_scaled(f, float(lam))
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = np.exp(np.log(p[pos]) + log_scale)
    return out
