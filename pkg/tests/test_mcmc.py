import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from truncloss import _kernels
from truncloss.likelihood import loglik_event_times
from truncloss.mcmc import (
    McmcConfig,
    acceptance_probability,
    chain_summary,
    laplace_approximation,
    log_proposal_density,
    propose_truncated_normal,
    run_chain,
    tune_sigmas,
)
from truncloss.mle import fit_joint, observed_information
from truncloss.model import DomainError, EventTimes, ModelParams, ObservationWindow, ThresholdSchedule
from truncloss.simulate import SimConfig, replicate_seeds, simulate_dataset


@pytest.fixture(scope="module")
def data5():
    return simulate_dataset(SimConfig(seed=2024))


def _ll(data):
    return lambda v: loglik_event_times(ModelParams.from_array(v), data).value


def test_ndtri_matches_scipy():
    p = np.concatenate([np.logspace(-300, -1, 400), np.linspace(0.01, 0.99, 200), 1 - np.logspace(-16, -1, 100)])
    got = np.array([_kernels.ndtri(v) for v in p])
    np.testing.assert_allclose(got, stats.norm.ppf(p), rtol=1e-12, atol=1e-13)
    z = np.linspace(-37, 8, 500)
    np.testing.assert_allclose([_kernels.ndtr(v) for v in z], stats.norm.cdf(z), rtol=1e-12, atol=1e-300)


def test_log_trunc_mass_matches_scipy():
    for mu, s, a, b in [(0, 1, -1, 2), (5, 0.2, 0.1, 6), (0.11, 5, 0.1, 500), (499, 5, 0.1, 500), (0, 1, 30, 40)]:
        # upper-tail form keeps precision when the interval sits far above mu
        if a > mu:
            want = math.log(stats.norm.sf(a, mu, s) - stats.norm.sf(b, mu, s))
        else:
            want = math.log(stats.norm.cdf(b, mu, s) - stats.norm.cdf(a, mu, s))
        assert _kernels.log_trunc_mass(mu, s, a, b) == pytest.approx(want, rel=1e-10)


def test_truncated_normal_draws_follow_scipy():
    rng = np.random.default_rng(0)
    for mu, s, a, b in [(0.15, 0.2, 0.1, 6.0), (5.9, 0.3, 0.1, 8.0), (50, 5, 0.1, 500)]:
        x = np.array([propose_truncated_normal(mu, s, a, b, rng) for _ in range(20_000)])
        assert np.all((x > a) & (x < b))
        ref = stats.truncnorm((a - mu) / s, (b - mu) / s, loc=mu, scale=s)
        assert stats.kstest(x, ref.cdf).pvalue > 0.001


def test_wide_bounds_mean():
    rng = np.random.default_rng(1)
    mu, s = 3.0, 0.5
    x = np.array([propose_truncated_normal(mu, s, mu - 100 * s, mu + 100 * s, rng) for _ in range(100_000)])
    assert abs(x.mean() - mu) < 3 * s / math.sqrt(x.size)


def test_proposal_bad_args():
    with pytest.raises(DomainError):
        propose_truncated_normal(1.0, 0.0, 0.0, 2.0, np.random.default_rng())


def test_acceptance_identity_and_symmetric_limit(data5):
    cfg = McmcConfig(iterations=10, burn_in=0)
    g = np.array([50.0, 2.0, 3.0])
    assert acceptance_probability(g, g, 1, cfg, _ll(data5)) == 1.0
    wide = McmcConfig(bounds=((-1e6, 1e6), (-1e6, 1e6), (-1e6, 1e6)), iterations=10, burn_in=0)
    gs = np.array([50.0, 2.1, 3.0])
    ll = _ll(data5)
    expect = min(1.0, math.exp(ll(gs) - ll(g)))
    assert acceptance_probability(gs, g, 1, wide, ll) == pytest.approx(expect, rel=1e-10)


def test_acceptance_kernel_correction_near_bound(data5):
    cfg = McmcConfig(iterations=10, burn_in=0)
    g, gs = np.array([50.0, 0.12, 3.0]), np.array([50.0, 0.3, 3.0])
    ll = _ll(data5)
    a, b = cfg.bounds[1]
    s = cfg.sigmas[1]
    z_cur = stats.norm.cdf(b, g[1], s) - stats.norm.cdf(a, g[1], s)
    z_star = stats.norm.cdf(b, gs[1], s) - stats.norm.cdf(a, gs[1], s)
    assert z_cur != pytest.approx(z_star)
    log_r = ll(gs) - ll(g) + math.log(z_cur) - math.log(z_star)
    assert acceptance_probability(gs, g, 1, cfg, ll) == pytest.approx(math.exp(min(log_r, 0)), rel=1e-12)
    x = 1.3
    assert log_proposal_density(x, 1.0, 0.2, a, b) == pytest.approx(
        stats.truncnorm.logpdf(x, (a - 1.0) / 0.2, (b - 1.0) / 0.2, loc=1.0, scale=0.2), rel=1e-12)


def test_chain_deterministic_and_prefix(data5):
    cfg = McmcConfig(iterations=3000, seed=4)
    a, b = run_chain(data5, cfg), run_chain(data5, cfg)
    assert a.samples.tobytes() == b.samples.tobytes()
    longer = run_chain(data5, replace(cfg, iterations=7000))
    np.testing.assert_array_equal(longer.samples[:3000], a.samples)


def test_compiled_matches_python_engine(data5):
    cfg = McmcConfig(iterations=1500, seed=9)
    c = run_chain(data5, cfg)
    p = run_chain(data5, cfg, engine="python")
    np.testing.assert_allclose(c.samples, p.samples, rtol=1e-12)
    np.testing.assert_array_equal(c.accepted, p.accepted)


def test_samples_inside_box_and_rates(data5):
    cfg = McmcConfig(iterations=20_000, seed=1)
    ch = run_chain(data5, cfg)
    s = ch.post_burn_in()
    assert np.all((s > cfg.lower) & (s < cfg.upper))
    np.testing.assert_array_equal(ch.acceptance_rates, ch.accepted / ch.attempted)
    assert np.all(ch.attempted == cfg.iterations - 1)


def test_tiny_sigma_warns(data5):
    cfg = McmcConfig(sigmas=(1e-12, 1e-12, 1e-12), iterations=2000, seed=1)
    with pytest.warns(RuntimeWarning, match="barely moves"):
        ch = run_chain(data5, cfg)
    assert np.all(ch.acceptance_rates > 0.95)


def test_init_outside_box_rejected(data5):
    with pytest.raises(DomainError):
        run_chain(data5, McmcConfig(iterations=10, burn_in=0), ModelParams(600, 2, 3))


def test_chain_summary_constant_chain():
    s = chain_summary(np.tile([50.0, 2.0, 3.0], (5000, 1)))
    np.testing.assert_array_equal(s.std, 0.0)
    np.testing.assert_array_equal(s.nse, 0.0)


def test_chain_summary_iid_nse():
    x = np.random.default_rng(0).normal(size=(100_000, 3))
    s = chain_summary(x)
    np.testing.assert_allclose(s.nse, 1 / math.sqrt(x.shape[0]), rtol=0.2)


def test_posterior_agrees_with_mle(data5):
    ch = run_chain(data5, McmcConfig(iterations=100_000, seed=3))
    s = chain_summary(ch)
    mle = fit_joint(data5).params_hat.as_array()
    assert np.all(np.abs(s.mean - mle) < 2 * s.std)


def test_wider_bounds_do_not_move_posterior(data5):
    # Known to fail on 5-year data: flat priors leave a likelihood ridge
    # towards large (alpha, beta), so the box edge carries posterior mass.
    base = McmcConfig(iterations=200_000, seed=5)
    wide = replace(base, bounds=tuple((lo, 2 * hi) for lo, hi in base.bounds))
    s1 = chain_summary(run_chain(data5, base))
    s2 = chain_summary(run_chain(data5, wide))
    assert np.all(np.abs(s1.mean - s2.mean) < np.hypot(s1.nse, s2.nse))


def test_tuning_from_huge_sigmas(data5):
    width = McmcConfig().upper - McmcConfig().lower
    cfg = McmcConfig(sigmas=tuple(1e3 * width), iterations=10, burn_in=0, seed=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        before = run_chain(data5, replace(cfg, iterations=2000)).acceptance_rates
    assert np.all(before < 0.15)
    t = tune_sigmas(data5, cfg)
    assert t.in_band
    assert np.all((t.acceptance_rates >= 0.15) & (t.acceptance_rates <= 0.35))


def test_tuning_flat_posterior_reports_noninformative():
    empty = EventTimes([], [], ObservationWindow(0, 5), ThresholdSchedule.constant(1e300))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        t = tune_sigmas(empty, McmcConfig(iterations=10, burn_in=0, seed=1), max_rounds=10)
    assert not t.in_band
    assert not np.any(t.informative)
    assert np.all(t.acceptance_rates > 0.9)


def test_laplace_matches_observed_information(data5):
    mode = fit_joint(data5).params_hat
    mean, cov = laplace_approximation(data5, mode)
    info = observed_information(mode, data5)
    np.testing.assert_allclose(cov, info.covariance, rtol=1e-8)
    np.testing.assert_array_equal(mean, mode.as_array())


def test_laplace_gap_shrinks_with_more_data():
    gaps = []
    for years in (5, 20):
        d = simulate_dataset(SimConfig(years=years, seed=77))
        mode = fit_joint(d).params_hat
        _, cov = laplace_approximation(d, mode)
        s = chain_summary(run_chain(d, McmcConfig(iterations=100_000, seed=1)))
        gaps.append(np.max(np.abs(np.sqrt(np.diag(cov)) - s.std) / s.std))
    assert gaps[1] < gaps[0]


def test_posterior_spread_shrinks_with_years():
    # averaged over replicate datasets; one dataset per length is too noisy
    seeds = replicate_seeds(31, 5)
    sds = []
    for years in (1, 5, 10, 20):
        per = [chain_summary(run_chain(simulate_dataset(SimConfig(years=years, seed=s)),
                                       McmcConfig(iterations=50_000, seed=2))).std for s in seeds]
        sds.append(np.mean(per, axis=0))
    assert np.all(np.diff(np.array(sds), axis=0) < 0)
