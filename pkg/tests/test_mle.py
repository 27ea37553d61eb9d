import numpy as np
import pytest
from scipy import stats

from truncloss.likelihood import loglik, score_event_times
from truncloss.mle import (
    fit_joint,
    fit_marginal,
    fit_misspecified,
    loglik_hessian,
    observed_information,
    profile_lambda,
)
from truncloss.model import (
    AnnualCounts,
    EventTimes,
    ModelParams,
    NoEventsError,
    ObservationWindow,
    ThresholdSchedule,
)
from truncloss.simulate import SimConfig, simulate_dataset, to_annual_counts

TRUTH = np.array([50.0, 2.0, 3.0])


@pytest.fixture(scope="module")
def data5():
    return simulate_dataset(SimConfig(seed=2024))


def _events(n, years, L):
    w = ObservationWindow(0, years)
    t = np.linspace(0, years, n + 2)[1:-1]
    return EventTimes(t, np.full(n, L + 1.0), w, ThresholdSchedule.constant(L))


def test_profile_lambda_untruncated():
    assert profile_lambda(2.0, 3.0, _events(100, 5, 0.0)) == pytest.approx(20.0)


def test_profile_lambda_annual_counts():
    w = ObservationWindow(0, 2)
    d = AnnualCounts([10, 10], np.full(20, 5.0), np.repeat([1, 2], 10), w, ThresholdSchedule.constant(2.0))
    assert profile_lambda(2.0, 3.0, d) == pytest.approx(20 / 0.72)
    assert profile_lambda(2.0, 3.0, d) == pytest.approx(27.778, abs=1e-3)


def test_profile_lambda_homogeneous():
    # doubling the exposure (equivalently every survival weight) halves the rate
    a = profile_lambda(2.0, 3.0, _events(50, 5, 2.0))
    b = profile_lambda(2.0, 3.0, _events(50, 10, 2.0))
    assert b == pytest.approx(a / 2)


def test_profile_lambda_no_events():
    with pytest.raises(NoEventsError):
        profile_lambda(2.0, 3.0, _events(0, 5, 2.0))


def test_profile_lambda_maximizes_over_rate(data5):
    a, b = 2.3, 3.4
    lam = profile_lambda(a, b, data5)
    best = loglik(ModelParams(lam, a, b), data5).value
    for f in (0.5, 0.9, 0.99, 1.01, 1.1, 2.0):
        assert loglik(ModelParams(lam * f, a, b), data5).value <= best


def test_joint_fit_near_truth(data5):
    r = fit_joint(data5)
    assert r.converged and r.local_max_ok
    est, se = r.params_hat.as_array(), r.std_errors
    assert np.all(np.abs(est - TRUTH) < 2 * se)


def test_score_vanishes_at_optimum(data5):
    r = fit_joint(data5)
    g = score_event_times(r.params_hat, data5)
    assert np.all(np.abs(g * r.params_hat.as_array()) < 1e-4)


def test_zero_threshold_matches_lomax_fit():
    d = simulate_dataset(SimConfig(schedule=ThresholdSchedule.constant(0.0), years=20, seed=7))
    r = fit_joint(d)
    c, _, scale = stats.lomax.fit(d.losses, floc=0)
    assert r.params_hat.alpha == pytest.approx(c, rel=1e-3)
    assert r.params_hat.beta == pytest.approx(scale, rel=1e-3)
    assert r.params_hat.lam == pytest.approx(d.n_events / 20, rel=1e-12)


def test_marginal_equals_joint_at_zero_threshold():
    d = simulate_dataset(SimConfig(schedule=ThresholdSchedule.constant(0.0), seed=8))
    j, m = fit_joint(d), fit_marginal(d)
    np.testing.assert_allclose(m.params_hat.as_array(), j.params_hat.as_array(), rtol=1e-5)


def test_misspecified_equals_joint_when_threshold_is_constant():
    d = simulate_dataset(SimConfig(schedule=ThresholdSchedule.constant(2.0), seed=8))
    j, m = fit_joint(d), fit_misspecified(d, 2.0)
    np.testing.assert_allclose(m.params_hat.as_array(), j.params_hat.as_array(), rtol=1e-10)
    assert m.mode == "misspecified" and m.extra["assumed_threshold"] == 2.0


def test_misspecified_alpha_above_joint(data5):
    assert fit_misspecified(data5, 2.0).params_hat.alpha > fit_joint(data5).params_hat.alpha


def test_rate_variance_untruncated():
    d = simulate_dataset(SimConfig(schedule=ThresholdSchedule.constant(0.0), years=10, seed=5))
    r = fit_joint(d)
    assert r.covariance[0, 0] == pytest.approx(r.params_hat.lam / 10, rel=1e-3)


def test_hessian_symmetric(data5):
    H = loglik_hessian(fit_joint(data5).params_hat, data5)
    assert np.all(np.abs(H - H.T) <= 1e-6 * np.abs(H))
    info = observed_information(fit_joint(data5).params_hat, data5)
    assert info.positive_definite


def test_annual_count_fit(data5):
    a = fit_joint(to_annual_counts(data5))
    assert a.converged
    np.testing.assert_allclose(a.params_hat.as_array(), fit_joint(data5).params_hat.as_array(), rtol=1e-4)


def test_empty_data_raises():
    with pytest.raises(NoEventsError):
        fit_joint(_events(0, 5, 2.0))


def test_result_serializes(data5):
    d = fit_joint(data5).to_dict()
    assert set(d["estimates"]) == {"lambda", "alpha", "beta"}
    assert d["converged"] is True
