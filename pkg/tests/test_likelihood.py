import math

import numpy as np
import pytest

from truncloss.likelihood import (
    between_events_exposure,
    central_gradient,
    loglik,
    loglik_annual_counts,
    loglik_constant_threshold,
    loglik_event_times,
    score_event_times,
)
from truncloss.mle import fit_joint
from truncloss.model import (
    AnnualCounts,
    DomainError,
    EventTimes,
    IntensityFunction,
    ModelParams,
    ObservationWindow,
    ThresholdSchedule,
)
from truncloss.simulate import SimConfig, replicate_seeds, simulate_dataset, to_annual_counts

EXP = ThresholdSchedule.exponential(2.0, 0.03)


def _random_case(rng, schedule):
    p = ModelParams(rng.uniform(5, 200), rng.uniform(0.5, 5), rng.uniform(0.3, 7))
    years = int(rng.integers(1, 8))
    d = simulate_dataset(SimConfig(true_params=p, schedule=schedule, years=years,
                                   seed=int(rng.integers(2**32))))
    q = ModelParams(rng.uniform(5, 200), rng.uniform(0.5, 5), rng.uniform(0.3, 7))
    return q, d


def test_no_events_is_survival_term_only():
    w = ObservationWindow(0, 3)
    d = EventTimes([], [], w, ThresholdSchedule.constant(2.0))
    p = ModelParams(50, 2, 3)
    expect = -50 * (1 + 2 / 3) ** -2 * 3
    assert loglik_event_times(p, d).value == pytest.approx(expect, rel=1e-15)


def test_constant_schedule_matches_direct_form():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        L = rng.uniform(0, 10)
        q, d = _random_case(rng, ThresholdSchedule.constant(L))
        a = loglik_event_times(q, d).value
        b = loglik_constant_threshold(q, d)
        worst = max(worst, abs(a - b) / abs(b))
    assert worst < 1e-10


def test_two_event_hand_evaluation():
    w = ObservationWindow(0, 2)
    d = EventTimes([0.5, 1.5], [3.0, 4.0], w, EXP)
    lam, a, b = 50.0, 2.0, 3.0
    L1, L2 = 2 * math.exp(0.03), 2 * math.exp(0.06)
    # product of the two Pareto densities and Poisson arrival terms, written out
    expect = (
        math.log(a / b) - (1 + a) * math.log(1 + 3 / b)
        + math.log(a / b) - (1 + a) * math.log(1 + 4 / b)
        + 2 * math.log(lam)
        - lam * (1 + L1 / b) ** -a - lam * (1 + L2 / b) ** -a
    )
    assert loglik_event_times(ModelParams(lam, a, b), d).value == pytest.approx(expect, rel=1e-14)


def test_annual_counts_zero_counts():
    w = ObservationWindow(0, 3)
    d = AnnualCounts([0, 0, 0], [], [], w, EXP)
    p = ModelParams(50, 2, 3)
    theta = [50 * (1 + L / 3) ** -2 for L in EXP.year_levels(3)]
    assert loglik_annual_counts(p, d).value == pytest.approx(-sum(theta), rel=1e-14)


def test_annual_counts_rate_score_vanishes_at_profile():
    w = ObservationWindow(0, 2)
    x = np.full(20, 5.0)
    d = AnnualCounts([10, 10], x, np.repeat([1, 2], 10), w, ThresholdSchedule.constant(2.0))
    lam = 20 / 0.72
    g = loglik_annual_counts(ModelParams(lam, 2, 3), d, gradient=True).gradient
    assert abs(g[0]) < 1e-6
    assert abs(score_event_times(ModelParams(lam, 2, 3), d)[0]) < 1e-12


def test_single_year_zero_threshold_is_untruncated():
    w = ObservationWindow(0, 1)
    x = np.array([0.7, 2.0, 9.1])
    d = AnnualCounts([3], x, [1, 1, 1], w, ThresholdSchedule.constant(0.0))
    lam, a, b = 7.0, 1.8, 2.2
    expect = sum(math.log(a / b) - (a + 1) * math.log1p(v / b) for v in x)
    expect += 3 * math.log(lam) - lam - math.log(6)
    assert loglik_annual_counts(ModelParams(lam, a, b), d).value == pytest.approx(expect, rel=1e-13)


def test_event_and_annual_forms_differ_by_constant():
    d = simulate_dataset(SimConfig(seed=3))
    a = to_annual_counts(d)
    p1, p2 = ModelParams(40, 2.5, 3.5), ModelParams(61, 1.7, 2.1)
    gap1 = loglik(p1, d).value - loglik(p1, a).value
    gap2 = loglik(p2, d).value - loglik(p2, a).value
    assert gap1 == pytest.approx(gap2, rel=1e-11)


def test_event_and_annual_forms_share_maximizer():
    d = simulate_dataset(SimConfig(seed=3))
    e = fit_joint(d).params_hat.as_array()
    a = fit_joint(to_annual_counts(d)).params_hat.as_array()
    np.testing.assert_allclose(a, e, rtol=1e-4)


def test_score_matches_finite_differences():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        q, d = _random_case(rng, EXP)
        g = score_event_times(q, d)
        fd = central_gradient(lambda v: loglik_event_times(ModelParams.from_array(v), d).value,
                              q.as_array(), rel_step=1e-5)
        worst = max(worst, float(np.max(np.abs(g - fd) / np.maximum(np.abs(g), 1.0))))
    assert worst < 1e-6


def test_zero_threshold_alpha_score():
    d = simulate_dataset(SimConfig(schedule=ThresholdSchedule.constant(0.0), seed=4))
    p = ModelParams(50, 2.2, 2.9)
    expect = d.n_events / p.alpha - np.sum(np.log1p(d.losses / p.beta))
    assert score_event_times(p, d)[1] == pytest.approx(expect, rel=1e-12)


def test_loglik_finite_in_open_orthant():
    d = simulate_dataset(SimConfig(seed=6))
    for v in [(1e-3, 1e-3, 1e-3), (1e4, 30.0, 1e4), (0.5, 0.05, 50.0)]:
        assert np.isfinite(loglik_event_times(ModelParams(*v), d).value)


def test_between_events_mode():
    d = simulate_dataset(SimConfig(seed=6))
    dur, lev = between_events_exposure(d)
    assert dur.sum() == pytest.approx(d.window.duration)
    p = ModelParams(50, 2, 3)
    exact = loglik_event_times(p, d).value
    approx = loglik_event_times(p, d, exposure="between_events").value
    assert approx == pytest.approx(exact, rel=0.01)
    with pytest.raises(DomainError):
        loglik_event_times(p, d, exposure="other")


def test_piecewise_intensity_reduces_to_constant():
    d = simulate_dataset(SimConfig(seed=6))
    p = ModelParams(50, 2, 3)
    flat = IntensityFunction.piecewise([1.3, 2.9], [50.0, 50.0, 50.0])
    v = loglik_event_times(p, d, flat, gradient=True)
    assert v.value == pytest.approx(loglik_event_times(p, d).value, rel=1e-13)
    assert np.isnan(v.gradient[0])
    np.testing.assert_allclose(v.gradient[1:], score_event_times(p, d)[1:], rtol=1e-6)


def test_replicates_do_not_share_values():
    vals = {loglik(ModelParams(50, 2, 3), simulate_dataset(SimConfig(seed=s))).value
            for s in replicate_seeds(0, 4)}
    assert len(vals) == 4
