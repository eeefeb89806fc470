import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twinbeam import (
    ConditionalMixture,
    ConditionalState,
    ConditioningError,
    ExperimentParams,
    ParameterError,
    SelectionRule,
    build_conditional,
    cond_count_dist,
    conditional_mean,
    joint_prob,
    marginal,
    marginal_dist,
    povm_count_dist,
    weight,
)

from conftest import geometric_cutoff, photon_conditional_oracle

params_st = st.builds(
    ExperimentParams,
    mu=st.floats(1.0, 250.0),
    eta=st.floats(0.02, 0.95),
    mean_counts=st.floats(0.01, 30.0),
)


# --- selection rules ---------------------------------------------------------


def test_rule_semantics_are_strict():
    above = SelectionRule.above(11)
    assert not above.contains(11)
    assert above.contains(12)
    below = SelectionRule.below(8)
    assert below.contains(7)
    assert not below.contains(8)


def test_rule_validation():
    with pytest.raises(ParameterError):
        SelectionRule.from_set([])
    with pytest.raises(ParameterError):
        SelectionRule.from_set([3, 1, 2])
    with pytest.raises(ParameterError):
        SelectionRule.from_set([1, 1, 2])
    with pytest.raises(ParameterError):
        SelectionRule.below(0)
    with pytest.raises(ParameterError):
        SelectionRule.exact(-1)
    # accept-everything lower bound is representable
    assert SelectionRule.above(-1).contains(0)


# --- weights -----------------------------------------------------------------


def test_weight_heaviside_support(params_a):
    for gamma in range(0, 10):
        assert weight(params_a, 10, gamma) == 0.0
    assert weight(params_a, 10, 10) > 0.0


def test_weight_normalisation(params_a):
    state = build_conditional(params_a, SelectionRule.exact(10), tol=1e-12)
    assert state.norm() == pytest.approx(1.0, abs=1e-8)


def test_weight_positivity_identity():
    # M_t - t*eta = M(1-eta)(t+mu)/(M+mu) stays positive for every t
    for params in (
        ExperimentParams(1.0, 0.9, 0.3),
        ExperimentParams(42.0, 0.5, 12.0),
        ExperimentParams(197.0, 0.06, 13.4),
    ):
        mu, eta, m = params.mu, params.eta, params.mean_counts
        for t in range(0, 60, 7):
            direct = conditional_mean(params, t) - t * eta
            stable = m * (1.0 - eta) * (t + mu) / (m + mu)
            assert direct == pytest.approx(stable, rel=1e-9)
            assert stable > 0.0


def test_weight_matches_photon_conditional_oracle():
    mu, eta, m, t = 2, 0.5, 1.0, 1
    params = ExperimentParams(float(mu), eta, m)
    cutoff = geometric_cutoff(mu, params.mean_photons)
    oracle = photon_conditional_oracle(mu, eta, m, t, cutoff)
    for gamma in range(min(len(oracle), 40)):
        level = math.comb(gamma + mu - 1, gamma) * weight(params, t, gamma)
        assert level == pytest.approx(oracle[gamma], abs=1e-10)


def test_weight_vacuum_and_errors():
    vac = ExperimentParams(1.0, 0.5, 0.0)
    assert weight(vac, 0, 0) == 1.0
    assert weight(vac, 0, 3) == 0.0
    with pytest.raises(ConditioningError):
        weight(vac, 2, 2)
    # conditioning on an absurdly large count underflows the marginal
    with pytest.raises(ConditioningError):
        weight(ExperimentParams(1.0, 0.5, 0.01), 2000, 2000)


# --- conditional mean ----------------------------------------------------------


def test_conditional_mean_fixed_point(params_a):
    m = params_a.mean_counts
    assert conditional_mean(params_a, m) == pytest.approx(m, rel=1e-14)


def test_conditional_mean_at_zero(params_a):
    mu, eta, m = params_a.mu, params_a.eta, params_a.mean_counts
    expected = mu * m * (1.0 - eta) / (m + mu)
    assert conditional_mean(params_a, 0) == pytest.approx(expected, rel=1e-14)


def test_conditional_mean_affine_slope(params_a):
    mu, eta, m = params_a.mu, params_a.eta, params_a.mean_counts
    slope = (m + eta * mu) / (m + mu)
    assert slope == pytest.approx(0.12, abs=1e-3)
    diffs = [
        conditional_mean(params_a, t + 1) - conditional_mean(params_a, t)
        for t in range(25)
    ]
    assert np.ptp(diffs) < 1e-12
    assert diffs[0] == pytest.approx(slope, rel=1e-12)


@given(params=params_st, t=st.integers(0, 80))
@settings(max_examples=100)
def test_conditional_mean_strictly_increasing_and_ordered(params, t):
    m = params.mean_counts
    m_t = conditional_mean(params, t)
    assert conditional_mean(params, t + 1) > m_t
    if t > m:
        assert m_t > m
    elif t < m:
        assert m_t < m


# --- state construction ---------------------------------------------------------


def test_state_photon_mean(params_a):
    state = build_conditional(params_a, SelectionRule.exact(15), tol=1e-12)
    assert state.mean_photons() == pytest.approx(state.M_t / params_a.eta, abs=1e-8)


def test_state_support_starts_at_trigger(params_a):
    state = build_conditional(params_a, SelectionRule.exact(7), tol=1e-12)
    assert state.gamma_min == 7
    assert state.gammas[0] == 7


def test_small_instance_states_match_oracle():
    for mu, eta, m, t in [(1, 0.5, 1.0, 0), (2, 0.5, 1.0, 1), (3, 0.3, 0.8, 2)]:
        params = ExperimentParams(float(mu), eta, m)
        state = build_conditional(params, SelectionRule.exact(t), tol=1e-14)
        cutoff = geometric_cutoff(mu, params.mean_photons)
        oracle = photon_conditional_oracle(mu, eta, m, t, cutoff)
        level = state.level_probs()
        for gamma in range(min(len(oracle), int(state.gammas[-1]) + 1)):
            ours = level[gamma - t] if gamma >= t else 0.0
            assert ours == pytest.approx(oracle[gamma], abs=1e-10)


def test_vacuum_state():
    state = build_conditional(ExperimentParams(1.0, 0.5, 0.0), SelectionRule.exact(0))
    assert state.M_t == 0.0
    assert state.norm() == 1.0
    with pytest.raises(ConditioningError):
        build_conditional(ExperimentParams(1.0, 0.5, 0.0), SelectionRule.exact(1))


# --- count distributions ----------------------------------------------------------


def test_bayes_column_route(params_a):
    dist = cond_count_dist(params_a, SelectionRule.exact(0), tol=1e-12)
    p2 = marginal(params_a, 0)
    for s in range(0, 30, 5):
        assert dist.probs[s] == pytest.approx(
            joint_prob(params_a, s, 0) / p2, rel=1e-10, abs=1e-14
        )


def test_conditional_on_zero_monotone_decreasing():
    params = ExperimentParams(1.0, 0.9, 1.0)
    dist = cond_count_dist(params, SelectionRule.exact(0))
    probs = dist.probs[dist.probs > 1e-300]
    assert np.all(np.diff(probs) < 0.0)


def test_dual_route_agreement(params_a):
    for t in (0, 5, 15, 30):
        bayes = cond_count_dist(params_a, SelectionRule.exact(t), tol=1e-12)
        state = build_conditional(params_a, SelectionRule.exact(t), tol=1e-12)
        other = povm_count_dist(state, s_max=len(bayes) - 1, tol=1e-12)
        assert np.abs(bayes.probs - other.probs).max() <= 1e-8


def test_verify_flag_runs_clean(params_b):
    dist = cond_count_dist(params_b, SelectionRule.exact(19), tol=1e-12, verify=True)
    assert dist.mean == pytest.approx(conditional_mean(params_b, 19), abs=1e-8)


def test_conditional_moment_matches_closed_form(params_a):
    dist = cond_count_dist(params_a, SelectionRule.exact(15), tol=1e-12)
    assert dist.mean == pytest.approx(conditional_mean(params_a, 15), abs=1e-8)


def test_impossible_trigger_raises():
    with pytest.raises(ConditioningError):
        cond_count_dist(ExperimentParams(1.0, 0.5, 0.01), SelectionRule.exact(2000))


# --- mixtures ----------------------------------------------------------------------


def test_full_set_mixture_recovers_unconditioned(params_a):
    full = SelectionRule.above(-1)
    dist = cond_count_dist(params_a, full, tol=1e-12)
    ref = marginal_dist(params_a, tol=1e-12)
    n = min(len(dist), len(ref))
    assert np.abs(dist.probs[:n] - ref.probs[:n]).max() <= 1e-9
    mix = build_conditional(params_a, full, tol=1e-12)
    assert mix.success_prob == pytest.approx(1.0, abs=1e-12)


def test_above_threshold_shifts_mean_up(params_a):
    dist = cond_count_dist(params_a, SelectionRule.above(11), tol=1e-10)
    assert dist.mean > params_a.mean_counts
    below = cond_count_dist(params_a, SelectionRule.below(8), tol=1e-10)
    assert below.mean < params_a.mean_counts


def test_mixture_mean_formula(params_a):
    rule = SelectionRule.above(11)
    mix = build_conditional(params_a, rule, tol=1e-12)
    assert isinstance(mix, ConditionalMixture)
    # renormalised marginal-weighted average of the member means
    expected = sum(
        marginal(params_a, t) * conditional_mean(params_a, t)
        for t in mix.trigger_values
    ) / mix.success_prob
    assert mix.mean_counts() == pytest.approx(expected, rel=1e-12)
    dist = cond_count_dist(params_a, rule, tol=1e-12)
    assert dist.mean == pytest.approx(mix.mean_counts(), abs=1e-9)


def test_set_rule_mixture(params_b):
    rule = SelectionRule.from_set([13, 19])
    mix = build_conditional(params_b, rule, tol=1e-12)
    assert mix.trigger_values == (13, 19)
    p13, p19 = marginal(params_b, 13), marginal(params_b, 19)
    assert mix.success_prob == pytest.approx(p13 + p19, rel=1e-12)
    assert mix.member_weights[0] == pytest.approx(p13 / (p13 + p19), rel=1e-12)


def test_empty_acceptance_raises(params_a):
    with pytest.raises(ConditioningError):
        build_conditional(params_a, SelectionRule.above(4000), tol=1e-10)


@given(params=params_st, t=st.integers(0, 40))
@settings(max_examples=40, deadline=None)
def test_state_normalisation_property(params, t):
    # skip trigger values that the marginal cannot reach at double precision
    if marginal(params, t) <= 1e-12:
        return
    state = build_conditional(params, SelectionRule.exact(t), tol=1e-11)
    assert isinstance(state, ConditionalState)
    assert state.norm() == pytest.approx(1.0, abs=1e-8)
    assert state.mean_photons() == pytest.approx(state.M_t / params.eta, rel=1e-7, abs=1e-7)
