import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twinbeam import (
    ExperimentParams,
    ParameterError,
    TableSizeError,
    brute_force_joint,
    joint_prob,
    joint_table,
    log_binomial,
    marginal,
    marginal_dist,
)

from conftest import PARAMS_A, PARAMS_B

params_st = st.builds(
    ExperimentParams,
    mu=st.floats(1.0, 250.0),
    eta=st.floats(0.02, 0.95),
    mean_counts=st.floats(0.0, 30.0),
)


# --- log_binomial -----------------------------------------------------------


def test_log_binomial_small_integer():
    assert log_binomial(5.0, 2) == pytest.approx(math.log(10.0), abs=1e-14)


def test_log_binomial_k_zero_is_exact_zero():
    for n in (0.0, 3.0, 17.5, 1e6):
        assert log_binomial(n, 0) == 0.0


def test_log_binomial_vanishing_coefficient():
    assert log_binomial(3.0, 5) == -math.inf


def test_log_binomial_against_exact_integer_oracle():
    # big-integer factorials are exact; math.log of a Python int is accurate.
    # The achievable error is set by cancellation between the lgamma terms:
    # a few ulps at the scale of lgamma(n+1).
    cases = [(197 + 50 - 1, 50), (1000, 3), (123, 61), (10**6, 12)]
    for n, k in cases:
        exact = math.log(math.comb(n, k))
        bound = 4.0 * math.ulp(math.lgamma(n + 1.0)) + 1e-13
        assert abs(log_binomial(float(n), k) - exact) <= bound


def test_log_binomial_rejects_bad_input():
    with pytest.raises(ParameterError):
        log_binomial(5.0, -1)
    with pytest.raises(ParameterError):
        log_binomial(math.inf, 2)
    with pytest.raises(ParameterError):
        log_binomial(-1.0, 0)
    with pytest.raises(ParameterError):
        log_binomial(2.5, 4)  # non-integer n below k: sign-alternating region
    with pytest.raises(ParameterError):
        log_binomial(5.0, 2.0)  # type: ignore[arg-type]


@given(n=st.integers(0, 10**6), k=st.integers(0, 300))
@settings(max_examples=200)
def test_log_binomial_matches_comb(n, k):
    ours = log_binomial(float(n), k)
    if k > n:
        assert ours == -math.inf
    else:
        bound = 4.0 * math.ulp(math.lgamma(n + 1.0)) + 1e-13
        assert abs(ours - math.log(math.comb(n, k))) <= bound


# --- joint_prob -------------------------------------------------------------


def test_joint_prob_vacuum():
    p = ExperimentParams(3.0, 0.4, 0.0)
    assert joint_prob(p, 0, 0) == 1.0
    assert joint_prob(p, 1, 0) == 0.0


def test_joint_prob_lossless_limit_via_oracle():
    # one mode, no loss: perfectly correlated geometric counts
    bf = brute_force_joint(1, 2.0, 1.0)
    assert bf.probs[1, 1] == pytest.approx(2.0 / 9.0, abs=1e-14)
    for s in range(6):
        assert bf.probs[s, s] == pytest.approx((1.0 / 3.0) * (2.0 / 3.0) ** s, abs=1e-13)
    off_diag = bf.probs - np.diag(np.diag(bf.probs))
    assert np.abs(off_diag).max() == 0.0


def test_joint_prob_matches_enumeration_small():
    bf = brute_force_joint(2, 1.0, 0.5)
    p = ExperimentParams(2.0, 0.5, 0.5)
    for s in range(11):
        for t in range(11):
            assert joint_prob(p, s, t) == pytest.approx(bf.probs[s, t], abs=1e-10)


@pytest.mark.parametrize("mu", [1, 2, 3])
@pytest.mark.parametrize("eta", [0.3, 0.5, 0.9])
@pytest.mark.parametrize("n_mean", [0.5, 2.0])
def test_oracle_equivalence_grid(mu, eta, n_mean):
    bf = brute_force_joint(mu, n_mean, eta)
    params = ExperimentParams(float(mu), eta, eta * n_mean)
    k = min(bf.shape[0], 16)
    block = np.array([[joint_prob(params, s, t) for t in range(k)] for s in range(k)])
    assert np.abs(block - bf.probs[:k, :k]).max() <= 1e-10


def test_joint_prob_symmetric_exactly():
    p = ExperimentParams(7.3, 0.21, 4.2)
    for s, t in [(0, 5), (3, 11), (2, 2)]:
        assert joint_prob(p, s, t) == joint_prob(p, t, s)


def test_joint_prob_rejects_unit_eta():
    p = ExperimentParams(1.0, 1.0, 2.0, allow_unit_eta=True)
    with pytest.raises(ParameterError):
        joint_prob(p, 1, 1)


def test_joint_prob_validates_arguments():
    p = ExperimentParams(2.0, 0.5, 1.0)
    with pytest.raises(ParameterError):
        joint_prob(p, -1, 0)
    with pytest.raises(ParameterError):
        joint_prob(p, 0.5, 0)  # type: ignore[arg-type]
    with pytest.raises(ParameterError):
        joint_prob(p, 0, 0, tol=0.0)


# --- joint_table -------------------------------------------------------------


def test_joint_table_vacuum_single_cell():
    table = joint_table(ExperimentParams(1.0, 0.99, 0.0))
    assert table.shape == (1, 1)
    assert table.probs[0, 0] == 1.0
    assert table.tail_bound == 0.0


def test_joint_table_mass_and_symmetry(table_a, table_b):
    for table in (table_a, table_b):
        assert 1.0 - 1e-9 <= table.total_mass <= 1.0
        assert np.array_equal(table.probs, table.probs.T)
        assert table.total_mass + table.tail_bound <= 1.0 + 1e-12


def test_joint_table_support_bound(table_b):
    # the few-mode bright beam needs, but does not exceed, a ~90-count box
    assert table_b.shape[0] <= 90


def test_joint_table_matches_cellwise_series(params_b, table_b):
    for s, t in [(0, 0), (5, 17), (30, 2), (12, 12)]:
        assert table_b.probs[s, t] == pytest.approx(
            joint_prob(params_b, s, t), rel=1e-10, abs=1e-15
        )


def test_joint_table_marginal_consistency(params_a, table_a):
    column_sums = table_a.marginal_first()
    for t in range(table_a.shape[1]):
        assert column_sums[t] == pytest.approx(marginal(params_a, t), abs=1e-8)
    # spotlight the near-mean cell
    assert column_sums[13] == pytest.approx(marginal(params_a, 13), abs=1e-8)


def test_joint_table_cell_budget():
    with pytest.raises(TableSizeError) as err:
        joint_table(ExperimentParams(1.0, 0.5, 20.0), tol=1e-12, max_cells=100)
    assert "cells" in str(err.value)


def test_noise_reduction_identity_from_table(table_a, table_b):
    # var(s - t)/mean(s + t) over the exact table equals 1 - eta
    for table in (table_a, table_b):
        probs = table.probs
        idx = np.arange(probs.shape[0])
        s_idx = idx[:, None]
        t_idx = idx[None, :]
        mean_sum = float(((s_idx + t_idx) * probs).sum())
        mean_diff = float(((s_idx - t_idx) * probs).sum())
        var_diff = float((((s_idx - t_idx) ** 2) * probs).sum()) - mean_diff**2
        assert var_diff / mean_sum == pytest.approx(1.0 - table.params.eta, abs=1e-6)


# --- marginal ----------------------------------------------------------------


def test_marginal_single_mode_geometric():
    p = ExperimentParams(1.0, 0.5, 3.0)
    assert marginal(p, 0) == pytest.approx(1.0 / 4.0, rel=1e-12)
    for t in range(8):
        expected = (3.0**t) / (4.0 ** (t + 1))
        assert marginal(p, t) == pytest.approx(expected, rel=1e-11)


def test_marginal_mean_and_variance(params_a):
    dist = marginal_dist(params_a, tol=1e-12)
    assert dist.mean == pytest.approx(13.4, abs=1e-9)
    expected_var = 13.4 * (1.0 + 13.4 / 197.0)
    assert dist.variance() == pytest.approx(expected_var, rel=1e-6)


@given(params=params_st)
@settings(max_examples=60, deadline=None)
def test_marginal_mean_property(params):
    dist = marginal_dist(params, tol=1e-11)
    assert dist.mean == pytest.approx(params.mean_counts, abs=1e-7)


def test_table_sum_matches_marginal_sums(params_b, table_b):
    total_from_marginal = float(
        np.sum([marginal(params_b, t) for t in range(table_b.shape[1])])
    )
    assert table_b.total_mass == pytest.approx(total_from_marginal, abs=1e-10)


# --- brute force oracle -------------------------------------------------------


def test_brute_force_vacuum():
    bf = brute_force_joint(1, 0.0, 0.3)
    assert bf.probs.shape == (1, 1)
    assert bf.probs[0, 0] == 1.0


def test_brute_force_guards():
    with pytest.raises(ParameterError):
        brute_force_joint(5, 1.0, 0.5)
    with pytest.raises(ParameterError):
        brute_force_joint(2, 1.0, 0.0)
    with pytest.raises(ParameterError):
        brute_force_joint(2, 1.0, 0.5, photon_cutoff=3)


def test_brute_force_explicit_cutoff_accepted():
    bf = brute_force_joint(2, 1.0, 0.5, photon_cutoff=80)
    assert bf.total_mass == pytest.approx(1.0, abs=1e-11)


def test_convergence_guard_is_unreachable_for_valid_params():
    # the series ratio bound x < 1 holds across the whole domain
    for params in (PARAMS_A, PARAMS_B, ExperimentParams(1.0, 0.02, 30.0)):
        x = (
            params.mean_counts
            * (1.0 - params.eta) ** 2
            / (params.mean_counts + params.mu * params.eta)
        )
        assert x < 1.0
        joint_prob(params, 0, 0)  # does not raise ConvergenceError


@given(params=params_st, s=st.integers(0, 30), t=st.integers(0, 30))
@settings(max_examples=60, deadline=None)
def test_joint_prob_is_a_probability(params, s, t):
    value = joint_prob(params, s, t)
    assert 0.0 <= value <= 1.0
