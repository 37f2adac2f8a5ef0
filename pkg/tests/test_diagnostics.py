import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import cholesky

from postsmooth.data import CovarianceBundle
from postsmooth.diagnostics import (
    GammaBeta,
    beta_upper_bound,
    estimate_gamma_beta,
    expected_mse_reduction,
    mse_change_upper_bound,
    optimal_mixing_weight,
    smoothing_gap,
)
from postsmooth.smoothing import nadaraya_watson_matrix, optimal_smoother


def _random_right_stochastic(rng, n):
    raw = rng.uniform(0.1, 1.0, (n, n))
    return raw / raw.sum(axis=1, keepdims=True)


def test_gamma_beta_hand_case():
    # one trial, n = 2: e = yhat - y = [1, -1], W fixed
    w = np.array([[0.7, 0.3], [0.4, 0.6]])
    y = np.array([2.0, 5.0])
    yhat = np.array([3.0, 4.0])
    e = yhat - y
    gamma_hand = float(e @ (w @ e)) / float(e @ e)
    beta_hand = float(e @ (w @ y - y)) / float(e @ e)
    gb = estimate_gamma_beta(w, [(y, yhat)])
    npt.assert_allclose(gb.gamma, gamma_hand, rtol=1e-14)
    npt.assert_allclose(gb.beta, beta_hand, rtol=1e-14)
    npt.assert_allclose(gb.mean_sq_err, 2.0, rtol=1e-14)
    assert gb.n_trials == 1


def test_identity_weights_give_gamma_one_beta_zero():
    rng = np.random.default_rng(0)
    trials = [
        (rng.standard_normal(6), rng.standard_normal(6)) for _ in range(4)
    ]
    gb = estimate_gamma_beta(np.eye(6), trials)
    npt.assert_allclose(gb.gamma, 1.0, rtol=1e-14)
    assert gb.beta == 0.0
    assert not gb.applicable


def test_gamma_matches_trace_formula_for_isotropic_errors():
    # with errors iid and independent of y, E[e^T W e] = sigma^2 tr(W), so
    # gamma converges to tr(W) / n; the Monte-Carlo estimate must agree
    rng = np.random.default_rng(42)
    n, m = 15, 4000
    w = _random_right_stochastic(rng, n)
    y = rng.standard_normal(n)
    trials = []
    for _ in range(m):
        e = rng.standard_normal(n)
        trials.append((y, y + e))
    gb = estimate_gamma_beta(w, trials)
    npt.assert_allclose(gb.gamma, np.trace(w) / n, atol=6.0 / np.sqrt(n * m))
    npt.assert_allclose(gb.beta, 0.0, atol=6.0 / np.sqrt(n * m))
    npt.assert_allclose(gb.mean_sq_err, n, rtol=0.1)


def test_zero_residuals_raise_with_hypothesis_named():
    y = np.array([1.0, 2.0])
    with pytest.raises(ValueError, match=r"E\[\|\|e\|\|\^2\]"):
        estimate_gamma_beta(np.eye(2), [(y, y)])


def test_gamma_beta_requires_trials_and_matching_shapes():
    with pytest.raises(ValueError, match="at least one"):
        estimate_gamma_beta(np.eye(2), [])
    with pytest.raises(ValueError, match="trial 0"):
        estimate_gamma_beta(np.eye(2), [(np.zeros(3), np.ones(3))])


def test_smoothing_gap_hand_case():
    w = np.array([[0.5, 0.5], [0.5, 0.5]])
    y = np.array([0.0, 2.0])
    yhat = np.array([2.0, 2.0])
    # W yhat = [2, 2], diff = [2, 0]
    npt.assert_allclose(smoothing_gap(w, [(y, yhat)]), 4.0, rtol=1e-14)


def test_beta_upper_bound_is_cauchy_schwarz_cap():
    rng = np.random.default_rng(8)
    n = 10
    w = _random_right_stochastic(rng, n)
    trials = [(rng.standard_normal(n), rng.standard_normal(n)) for _ in range(30)]
    cap = beta_upper_bound(w, trials)
    gb = estimate_gamma_beta(w, trials)
    assert gb.beta <= cap + 1e-12
    # direct recomputation
    distort = np.mean([np.sum((w @ y - y) ** 2) for y, _ in trials])
    err = np.mean([np.sum((yh - y) ** 2) for y, yh in trials])
    npt.assert_allclose(cap, np.sqrt(distort / err), rtol=1e-12)


def test_optimal_mixing_weight_frozen_values():
    # gamma 0, unit error, zero gap: c* = m / (0 + 2 m) = 1/2
    gb = GammaBeta(gamma=0.0, beta=0.0, mean_sq_err=1.0)
    npt.assert_allclose(optimal_mixing_weight(gb, 0.0), 0.5, rtol=1e-14)
    # gamma 0.5, m = 2, gap = 1: slack = 1, c* = 1 / (1 + 2) = 1/3
    gb = GammaBeta(gamma=0.5, beta=0.0, mean_sq_err=2.0)
    npt.assert_allclose(optimal_mixing_weight(gb, 1.0), 1.0 / 3.0, rtol=1e-14)


def test_optimal_mixing_weight_uses_beta_by_default():
    with_beta = optimal_mixing_weight(
        GammaBeta(gamma=0.3, beta=0.2, mean_sq_err=2.0), 1.0
    )
    gamma_only = optimal_mixing_weight(
        GammaBeta(gamma=0.5, beta=0.0, mean_sq_err=2.0), 1.0
    )
    npt.assert_allclose(with_beta, gamma_only, rtol=1e-14)
    ignoring = optimal_mixing_weight(
        GammaBeta(gamma=0.3, beta=0.2, mean_sq_err=2.0), 1.0, include_beta=False
    )
    assert ignoring > with_beta


@settings(max_examples=100, deadline=None)
@given(
    st.floats(min_value=-2.0, max_value=0.999),
    st.floats(min_value=1e-6, max_value=1e6),
    st.floats(min_value=0.0, max_value=1e6),
)
def test_optimal_mixing_weight_range(gamma, m, gap):
    gb = GammaBeta(gamma=gamma, beta=0.0, mean_sq_err=m)
    c = optimal_mixing_weight(gb, gap)
    assert 0.0 < c <= 0.5


def test_optimal_mixing_weight_rejects_inapplicable():
    gb = GammaBeta(gamma=0.9, beta=0.2, mean_sq_err=1.0)
    with pytest.raises(ValueError, match="gamma \\+ beta"):
        optimal_mixing_weight(gb, 1.0)
    # gamma alone is fine for the same inputs
    assert optimal_mixing_weight(gb, 1.0, include_beta=False) > 0.0


def test_mse_change_upper_bound_frozen_values():
    gb = GammaBeta(gamma=0.0, beta=0.0, mean_sq_err=1.0)
    npt.assert_allclose(mse_change_upper_bound(gb, 0.0, 1), -0.5, rtol=1e-14)
    # gamma 0.5, m = 2, gap = 1, n = 10: -(0.25 * 4) / (10 * (1 + 2)) = -1/30
    gb = GammaBeta(gamma=0.5, beta=0.0, mean_sq_err=2.0)
    npt.assert_allclose(
        mse_change_upper_bound(gb, 1.0, 10), -1.0 / 30.0, rtol=1e-14
    )


@settings(max_examples=100, deadline=None)
@given(
    st.floats(min_value=-2.0, max_value=0.999),
    st.floats(min_value=1e-6, max_value=1e6),
    st.floats(min_value=0.0, max_value=1e6),
    st.integers(min_value=1, max_value=10**6),
)
def test_mse_change_upper_bound_strictly_negative(gamma, m, gap, n):
    gb = GammaBeta(gamma=gamma, beta=0.0, mean_sq_err=m)
    assert mse_change_upper_bound(gb, gap, n) < 0.0


def test_bound_is_quadratic_minimum_of_surrogate():
    # the bound must equal the surrogate objective
    # q(c) = c^2 (gap + 2 (1-g) m) - 2 c (1-g) m evaluated at c*, divided by n,
    # and c* must beat nearby mixing weights on q
    gamma, m, gap, n = 0.2, 3.0, 4.0, 7
    gb = GammaBeta(gamma=gamma, beta=0.0, mean_sq_err=m)
    c_star = optimal_mixing_weight(gb, gap)
    slack = (1.0 - gamma) * m

    def q(c):
        return (c**2 * (gap + 2.0 * slack) - 2.0 * c * slack) / n

    npt.assert_allclose(mse_change_upper_bound(gb, gap, n), q(c_star), rtol=1e-12)
    for dc in (-0.05, 0.05):
        assert q(c_star) < q(c_star + dc)


def test_expected_mse_reduction_perfect_predictions_is_zero():
    bundle = CovarianceBundle(
        k_yy=np.eye(3), k_ee=np.zeros((3, 3)), k_ye=np.zeros((3, 3))
    )
    npt.assert_allclose(expected_mse_reduction(bundle), 0.0, atol=1e-12)


def test_expected_mse_reduction_frozen_diagonal_case():
    # independent unit-variance labels and errors: S* = I/2 halves the MSE,
    # from 1 per sample to 1/2
    bundle = CovarianceBundle(k_yy=np.eye(5), k_ee=np.eye(5), k_ye=np.zeros((5, 5)))
    npt.assert_allclose(expected_mse_reduction(bundle), 0.5, rtol=1e-12)


def test_expected_mse_reduction_matches_trace_route():
    # independent derivation: reduction * n = tr(K_ee) - tr(K_yy)
    # + tr(K_yhat_y^T K_yhat_yhat^{-1} K_yhat_y)
    rng = np.random.default_rng(19)
    for _ in range(12):
        n = int(rng.integers(2, 9))
        stacked = rng.standard_normal((2 * n, 3 * n))
        joint = stacked @ stacked.T + 0.05 * np.eye(2 * n)
        bundle = CovarianceBundle(
            k_yy=joint[:n, :n], k_ee=joint[n:, n:], k_ye=joint[:n, n:]
        )
        got = expected_mse_reduction(bundle)
        solved = np.linalg.solve(bundle.k_yhat_yhat, bundle.k_yhat_y)
        want = (
            np.trace(bundle.k_ee)
            - np.trace(bundle.k_yy)
            + np.trace(bundle.k_yhat_y.T @ solved)
        ) / n
        npt.assert_allclose(got, want, rtol=1e-8, atol=1e-10)
        assert got >= 0.0


def test_expected_mse_reduction_monte_carlo_oracle():
    rng = np.random.default_rng(77)
    n, draws = 4, 200_000
    stacked = rng.standard_normal((2 * n, 3 * n))
    joint = stacked @ stacked.T + 0.1 * np.eye(2 * n)
    bundle = CovarianceBundle(
        k_yy=joint[:n, :n], k_ee=joint[n:, n:], k_ye=joint[:n, n:]
    )
    s_star = optimal_smoother(bundle)
    factor = cholesky(joint, lower=True)
    samples = factor @ rng.standard_normal((2 * n, draws))
    y, e = samples[:n], samples[n:]
    yhat = y + e
    per_draw = (
        np.sum(e * e, axis=0) - np.sum((s_star @ yhat - y) ** 2, axis=0)
    ) / n
    mc = per_draw.mean()
    se = per_draw.std(ddof=1) / np.sqrt(draws)
    reduction = expected_mse_reduction(bundle)
    assert abs(reduction - mc) < 3.0 * se


def test_expected_mse_reduction_explicit_n():
    bundle = CovarianceBundle(k_yy=np.eye(4), k_ee=np.eye(4), k_ye=np.zeros((4, 4)))
    npt.assert_allclose(
        expected_mse_reduction(bundle, n=8),
        expected_mse_reduction(bundle) / 2.0,
        rtol=1e-12,
    )


def test_gamma_beta_applicability_with_nadaraya_watson_weights():
    # smooth signal, rough noise: the kernel average keeps the signal and
    # cancels noise, so gamma + beta stays below 1
    rng = np.random.default_rng(5)
    n = 80
    t = np.linspace(0.0, 1.0, n)
    w = nadaraya_watson_matrix(t, 0.05)
    trials = []
    for _ in range(64):
        y = np.sin(2.0 * np.pi * t)
        yhat = y + 0.3 * rng.standard_normal(n)
        trials.append((y, yhat))
    gb = estimate_gamma_beta(w, trials)
    assert gb.applicable
    assert 0.0 < gb.gamma < 0.5
