import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import cdist

from postsmooth.data import CovarianceBundle, PredictionSet
from postsmooth.smoothing import (
    SmootherSpec,
    WeightMatrix,
    apply_smoother,
    gaussian_kernel,
    nadaraya_watson_matrix,
    optimal_smoother,
    pairwise_sq_dists,
    shrinkage_smoother,
    smooth_predictions,
)


def test_gaussian_kernel_values():
    assert gaussian_kernel(0.3, 0.3, 2.0) == 1.0
    # distance 1 at sigma 1: exp(-1/2)
    npt.assert_allclose(gaussian_kernel(0.0, 1.0, 1.0), np.exp(-0.5), rtol=1e-15)
    npt.assert_allclose(
        gaussian_kernel([0.0, 0.0], [3.0, 4.0], 5.0), np.exp(-0.5), rtol=1e-15
    )


def test_pairwise_sq_dists_matches_cdist():
    rng = np.random.default_rng(2)
    pts = rng.standard_normal((17, 3))
    npt.assert_allclose(
        pairwise_sq_dists(pts), cdist(pts, pts, "sqeuclidean"), atol=1e-10
    )


def test_pairwise_sq_dists_zero_diagonal():
    rng = np.random.default_rng(3)
    pts = rng.standard_normal((9, 2)) * 1e6
    d2 = pairwise_sq_dists(pts)
    npt.assert_array_equal(np.diag(d2), np.zeros(9))
    assert d2.min() >= 0.0


def test_nadaraya_watson_two_point_row():
    w = nadaraya_watson_matrix(np.array([0.0, 1.0]), 1.0).weights
    # hand value: 1 / (1 + exp(-1/2)) = 0.6224593...
    npt.assert_allclose(w[0], [0.62245933, 0.37754067], atol=1e-8)
    npt.assert_allclose(w[1], [0.37754067, 0.62245933], atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(min_value=1, max_value=25),
    st.floats(min_value=-4.0, max_value=2.0),
    st.integers(min_value=0, max_value=2**32 - 1),
)
def test_nadaraya_watson_rows_sum_to_one(n, log_sigma, seed):
    rng = np.random.default_rng(seed)
    t = rng.uniform(-5.0, 5.0, size=(n, 2))
    w = nadaraya_watson_matrix(t, 10.0**log_sigma).weights
    npt.assert_allclose(w.sum(axis=1), np.ones(n), atol=1e-12)
    assert w.min() >= 0.0


def test_nadaraya_watson_includes_self_term():
    t = np.array([0.0, 0.5, 1.0])
    w = nadaraya_watson_matrix(t, 0.5).weights
    assert np.all(np.diag(w) > 0.0)
    # each row's largest weight is its own point for distinct indices
    assert np.all(np.argmax(w, axis=1) == np.arange(3))


def test_nadaraya_watson_tiny_sigma_is_identity():
    t = np.linspace(0.0, 1.0, 8)
    w = nadaraya_watson_matrix(t, 1e-9).weights
    npt.assert_array_equal(w, np.eye(8))


def test_nadaraya_watson_permutation_equivariance():
    rng = np.random.default_rng(11)
    t = rng.uniform(0.0, 1.0, 12)
    perm = rng.permutation(12)
    w = nadaraya_watson_matrix(t, 0.3).weights
    w_perm = nadaraya_watson_matrix(t[perm], 0.3).weights
    npt.assert_allclose(w_perm, w[np.ix_(perm, perm)], atol=1e-14)


def test_nadaraya_watson_rejects_bad_sigma():
    with pytest.raises(ValueError, match="sigma"):
        nadaraya_watson_matrix(np.array([0.0, 1.0]), 0.0)


def test_weight_matrix_validation():
    with pytest.raises(ValueError, match="square"):
        WeightMatrix(np.ones((2, 3)))
    with pytest.raises(ValueError, match="sum"):
        WeightMatrix(np.array([[0.5, 0.4], [0.5, 0.5]]))
    with pytest.raises(ValueError, match="negative"):
        WeightMatrix(np.array([[1.5, -0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError, match="kind"):
        WeightMatrix(np.eye(2), kind="mystery")


def test_shrinkage_smoother_endpoints_and_midpoint():
    w = np.array([[0.6, 0.4], [0.4, 0.6]])
    npt.assert_array_equal(shrinkage_smoother(w, 0.0), np.eye(2))
    npt.assert_array_equal(shrinkage_smoother(w, 1.0), w)
    npt.assert_allclose(
        shrinkage_smoother(w, 0.5), np.array([[0.8, 0.2], [0.2, 0.8]]), atol=1e-15
    )


def test_smoother_spec_validation():
    with pytest.raises(ValueError):
        SmootherSpec(bandwidth_sigma=-1.0, mixing_c=0.5)
    with pytest.raises(ValueError):
        SmootherSpec(bandwidth_sigma=1.0, mixing_c=1.5)


def test_smooth_predictions_worked_example():
    # hand route: k = exp(-1/2), w_far = k/(1+k); with c = 0.5 the first
    # output is 0.5 * (w_far * 10) + 0.5 * 0
    k = np.exp(-0.5)
    w_far = k / (1.0 + k)
    expected_first = 0.5 * (w_far * 10.0)
    ps = PredictionSet(predictions=[0.0, 10.0], indices=[0.0, 1.0])
    out = smooth_predictions(ps, SmootherSpec(bandwidth_sigma=1.0, mixing_c=0.5))
    npt.assert_allclose(out.predictions.ravel()[0], expected_first, rtol=1e-12)
    npt.assert_allclose(out.predictions.ravel(), [1.8877, 8.1123], atol=1e-3)
    # symmetry of the configuration: outputs mirror around 5
    npt.assert_allclose(out.predictions.ravel().sum(), 10.0, rtol=1e-12)


def test_smooth_predictions_c_zero_is_bitwise_identity():
    rng = np.random.default_rng(9)
    ps = PredictionSet(
        predictions=rng.standard_normal((30, 2)),
        indices=rng.uniform(0.0, 1.0, 30),
    )
    out = smooth_predictions(ps, SmootherSpec(bandwidth_sigma=0.1, mixing_c=0.0))
    assert out.predictions.tobytes() == ps.predictions.tobytes()


def test_smooth_predictions_groups_match_separate_runs():
    rng = np.random.default_rng(4)
    t = rng.uniform(0.0, 1.0, 14)
    preds = rng.standard_normal(14)
    groups = np.array(["a"] * 6 + ["b"] * 8)
    rng.shuffle(groups)
    spec = SmootherSpec(bandwidth_sigma=0.4, mixing_c=0.7)
    whole = smooth_predictions(
        PredictionSet(preds, t), spec, groups=groups
    ).predictions
    for name in ("a", "b"):
        mask = groups == name
        alone = smooth_predictions(
            PredictionSet(preds[mask], t[mask]), spec
        ).predictions
        npt.assert_allclose(whole[mask], alone, atol=1e-14)


def test_smooth_predictions_group_length_check():
    ps = PredictionSet(predictions=[1.0, 2.0], indices=[0.0, 1.0])
    spec = SmootherSpec(bandwidth_sigma=1.0, mixing_c=0.5)
    with pytest.raises(ValueError, match="group"):
        smooth_predictions(ps, spec, groups=np.array(["a"]))


def test_apply_smoother_is_matrix_product():
    rng = np.random.default_rng(14)
    s = rng.standard_normal((5, 5))
    ps = PredictionSet(rng.standard_normal((5, 3)), rng.standard_normal(5))
    out = apply_smoother(s, ps)
    npt.assert_allclose(out.predictions, s @ ps.predictions, rtol=1e-12)
    npt.assert_array_equal(out.indices, ps.indices)


def test_optimal_smoother_equal_diagonal_case():
    bundle = CovarianceBundle(k_yy=np.eye(4), k_ee=np.eye(4), k_ye=np.zeros((4, 4)))
    npt.assert_allclose(optimal_smoother(bundle), 0.5 * np.eye(4), atol=1e-12)


def test_optimal_smoother_zero_error_is_identity():
    rng = np.random.default_rng(6)
    f = rng.standard_normal((5, 7))
    bundle = CovarianceBundle(
        k_yy=f @ f.T + 0.1 * np.eye(5), k_ee=np.zeros((5, 5)), k_ye=np.zeros((5, 5))
    )
    npt.assert_allclose(optimal_smoother(bundle), np.eye(5), atol=1e-10)


def test_optimal_smoother_two_algebraic_routes_agree():
    rng = np.random.default_rng(23)
    for _ in range(10):
        stacked = rng.standard_normal((8, 12))
        joint = stacked @ stacked.T + 0.05 * np.eye(8)
        bundle = CovarianceBundle(
            k_yy=joint[:4, :4], k_ee=joint[4:, 4:], k_ye=joint[:4, 4:]
        )
        s = optimal_smoother(bundle)
        # second route: subtract the error-facing blocks from the identity
        alt = np.eye(4) - np.linalg.solve(
            bundle.k_yhat_yhat.T, (bundle.k_ee + bundle.k_ye)
        ).T
        npt.assert_allclose(s, alt, atol=1e-8)


def test_optimal_smoother_solves_normal_equation():
    rng = np.random.default_rng(30)
    stacked = rng.standard_normal((6, 9))
    joint = stacked @ stacked.T + 0.05 * np.eye(6)
    bundle = CovarianceBundle(
        k_yy=joint[:3, :3], k_ee=joint[3:, 3:], k_ye=joint[:3, 3:]
    )
    s = optimal_smoother(bundle)
    npt.assert_allclose(s @ bundle.k_yhat_yhat, bundle.k_yhat_y.T, atol=1e-9)


def test_optimal_smoother_rejects_singular_prediction_covariance():
    bundle = CovarianceBundle(
        k_yy=np.eye(2),
        k_ee=np.eye(2),
        k_ye=-np.eye(2),  # yhat = y + e with e = -y: prediction covariance is 0
    )
    with pytest.raises(np.linalg.LinAlgError, match="positive definite"):
        optimal_smoother(bundle)
