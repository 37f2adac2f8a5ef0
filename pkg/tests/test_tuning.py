import numpy as np
import numpy.testing as npt
import pytest

from postsmooth.baselines import BaselineSpec
from postsmooth.data import IndexedDataset, PredictionSet, SplitAssignment
from postsmooth.tuning import (
    DEFAULT_C_GRID,
    DEFAULT_SIGMA_GRID,
    GridSpec,
    TuneReport,
    mse,
    r_squared,
    tune_baseline,
    tune_pes,
)


def test_mse_hand_values():
    assert mse([0.0, 2.0], [1.0, 3.0]) == 1.0
    assert mse([[1.0, 2.0]], [[1.0, 4.0]]) == 2.0
    with pytest.raises(ValueError, match="shape mismatch"):
        mse([1.0], [1.0, 2.0])
    with pytest.raises(ValueError, match="at least one"):
        mse([], [])


def test_r_squared_hand_values_and_clipping():
    assert r_squared([0.0, 1.0], [0.0, 1.0]) == 1.0
    assert r_squared([0.0, 1.0], [1.0, 0.0]) == -3.0
    assert r_squared([0.0, 1.0], [1.0, 0.0], clip_negative=True) == 0.0
    with pytest.raises(ValueError, match="constant labels"):
        r_squared([2.0, 2.0], [1.0, 3.0])
    with pytest.raises(ValueError, match="at least two"):
        r_squared([1.0], [1.0])


def test_r_squared_multicolumn_uniform_average():
    rng = np.random.default_rng(0)
    y = rng.standard_normal((30, 3))
    yhat = y + 0.3 * rng.standard_normal((30, 3))
    per_column = [r_squared(y[:, j], yhat[:, j]) for j in range(3)]
    npt.assert_allclose(r_squared(y, yhat), np.mean(per_column), rtol=1e-12)


def test_grid_spec_defaults_and_validation():
    grid = GridSpec()
    npt.assert_allclose(grid.sigma_values, np.logspace(-4, 0, 5), rtol=1e-12)
    npt.assert_allclose(grid.c_values, np.linspace(0.0, 1.0, 11), rtol=1e-12)
    assert grid.sigma_values == DEFAULT_SIGMA_GRID
    assert grid.c_values == DEFAULT_C_GRID
    with pytest.raises(ValueError, match="robust grids must include c = 0"):
        GridSpec(c_values=(0.5, 1.0))
    # non-robust mode lifts that requirement
    GridSpec(c_values=(0.5, 1.0), robust=False)
    with pytest.raises(ValueError, match="sigma values must be > 0"):
        GridSpec(sigma_values=(0.0, 1.0))
    with pytest.raises(ValueError, match=r"c values must lie in \[0, 1\]"):
        GridSpec(c_values=(0.0, 1.5))
    with pytest.raises(ValueError, match="nonempty"):
        GridSpec(sigma_values=())


def _noisy_case(seed, n=120, noise=0.3):
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, n).reshape(-1, 1)
    signal = np.sin(2.0 * np.pi * t)
    labels = signal + 0.02 * rng.standard_normal((n, 1))
    predictions = signal + noise * rng.standard_normal((n, 1))
    pred_set = PredictionSet(predictions=predictions, indices=t, labels=labels)
    perm = rng.permutation(n)
    split = SplitAssignment(
        train_rows=[], validation_rows=perm[: n // 2], holdout_rows=perm[n // 2 :]
    )
    return pred_set, split


def test_tune_pes_report_shape_and_grid_coverage():
    pred_set, split = _noisy_case(1)
    report = tune_pes(pred_set, split)
    assert isinstance(report, TuneReport)
    assert report.metric == "mse"
    assert len(report.validation_scores) == len(DEFAULT_SIGMA_GRID) * len(
        DEFAULT_C_GRID
    )
    assert set(report.validation_scores) == {
        (s, c) for s in DEFAULT_SIGMA_GRID for c in DEFAULT_C_GRID
    }
    assert report.best_sigma in DEFAULT_SIGMA_GRID
    assert report.best_c in DEFAULT_C_GRID


def test_tuned_validation_never_worse_than_unsmoothed_with_robust_grid():
    for seed in range(8):
        pred_set, split = _noisy_case(seed)
        report = tune_pes(pred_set, split)
        best_value = report.validation_scores[(report.best_sigma, report.best_c)]
        assert best_value == min(report.validation_scores.values())
        assert best_value <= report.unsmoothed_validation_score + 1e-15
        # every c = 0 cell scores exactly the unsmoothed validation value
        for sigma in DEFAULT_SIGMA_GRID:
            assert (
                report.validation_scores[(sigma, 0.0)]
                == report.unsmoothed_validation_score
            )


def test_smoothing_helps_on_noisy_smooth_signal():
    improved = 0
    picked_nonzero = 0
    for seed in range(10):
        pred_set, split = _noisy_case(seed)
        report = tune_pes(pred_set, split)
        if report.best_c > 0.0:
            picked_nonzero += 1
        if report.holdout_score < report.unsmoothed_holdout_score:
            improved += 1
    assert picked_nonzero >= 9
    assert improved >= 9


def test_c_zero_grid_reproduces_unsmoothed_scores_exactly():
    pred_set, split = _noisy_case(2)
    grid = GridSpec(sigma_values=(0.1,), c_values=(0.0,))
    report = tune_pes(pred_set, split, grid=grid)
    assert report.best_c == 0.0
    assert report.holdout_score == report.unsmoothed_holdout_score
    assert report.unsmoothed_validation_score == report.validation_scores[(0.1, 0.0)]


def test_tune_pes_is_deterministic():
    pred_set, split = _noisy_case(3)
    a = tune_pes(pred_set, split)
    b = tune_pes(pred_set, split)
    assert a == b


def test_selection_ignores_holdout_labels():
    pred_set, split = _noisy_case(4)
    baseline = tune_pes(pred_set, split)
    corrupted_labels = pred_set.labels.copy()
    corrupted_labels[split.holdout_rows] = 1e6
    corrupted = PredictionSet(
        predictions=pred_set.predictions,
        indices=pred_set.indices,
        labels=corrupted_labels,
    )
    report = tune_pes(corrupted, split)
    assert report.best_sigma == baseline.best_sigma
    assert report.best_c == baseline.best_c
    assert report.validation_scores == baseline.validation_scores
    assert report.holdout_score != baseline.holdout_score


def test_tie_break_prefers_smaller_c_then_sigma():
    # all-zero predictions survive any smoother bitwise, so every grid
    # cell scores identically and only the tie-break decides
    n = 20
    t = np.linspace(0.0, 1.0, n).reshape(-1, 1)
    pred_set = PredictionSet(
        predictions=np.zeros((n, 1)),
        indices=t,
        labels=np.sin(t),
    )
    split = SplitAssignment(
        train_rows=[], validation_rows=np.arange(10), holdout_rows=np.arange(10, 20)
    )
    report = tune_pes(pred_set, split)
    assert len(set(report.validation_scores.values())) == 1
    assert report.best_c == 0.0
    assert report.best_sigma == min(DEFAULT_SIGMA_GRID)


def test_transductive_and_holdout_only_scopes_differ():
    pred_set, split = _noisy_case(5)
    grid = GridSpec(sigma_values=(0.05,), c_values=(0.0, 1.0), robust=True)
    trans = tune_pes(pred_set, split, grid=grid, transductive=True)
    plain = tune_pes(pred_set, split, grid=grid, transductive=False)
    assert trans.best_c == plain.best_c == 1.0
    assert trans.unsmoothed_holdout_score == plain.unsmoothed_holdout_score
    assert trans.holdout_score != plain.holdout_score


def test_holdout_only_scope_matches_direct_computation():
    pred_set, split = _noisy_case(6)
    grid = GridSpec(sigma_values=(0.08,), c_values=(0.0, 1.0))
    report = tune_pes(pred_set, split, grid=grid, transductive=False)
    assert report.best_c == 1.0
    from postsmooth.smoothing import nadaraya_watson_matrix

    scope = pred_set.take(split.holdout_rows)
    w = nadaraya_watson_matrix(scope.indices, 0.08).weights
    want = mse(scope.labels, w @ scope.predictions)
    npt.assert_allclose(report.holdout_score, want, rtol=1e-12)


def test_r2_metric_maximizes():
    pred_set, split = _noisy_case(7)
    report = tune_pes(pred_set, split, metric="r2")
    best_value = report.validation_scores[(report.best_sigma, report.best_c)]
    assert best_value == max(report.validation_scores.values())
    assert best_value >= report.unsmoothed_validation_score


def test_tune_pes_input_validation():
    pred_set, split = _noisy_case(8)
    unlabeled = pred_set.strip_labels()
    with pytest.raises(ValueError, match="requires labels"):
        tune_pes(unlabeled, split)
    with pytest.raises(ValueError, match="metric"):
        tune_pes(pred_set, split, metric="mae")
    empty_val = SplitAssignment(
        train_rows=[], validation_rows=[], holdout_rows=[0, 1]
    )
    with pytest.raises(ValueError, match="validation"):
        tune_pes(pred_set, empty_val)
    empty_hold = SplitAssignment(
        train_rows=[], validation_rows=[0, 1], holdout_rows=[]
    )
    with pytest.raises(ValueError, match="holdout"):
        tune_pes(pred_set, empty_hold)
    oversized = SplitAssignment(
        train_rows=[], validation_rows=[0], holdout_rows=[pred_set.n + 3]
    )
    with pytest.raises(ValueError, match="references row"):
        tune_pes(pred_set, oversized)


def _baseline_data(seed):
    rng = np.random.default_rng(seed)
    x_tr = rng.uniform(-1.0, 1.0, (40, 1))
    x_va = rng.uniform(-1.0, 1.0, (15, 1))
    f = lambda x: 2.0 * x + 0.5
    train = IndexedDataset(features=x_tr, labels=f(x_tr), indices=x_tr)
    validation = IndexedDataset(features=x_va, labels=f(x_va), indices=x_va)
    return train, validation


def test_tune_baseline_picks_best_scoring_spec():
    train, validation = _baseline_data(0)
    specs = [
        BaselineSpec("ridge", {"lambda": 1e8}),
        BaselineSpec("ridge", {"lambda": 1e-8}),
        BaselineSpec("ridge", {"lambda": 1.0}),
    ]
    report = tune_baseline(train, validation, specs)
    assert report.best_index == 1
    assert report.best_spec is specs[1]
    assert report.best_score == min(report.scores)
    assert report.errors == (None, None, None)
    assert report.metric == "mse"


def test_tune_baseline_records_failures_and_continues():
    train, validation = _baseline_data(1)
    # duplicate a training row so gpr with alpha = 0 hits a singular gram
    doubled = IndexedDataset(
        features=np.vstack([train.features, train.features[:1]]),
        labels=np.vstack([train.labels, train.labels[:1]]),
        indices=np.vstack([train.indices, train.indices[:1]]),
    )
    specs = [
        BaselineSpec("gpr", {"alpha": 0.0, "sigma_const": 1.0, "sigma_gpr": 1.0}),
        BaselineSpec("ridge", {"lambda": 1e-6}),
    ]
    report = tune_baseline(doubled, validation, specs)
    assert np.isnan(report.scores[0])
    assert "alpha" in report.errors[0]
    assert report.best_index == 1
    assert report.errors[1] is None


def test_tune_baseline_all_failures_raise_with_details():
    train, validation = _baseline_data(2)
    doubled = IndexedDataset(
        features=np.vstack([train.features, train.features[:1]]),
        labels=np.vstack([train.labels, train.labels[:1]]),
        indices=np.vstack([train.indices, train.indices[:1]]),
    )
    specs = [
        BaselineSpec("gpr", {"alpha": 0.0, "sigma_const": 1.0, "sigma_gpr": 1.0}),
    ]
    with pytest.raises(ValueError, match=r"every baseline spec failed.*\[0\] gpr"):
        tune_baseline(doubled, validation, specs)
    with pytest.raises(ValueError, match="at least one"):
        tune_baseline(train, validation, [])


def test_tune_baseline_tie_keeps_earliest():
    train, validation = _baseline_data(3)
    specs = [
        BaselineSpec("ridge", {"lambda": 0.5}),
        BaselineSpec("ridge", {"lambda": 0.5}),
    ]
    report = tune_baseline(train, validation, specs)
    assert report.scores[0] == report.scores[1]
    assert report.best_index == 0


def test_tune_baseline_r2_direction():
    train, validation = _baseline_data(4)
    specs = [
        BaselineSpec("ridge", {"lambda": 1e8}),
        BaselineSpec("ridge", {"lambda": 1e-8}),
    ]
    report = tune_baseline(train, validation, specs, metric="r2")
    assert report.best_index == 1
    assert report.best_score == max(report.scores)
