"""Validation-split grid search for smoothing parameters and baselines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .baselines import BaselineSpec, fit_and_predict
from .data import IndexedDataset, PredictionSet, SplitAssignment
from .smoothing import nadaraya_watson_matrix, pairwise_sq_dists

__all__ = [
    "DEFAULT_SIGMA_GRID",
    "DEFAULT_C_GRID",
    "mse",
    "r_squared",
    "GridSpec",
    "TuneReport",
    "BaselineTuneReport",
    "tune_pes",
    "tune_baseline",
]

DEFAULT_SIGMA_GRID = tuple(float(s) for s in np.logspace(-4, 0, 5))
DEFAULT_C_GRID = tuple(float(c) for c in np.linspace(0.0, 1.0, 11))

METRICS = ("mse", "r2")


def mse(labels, predictions) -> float:
    """Mean squared error averaged over every entry."""
    y = np.asarray(labels, dtype=float)
    yhat = np.asarray(predictions, dtype=float)
    if y.shape != yhat.shape:
        raise ValueError(f"shape mismatch: labels {y.shape}, predictions {yhat.shape}")
    if y.size == 0:
        raise ValueError("mse requires at least one value")
    diff = yhat - y
    return float(np.mean(diff * diff))


def r_squared(labels, predictions, clip_negative: bool = False) -> float:
    """Coefficient of determination, optionally clipped below at zero.

    Multi-output inputs average the per-column scores uniformly.
    """
    y = np.asarray(labels, dtype=float)
    yhat = np.asarray(predictions, dtype=float)
    if y.ndim == 1:
        y = y.reshape(-1, 1)
    if yhat.ndim == 1:
        yhat = yhat.reshape(-1, 1)
    if y.shape != yhat.shape:
        raise ValueError(f"shape mismatch: labels {y.shape}, predictions {yhat.shape}")
    if y.shape[0] < 2:
        raise ValueError("r_squared requires at least two rows")
    denom = np.sum((y - y.mean(axis=0)) ** 2, axis=0)
    if np.any(denom == 0):
        raise ValueError("r_squared is undefined for constant labels")
    scores = 1.0 - np.sum((y - yhat) ** 2, axis=0) / denom
    if clip_negative:
        scores = np.maximum(scores, 0.0)
    return float(scores.mean())


def _check_metric(metric: str) -> None:
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")


def _score(labels, predictions, metric: str) -> float:
    return mse(labels, predictions) if metric == "mse" else r_squared(labels, predictions)


def _better(candidate: float, incumbent: float, metric: str) -> bool:
    return candidate < incumbent if metric == "mse" else candidate > incumbent


@dataclass(frozen=True)
class GridSpec:
    """Search grids for the smoother; robust mode insists 0 is a c candidate."""

    sigma_values: tuple = DEFAULT_SIGMA_GRID
    c_values: tuple = DEFAULT_C_GRID
    robust: bool = True

    def __post_init__(self):
        sigmas = tuple(float(s) for s in self.sigma_values)
        cs = tuple(float(c) for c in self.c_values)
        if not sigmas or not cs:
            raise ValueError("sigma_values and c_values must be nonempty")
        if any(s <= 0 for s in sigmas):
            raise ValueError("all sigma values must be > 0")
        if any(not (0.0 <= c <= 1.0) for c in cs):
            raise ValueError("all c values must lie in [0, 1]")
        if self.robust and 0.0 not in cs:
            raise ValueError(
                "robust grids must include c = 0 so tuning can fall back to "
                "the unsmoothed predictions"
            )
        object.__setattr__(self, "sigma_values", sigmas)
        object.__setattr__(self, "c_values", cs)


@dataclass(frozen=True)
class TuneReport:
    """Outcome of smoothing-parameter selection plus the held-out score."""

    best_sigma: float
    best_c: float
    validation_scores: dict
    holdout_score: float
    unsmoothed_holdout_score: float
    unsmoothed_validation_score: float
    metric: str


def _shrunk(predictions: np.ndarray, kernel_avg: np.ndarray, c: float) -> np.ndarray:
    if c == 0.0:
        return predictions
    return c * kernel_avg + (1.0 - c) * predictions


def _select(
    validation: PredictionSet, grid: GridSpec, metric: str
) -> tuple[float, float, dict]:
    """Grid-score the validation rows only; ties prefer smaller c, then sigma.

    This stage sees nothing but the validation subset, so holdout labels
    cannot influence the selection.
    """
    scores: dict = {}
    best = None
    sq = pairwise_sq_dists(validation.indices)
    for sigma in grid.sigma_values:
        w = nadaraya_watson_matrix(validation.indices, sigma, sq_dists=sq).weights
        kernel_avg = w @ validation.predictions
        for c in grid.c_values:
            value = _score(
                validation.labels, _shrunk(validation.predictions, kernel_avg, c), metric
            )
            scores[(sigma, c)] = value
            key = (c, sigma)
            if best is None or _better(value, best[0], metric) or (
                value == best[0] and key < best[1]
            ):
                best = (value, key)
    best_c, best_sigma = best[1]
    return best_sigma, best_c, scores


def tune_pes(
    pred_set: PredictionSet,
    split: SplitAssignment,
    grid: GridSpec | None = None,
    metric: str = "mse",
    transductive: bool = True,
) -> TuneReport:
    """Pick (sigma, c) on the validation rows, then score the holdout rows.

    Validation rows are smoothed against each other during selection.  The
    chosen smoother is then rebuilt over validation plus holdout rows (or
    holdout rows alone with transductive=False) and scored on holdout only.
    Holdout labels are read exclusively in that final scoring step.
    """
    _check_metric(metric)
    if grid is None:
        grid = GridSpec()
    if pred_set.labels is None:
        raise ValueError("tuning requires labels on the prediction set")
    split.validate_for(pred_set.n)
    if split.validation_rows.size == 0:
        raise ValueError("tuning requires a nonempty validation split")
    if split.holdout_rows.size == 0:
        raise ValueError("tuning requires a nonempty holdout split")

    validation = pred_set.take(split.validation_rows)
    best_sigma, best_c, scores = _select(validation, grid, metric)
    unsmoothed_validation = _score(validation.labels, validation.predictions, metric)

    if transductive:
        rows = np.concatenate([split.validation_rows, split.holdout_rows])
        offset = split.validation_rows.size
    else:
        rows = split.holdout_rows
        offset = 0
    scope = pred_set.take(rows)
    if best_c == 0.0:
        smoothed = scope.predictions
    else:
        w = nadaraya_watson_matrix(scope.indices, best_sigma).weights
        smoothed = _shrunk(scope.predictions, w @ scope.predictions, best_c)
    holdout_labels = scope.labels[offset:]
    holdout_score = _score(holdout_labels, smoothed[offset:], metric)
    unsmoothed_holdout = _score(holdout_labels, scope.predictions[offset:], metric)
    return TuneReport(
        best_sigma=best_sigma,
        best_c=best_c,
        validation_scores=scores,
        holdout_score=holdout_score,
        unsmoothed_holdout_score=unsmoothed_holdout,
        unsmoothed_validation_score=unsmoothed_validation,
        metric=metric,
    )


@dataclass(frozen=True)
class BaselineTuneReport:
    """Scores for every attempted baseline spec, with failures recorded."""

    specs: tuple
    scores: tuple
    errors: tuple
    best_index: int
    metric: str

    @property
    def best_spec(self) -> BaselineSpec:
        return self.specs[self.best_index]

    @property
    def best_score(self) -> float:
        return self.scores[self.best_index]


def tune_baseline(
    train: IndexedDataset,
    validation: IndexedDataset,
    spec_grid: Sequence[BaselineSpec],
    metric: str = "mse",
) -> BaselineTuneReport:
    """Fit every spec on train, score on validation, keep the best one.

    Specs that fail to fit are skipped and their errors recorded; ties keep
    the earliest spec in grid order.  Raises only if every spec fails.
    """
    _check_metric(metric)
    specs = tuple(spec_grid)
    if not specs:
        raise ValueError("spec_grid must contain at least one BaselineSpec")
    scores: list[float] = []
    errors: list[str | None] = []
    best_index = -1
    for i, spec in enumerate(specs):
        try:
            predicted = fit_and_predict(spec, train, validation)
            value = _score(validation.labels, predicted, metric)
        except (ValueError, np.linalg.LinAlgError) as exc:
            scores.append(float("nan"))
            errors.append(str(exc))
            continue
        scores.append(value)
        errors.append(None)
        if best_index < 0 or _better(value, scores[best_index], metric):
            best_index = i
    if best_index < 0:
        lines = "; ".join(
            f"[{i}] {spec.method}: {err}"
            for i, (spec, err) in enumerate(zip(specs, errors))
        )
        raise ValueError(f"every baseline spec failed to fit: {lines}")
    return BaselineTuneReport(specs, tuple(scores), tuple(errors), best_index, metric)
