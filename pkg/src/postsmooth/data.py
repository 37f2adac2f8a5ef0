"""Core containers: datasets, prediction sets, splits, covariance bundles."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

__all__ = [
    "IndexedDataset",
    "PredictionSet",
    "SplitAssignment",
    "CovarianceBundle",
    "residuals",
    "empirical_cross_correlation",
]


def _as_matrix(values, name: str) -> np.ndarray:
    """Coerce to a read-only float matrix of shape (n, d), rejecting NaN/Inf."""
    arr = np.array(values, dtype=float, copy=True)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 1- or 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} must contain at least one row")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries (NaN or Inf)")
    arr.flags.writeable = False
    return arr


def _as_square(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries (NaN or Inf)")
    arr.flags.writeable = False
    return arr


def _check_symmetric(mat: np.ndarray, name: str, rel_tol: float = 1e-10) -> None:
    scale = np.abs(mat).max()
    gap = np.abs(mat - mat.T).max()
    if gap > rel_tol * max(scale, 1e-300):
        raise ValueError(
            f"{name} is not symmetric: max asymmetry {gap:.3e} exceeds "
            f"relative tolerance {rel_tol:g} at scale {scale:.3e}"
        )


def _check_psd(mat: np.ndarray, name: str, rel_tol: float = 1e-8) -> None:
    eigs = np.linalg.eigvalsh((mat + mat.T) / 2.0)
    largest = max(eigs[-1], 0.0)
    if eigs[0] < -rel_tol * max(largest, 1e-300):
        raise ValueError(
            f"{name} is not positive semidefinite: smallest eigenvalue "
            f"{eigs[0]:.3e} (largest {largest:.3e})"
        )


def _as_rows(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.intp, copy=True)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-dimensional list of row indices")
    if arr.size and arr.min() < 0:
        raise ValueError(f"{name} contains negative row indices")
    if np.unique(arr).size != arr.size:
        raise ValueError(f"{name} contains duplicate row indices")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class IndexedDataset:
    """Rows of features, labels, and the index variables they sit on.

    Index variables are the structural coordinates (time, location, frame
    number) along which predictions may later be smoothed.
    """

    features: np.ndarray
    labels: np.ndarray
    indices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "features", _as_matrix(self.features, "features"))
        object.__setattr__(self, "labels", _as_matrix(self.labels, "labels"))
        object.__setattr__(self, "indices", _as_matrix(self.indices, "indices"))
        n = self.features.shape[0]
        if self.labels.shape[0] != n or self.indices.shape[0] != n:
            raise ValueError(
                "features, labels and indices must have the same number of rows: "
                f"{n}, {self.labels.shape[0]}, {self.indices.shape[0]}"
            )

    @property
    def n(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class PredictionSet:
    """Precomputed predictions attached to index variables, labels optional."""

    predictions: np.ndarray
    indices: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "predictions", _as_matrix(self.predictions, "predictions")
        )
        object.__setattr__(self, "indices", _as_matrix(self.indices, "indices"))
        n = self.predictions.shape[0]
        if self.indices.shape[0] != n:
            raise ValueError(
                "predictions and indices must have the same number of rows: "
                f"{n} vs {self.indices.shape[0]}"
            )
        if self.labels is not None:
            object.__setattr__(self, "labels", _as_matrix(self.labels, "labels"))
            if self.labels.shape != self.predictions.shape:
                raise ValueError(
                    "labels must match predictions in shape: "
                    f"{self.labels.shape} vs {self.predictions.shape}"
                )

    @property
    def n(self) -> int:
        return self.predictions.shape[0]

    @property
    def d_y(self) -> int:
        return self.predictions.shape[1]

    def take(self, rows) -> "PredictionSet":
        """Subset by row indices, preserving the given order."""
        rows = np.asarray(rows, dtype=np.intp)
        labels = None if self.labels is None else self.labels[rows]
        return PredictionSet(self.predictions[rows], self.indices[rows], labels)

    def strip_labels(self) -> "PredictionSet":
        """A view of the same rows with labels removed."""
        return PredictionSet(self.predictions, self.indices, None)


@dataclass(frozen=True)
class SplitAssignment:
    """Disjoint train / validation / holdout row index sets."""

    train_rows: np.ndarray
    validation_rows: np.ndarray
    holdout_rows: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "train_rows", _as_rows(self.train_rows, "train_rows"))
        object.__setattr__(
            self, "validation_rows", _as_rows(self.validation_rows, "validation_rows")
        )
        object.__setattr__(
            self, "holdout_rows", _as_rows(self.holdout_rows, "holdout_rows")
        )
        combined = np.concatenate(
            [self.train_rows, self.validation_rows, self.holdout_rows]
        )
        if np.unique(combined).size != combined.size:
            raise ValueError("train, validation and holdout rows must be disjoint")

    def validate_for(self, n: int) -> None:
        """Check every referenced row exists in a table of n rows."""
        for name in ("train_rows", "validation_rows", "holdout_rows"):
            rows = getattr(self, name)
            if rows.size and rows.max() >= n:
                raise ValueError(
                    f"{name} references row {int(rows.max())} but only {n} rows exist"
                )


@dataclass(frozen=True)
class CovarianceBundle:
    """Second-moment description of labels y and prediction errors e.

    k_yy[t, s] = E[y(t) y(s)], k_ee[t, s] = E[e(t) e(s)] and
    k_ye[t, s] = E[y(t) e(s)], all over the same n index points.
    """

    k_yy: np.ndarray
    k_ee: np.ndarray
    k_ye: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "k_yy", _as_square(self.k_yy, "k_yy"))
        object.__setattr__(self, "k_ee", _as_square(self.k_ee, "k_ee"))
        object.__setattr__(self, "k_ye", _as_square(self.k_ye, "k_ye"))
        n = self.k_yy.shape[0]
        if self.k_ee.shape[0] != n or self.k_ye.shape[0] != n:
            raise ValueError(
                "k_yy, k_ee and k_ye must share one size: "
                f"{n}, {self.k_ee.shape[0]}, {self.k_ye.shape[0]}"
            )
        _check_symmetric(self.k_yy, "k_yy")
        _check_symmetric(self.k_ee, "k_ee")
        _check_psd(self.k_yy, "k_yy")
        _check_psd(self.k_ee, "k_ee")

    @property
    def n(self) -> int:
        return self.k_yy.shape[0]

    @cached_property
    def k_yhat_yhat(self) -> np.ndarray:
        """Covariance of the noisy predictions yhat = y + e."""
        out = self.k_yy + self.k_ye + self.k_ye.T + self.k_ee
        out.flags.writeable = False
        return out

    @cached_property
    def k_yhat_y(self) -> np.ndarray:
        """Cross-covariance k[t, s] = E[yhat(t) y(s)]."""
        out = self.k_yy + self.k_ye.T
        out.flags.writeable = False
        return out


def residuals(pred_set: PredictionSet) -> np.ndarray:
    """Prediction errors, predictions minus labels."""
    if pred_set.labels is None:
        raise ValueError("residuals require labels, but this PredictionSet has none")
    return pred_set.predictions - pred_set.labels


def empirical_cross_correlation(
    a_trials: Sequence[np.ndarray], b_trials: Sequence[np.ndarray]
) -> np.ndarray:
    """Average outer product E[a b^T] estimated over paired trials.

    Each trial is a length-n vector (or an (n, d) matrix, in which case the
    products sum over the d columns).
    """
    if len(a_trials) == 0 or len(b_trials) == 0:
        raise ValueError("at least one trial is required")
    if len(a_trials) != len(b_trials):
        raise ValueError(
            f"trial counts differ: {len(a_trials)} vs {len(b_trials)}"
        )
    total = None
    for k, (a, b) in enumerate(zip(a_trials, b_trials)):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        if b.ndim == 1:
            b = b.reshape(-1, 1)
        if a.ndim != 2 or b.ndim != 2 or a.shape != b.shape:
            raise ValueError(
                f"trial {k} has mismatched shapes {a.shape} vs {b.shape}"
            )
        prod = a @ b.T
        if total is None:
            total = prod
        elif total.shape != prod.shape:
            raise ValueError(
                f"trial {k} has shape {a.shape}, inconsistent with earlier trials"
            )
        else:
            total += prod
    return total / len(a_trials)
