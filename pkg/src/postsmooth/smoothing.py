"""Kernel weight matrices, shrinkage smoothers, and the optimal linear smoother."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CovarianceBundle, PredictionSet

__all__ = [
    "SmootherSpec",
    "WeightMatrix",
    "gaussian_kernel",
    "pairwise_sq_dists",
    "nadaraya_watson_matrix",
    "shrinkage_smoother",
    "apply_smoother",
    "smooth_predictions",
    "optimal_smoother",
]

MAX_CONDITION_NUMBER = 1e12


@dataclass(frozen=True)
class SmootherSpec:
    """Bandwidth and mixing weight for a shrinkage-smoothed kernel average."""

    bandwidth_sigma: float
    mixing_c: float

    def __post_init__(self):
        if not (self.bandwidth_sigma > 0):
            raise ValueError(f"bandwidth_sigma must be > 0, got {self.bandwidth_sigma}")
        if not (0.0 <= self.mixing_c <= 1.0):
            raise ValueError(f"mixing_c must lie in [0, 1], got {self.mixing_c}")


@dataclass(frozen=True)
class WeightMatrix:
    """A right-stochastic weighting of rows onto rows."""

    weights: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        arr = np.array(self.weights, dtype=float, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"weights must be square, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("weights contain non-finite entries")
        if arr.min() < 0:
            raise ValueError(f"weights must be nonnegative, min is {arr.min():.3e}")
        row_sums = arr.sum(axis=1)
        worst = np.abs(row_sums - 1.0).max()
        if worst > 1e-12:
            raise ValueError(
                f"rows must sum to 1 within 1e-12, worst deviation {worst:.3e}"
            )
        if self.kind not in ("nadaraya_watson", "custom"):
            raise ValueError(f"unknown weight matrix kind {self.kind!r}")
        arr.flags.writeable = False
        object.__setattr__(self, "weights", arr)

    @property
    def n(self) -> int:
        return self.weights.shape[0]


def gaussian_kernel(t_i, t_j, sigma: float) -> float:
    """exp(-||t_i - t_j||^2 / (2 sigma^2)) for two index points."""
    if not (sigma > 0):
        raise ValueError(f"sigma must be > 0, got {sigma}")
    diff = np.asarray(t_i, dtype=float).ravel() - np.asarray(t_j, dtype=float).ravel()
    return float(np.exp(-np.dot(diff, diff) / (2.0 * sigma**2)))


def pairwise_sq_dists(points: np.ndarray) -> np.ndarray:
    """Squared euclidean distances between all row pairs of an (n, d) array."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    sq = np.sum(pts * pts, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def nadaraya_watson_matrix(indices, sigma: float, *, sq_dists=None) -> WeightMatrix:
    """Row-normalized Gaussian kernel weights over index points.

    The self term k(t_i, t_i) = 1 is kept, so each row of the raw kernel sums
    to at least 1 and the matrix tends to the identity as sigma -> 0 for
    distinct points.  Precomputed squared distances may be passed to amortize
    repeated calls over one index set.
    """
    if not (sigma > 0):
        raise ValueError(f"sigma must be > 0, got {sigma}")
    d2 = pairwise_sq_dists(indices) if sq_dists is None else sq_dists
    kernel = np.exp(d2 / (-2.0 * sigma**2))
    kernel /= kernel.sum(axis=1, keepdims=True)
    return WeightMatrix(kernel, kind="nadaraya_watson")


def _weights_array(weights) -> np.ndarray:
    if isinstance(weights, WeightMatrix):
        return weights.weights
    arr = np.asarray(weights, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"weights must be square, got shape {arr.shape}")
    return arr


def shrinkage_smoother(weights, mixing_c: float) -> np.ndarray:
    """Convex mix c * W + (1 - c) * I between a weight matrix and identity."""
    if not (0.0 <= mixing_c <= 1.0):
        raise ValueError(f"mixing_c must lie in [0, 1], got {mixing_c}")
    w = _weights_array(weights)
    out = mixing_c * w + (1.0 - mixing_c) * np.eye(w.shape[0])
    return out


def apply_smoother(smoother: np.ndarray, pred_set: PredictionSet) -> PredictionSet:
    """Left-multiply predictions by a smoothing matrix, keeping labels/indices."""
    s = np.asarray(smoother, dtype=float)
    if s.ndim != 2 or s.shape[1] != pred_set.n:
        raise ValueError(
            f"smoother shape {s.shape} does not match {pred_set.n} prediction rows"
        )
    return PredictionSet(s @ pred_set.predictions, pred_set.indices, pred_set.labels)


def _smooth_block(pred: np.ndarray, indices: np.ndarray, spec: SmootherSpec) -> np.ndarray:
    w = nadaraya_watson_matrix(indices, spec.bandwidth_sigma).weights
    return spec.mixing_c * (w @ pred) + (1.0 - spec.mixing_c) * pred


def smooth_predictions(
    pred_set: PredictionSet, spec: SmootherSpec, groups=None
) -> PredictionSet:
    """Nadaraya-Watson shrinkage smoothing, optionally per disjoint group.

    With groups given (one hashable tag per row), rows are smoothed only
    against rows sharing their tag.  mixing_c = 0 returns the predictions
    bit-for-bit unchanged.
    """
    if spec.mixing_c == 0.0:
        return PredictionSet(pred_set.predictions, pred_set.indices, pred_set.labels)
    if groups is None:
        smoothed = _smooth_block(pred_set.predictions, pred_set.indices, spec)
    else:
        groups = np.asarray(groups)
        if groups.shape[0] != pred_set.n:
            raise ValueError(
                f"groups has {groups.shape[0]} entries for {pred_set.n} rows"
            )
        smoothed = np.empty_like(pred_set.predictions)
        for tag in np.unique(groups):
            rows = np.flatnonzero(groups == tag)
            smoothed[rows] = _smooth_block(
                pred_set.predictions[rows], pred_set.indices[rows], spec
            )
    return PredictionSet(smoothed, pred_set.indices, pred_set.labels)


def optimal_smoother(bundle: CovarianceBundle) -> np.ndarray:
    """MSE-optimal linear map of noisy predictions onto labels.

    Returns S = K_yhat_y^T K_yhat_yhat^{-1}, equivalently
    I - (K_ee + K_ye)^T K_yhat_yhat^{-1}.  Requires the prediction covariance
    K_yhat_yhat to be positive definite.
    """
    k_pred = bundle.k_yhat_yhat
    cond = np.linalg.cond((k_pred + k_pred.T) / 2.0)
    if not np.isfinite(cond) or cond > MAX_CONDITION_NUMBER:
        raise np.linalg.LinAlgError(
            "prediction covariance k_yhat_yhat must be positive definite, but its "
            f"condition number is {cond:.3e} (limit {MAX_CONDITION_NUMBER:.1e})"
        )
    return np.linalg.solve(k_pred, bundle.k_yhat_y).T
