"""When does smoothing help: error-smoothness ratios, mixing weights, bounds."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .data import CovarianceBundle
from .smoothing import optimal_smoother, _weights_array

__all__ = [
    "GammaBeta",
    "estimate_gamma_beta",
    "smoothing_gap",
    "beta_upper_bound",
    "optimal_mixing_weight",
    "mse_change_upper_bound",
    "expected_mse_reduction",
]

Trial = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class GammaBeta:
    """Trial-averaged ratios describing how a weight matrix treats errors.

    gamma is E[e^T W e] / E[||e||^2]: how much of the error survives
    weighting.  beta is E[e^T (W - I) y] / E[||e||^2]: how strongly the
    weighting distorts labels in directions correlated with the error.
    mean_sq_err is E[||e||^2] itself (summed over coordinates).
    """

    gamma: float
    beta: float
    mean_sq_err: float
    n_trials: int = 1

    def __post_init__(self):
        if not np.isfinite(self.gamma) or not np.isfinite(self.beta):
            raise ValueError("gamma and beta must be finite")
        if not (self.mean_sq_err > 0):
            raise ValueError(f"mean_sq_err must be > 0, got {self.mean_sq_err}")

    @property
    def applicable(self) -> bool:
        """Whether gamma + beta < 1, the precondition for a guaranteed gain."""
        return self.gamma + self.beta < 1.0


def _trial_pair(trial: Trial, k: int, n: int) -> Tuple[np.ndarray, np.ndarray]:
    y, yhat = trial
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.ndim == 1:
        y = y.reshape(-1, 1)
    if yhat.ndim == 1:
        yhat = yhat.reshape(-1, 1)
    if y.shape != yhat.shape or y.shape[0] != n:
        raise ValueError(
            f"trial {k}: labels {y.shape} and predictions {yhat.shape} must both "
            f"have {n} rows"
        )
    return y, yhat


def estimate_gamma_beta(weights, trials: Sequence[Trial]) -> GammaBeta:
    """Estimate gamma and beta by averaging over (labels, predictions) trials."""
    w = _weights_array(weights)
    n = w.shape[0]
    if len(trials) == 0:
        raise ValueError("at least one trial is required")
    gamma_num = beta_num = err_sq = 0.0
    for k, trial in enumerate(trials):
        y, yhat = _trial_pair(trial, k, n)
        err = yhat - y
        gamma_num += float(np.sum(err * (w @ err)))
        beta_num += float(np.sum(err * (w @ y - y)))
        err_sq += float(np.sum(err * err))
    m = len(trials)
    if err_sq == 0.0:
        raise ValueError(
            "all residuals are zero across trials; gamma and beta are undefined "
            "when E[||e||^2] = 0"
        )
    return GammaBeta(gamma_num / err_sq, beta_num / err_sq, err_sq / m, m)


def smoothing_gap(weights, trials: Sequence[Trial]) -> float:
    """Trial average of ||W yhat - y||^2, the fully smoothed squared error."""
    w = _weights_array(weights)
    n = w.shape[0]
    if len(trials) == 0:
        raise ValueError("at least one trial is required")
    total = 0.0
    for k, trial in enumerate(trials):
        y, yhat = _trial_pair(trial, k, n)
        diff = w @ yhat - y
        total += float(np.sum(diff * diff))
    return total / len(trials)


def beta_upper_bound(weights, trials: Sequence[Trial]) -> float:
    """Cauchy-Schwarz cap on beta: sqrt(E||(W - I) y||^2 / E||e||^2).

    Picking a weighting whose cap is at most c certifies beta <= c.
    """
    w = _weights_array(weights)
    n = w.shape[0]
    if len(trials) == 0:
        raise ValueError("at least one trial is required")
    distort = err_sq = 0.0
    for k, trial in enumerate(trials):
        y, yhat = _trial_pair(trial, k, n)
        wy = w @ y - y
        distort += float(np.sum(wy * wy))
        err = yhat - y
        err_sq += float(np.sum(err * err))
    if err_sq == 0.0:
        raise ValueError("all residuals are zero across trials; the cap is undefined")
    return float(np.sqrt(distort / err_sq))


def _effective_gamma(gb: GammaBeta, include_beta: bool) -> float:
    g = gb.gamma + gb.beta if include_beta else gb.gamma
    if g >= 1.0:
        label = "gamma + beta" if include_beta else "gamma"
        raise ValueError(
            f"{label} must be < 1 for a guaranteed improvement, got {g:.6g}"
        )
    return g


def optimal_mixing_weight(
    gb: GammaBeta, smoothed_mse_gap: float, include_beta: bool = True
) -> float:
    """Mixing weight minimizing the guaranteed-change bound, clamped to (0, 1].

    c* = (1 - g) E[||e||^2] / (E[||W yhat - y||^2] + 2 (1 - g) E[||e||^2]),
    with g = gamma + beta by default (gamma alone with include_beta=False).
    The unclamped value lies in (0, 0.5] whenever the gap is nonnegative.
    """
    if not (smoothed_mse_gap >= 0):
        raise ValueError(f"smoothed_mse_gap must be >= 0, got {smoothed_mse_gap}")
    g = _effective_gamma(gb, include_beta)
    slack = (1.0 - g) * gb.mean_sq_err
    return min(slack / (smoothed_mse_gap + 2.0 * slack), 1.0)


def mse_change_upper_bound(
    gb: GammaBeta, smoothed_mse_gap: float, n: int, include_beta: bool = True
) -> float:
    """Guaranteed per-sample change in expected MSE at the optimal mixing weight.

    Returns -(1 - g)^2 E[||e||^2]^2 / (n (E[||W yhat - y||^2] + 2 (1 - g)
    E[||e||^2])), which is strictly negative: expected MSE after shrinkage
    smoothing at c* sits at or below this amount relative to the unsmoothed
    predictions.
    """
    if not (smoothed_mse_gap >= 0):
        raise ValueError(f"smoothed_mse_gap must be >= 0, got {smoothed_mse_gap}")
    if n <= 0:
        raise ValueError(f"n must be a positive integer, got {n}")
    g = _effective_gamma(gb, include_beta)
    slack = (1.0 - g) * gb.mean_sq_err
    return -((1.0 - g) ** 2) * gb.mean_sq_err**2 / (
        n * (smoothed_mse_gap + 2.0 * slack)
    )


def expected_mse_reduction(bundle: CovarianceBundle, n: int | None = None) -> float:
    """Expected per-sample MSE drop from applying the optimal linear smoother.

    Computed as (1/n) || (I - S*) L ||_F^2 with L the Cholesky factor of
    K_yhat_yhat, which equals E[||yhat - y||^2 - ||S* yhat - y||^2] / n and is
    nonnegative by construction.
    """
    if n is None:
        n = bundle.n
    if n <= 0:
        raise ValueError(f"n must be a positive integer, got {n}")
    s_star = optimal_smoother(bundle)
    k_pred = (bundle.k_yhat_yhat + bundle.k_yhat_yhat.T) / 2.0
    try:
        chol = cholesky(k_pred, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "k_yhat_yhat must be positive definite to evaluate the reduction"
        ) from exc
    gap = (np.eye(bundle.n) - s_star) @ chol
    return float(np.sum(gap * gap)) / n
