"""Latent smooth-signal simulation: noisy features, linear labels, smoothing gains.

The generative process lives on an evenly spaced index grid t in [0, 1]:

    z ~ N(0, K_zz)            latent signal with chosen covariance
    x = z + omega             features, omega iid N(0, sigma_x^2)
    y = c_sig z + mu          labels, mu iid N(0, sigma_y^2)

A slope fit on one draw predicts a fresh draw, and smoothing those
predictions along t recovers part of the feature-noise error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .csvio import format_float, write_table
from .data import CovarianceBundle, _check_symmetric
from .smoothing import nadaraya_watson_matrix, pairwise_sq_dists
from .tuning import GridSpec

__all__ = [
    "RbfCovariance",
    "BlockCovariance",
    "SimConfig",
    "SimResult",
    "index_grid",
    "hidden_covariance",
    "covariance_factor",
    "draw_trial",
    "trial_rng",
    "tls_coefficient",
    "ols_coefficient",
    "fit_coefficient",
    "closed_form_optimal_smoother",
    "asymptotic_mse",
    "model_covariance_bundle",
    "run_sweep",
    "write_sweep_csv",
    "SWEEP_CSV_COLUMNS",
]

_SEED_MASK = (1 << 64) - 1

ESTIMATORS = ("tls", "ols")


@dataclass(frozen=True)
class RbfCovariance:
    """Squared-exponential covariance on the index grid.

    K[i, j] = variance * exp(-(t_i - t_j)^2 / (2 length_scale^2)); the
    length scale defaults to a tenth of the grid span.
    """

    variance: float = 1.0
    length_scale: float | None = None

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError(f"variance must be >= 0, got {self.variance}")
        if self.length_scale is not None and not (self.length_scale > 0):
            raise ValueError(f"length_scale must be > 0, got {self.length_scale}")


@dataclass(frozen=True)
class BlockCovariance:
    """Piecewise-constant signal: contiguous blocks share one latent value."""

    num_blocks: int
    variance: float = 1.0

    def __post_init__(self):
        if self.num_blocks < 1:
            raise ValueError(f"num_blocks must be >= 1, got {self.num_blocks}")
        if self.variance < 0:
            raise ValueError(f"variance must be >= 0, got {self.variance}")


@dataclass(frozen=True)
class SimConfig:
    """One cell of the simulation sweep."""

    n: int
    c_sig: float = 1.0
    sigma_x: float = 0.5
    sigma_y: float = 0.1
    kzz_spec: object = RbfCovariance()
    estimator: str = "tls"
    trials: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.sigma_x < 0 or self.sigma_y < 0:
            raise ValueError("sigma_x and sigma_y must be >= 0")
        if self.estimator not in ESTIMATORS:
            raise ValueError(
                f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}"
            )
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")


@dataclass(frozen=True)
class SimResult:
    """Per-trial MSEs for one config plus the matching analytic values."""

    config: SimConfig
    mse_unsmoothed: tuple
    mse_oracle_smoothed: tuple
    mse_pes_smoothed: tuple
    predicted_unsmoothed: float
    predicted_smoothed: float
    floor_sigma_y_sq: float
    error: str | None = None


def index_grid(n: int) -> np.ndarray:
    """Evenly spaced index variables on [0, 1]."""
    return np.linspace(0.0, 1.0, n)


def hidden_covariance(cfg: SimConfig) -> np.ndarray:
    """Materialize K_zz for the config's latent-signal specification."""
    n = cfg.n
    spec = cfg.kzz_spec
    if isinstance(spec, RbfCovariance):
        t = index_grid(n)
        span = float(t[-1] - t[0])
        scale = spec.length_scale if spec.length_scale is not None else 0.1 * span
        d2 = (t[:, None] - t[None, :]) ** 2
        return spec.variance * np.exp(d2 / (-2.0 * scale**2))
    if isinstance(spec, BlockCovariance):
        out = np.zeros((n, n))
        for block in np.array_split(np.arange(n), spec.num_blocks):
            out[np.ix_(block, block)] = spec.variance
        return out
    mat = np.asarray(spec, dtype=float)
    if mat.shape != (n, n):
        raise ValueError(
            f"kzz_spec matrix has shape {mat.shape}, config expects {(n, n)}"
        )
    if not np.all(np.isfinite(mat)):
        raise ValueError("kzz_spec matrix contains non-finite entries")
    _check_symmetric(mat, "kzz_spec")
    return mat


def covariance_factor(k_zz: np.ndarray) -> np.ndarray:
    """Cholesky factor of K_zz after a trace-scaled diagonal jitter.

    The jitter is 1e-10 * tr(K_zz) / n.  A zero matrix factors to zero; any
    matrix that is still not positive definite after jitter is rejected.
    """
    k = np.asarray(k_zz, dtype=float)
    n = k.shape[0]
    trace = float(np.trace(k))
    if trace == 0.0:
        if np.any(k != 0.0):
            raise ValueError(
                "K_zz has zero trace but nonzero entries, so it is not PSD"
            )
        return np.zeros_like(k)
    jitter = 1e-10 * trace / n
    try:
        return np.linalg.cholesky(k + jitter * np.eye(n))
    except np.linalg.LinAlgError:
        raise ValueError(
            f"K_zz is not positive semidefinite even after jitter {jitter:.3e}"
        ) from None


def draw_trial(
    cfg: SimConfig, rng: np.random.Generator, factor: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One draw (x, y, z) of the process; consumes exactly 3n normals."""
    if factor is None:
        factor = covariance_factor(hidden_covariance(cfg))
    z = factor @ rng.standard_normal(cfg.n)
    x = z + cfg.sigma_x * rng.standard_normal(cfg.n)
    y = cfg.c_sig * z + cfg.sigma_y * rng.standard_normal(cfg.n)
    return x, y, z


def trial_rng(cfg: SimConfig, trial: int) -> np.random.Generator:
    """The RNG stream for one (config seed, trial) pair, order independent."""
    return np.random.default_rng(
        np.random.SeedSequence((cfg.seed & _SEED_MASK, trial))
    )


def _moments(u: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    return float(u @ u), float(u @ y), float(y @ y)


def tls_coefficient(x, y, noise_ratio: float = 1.0) -> float:
    """Slope of y on x minimizing orthogonal distance of [x y] to a line.

    Equivalent to the smallest right-singular direction of the n-by-2 matrix
    [x y], written in closed form from the sample second moments.  The
    default treats both coordinates' errors as equally sized; when the error
    variance ratio Var(y noise) / Var(x noise) is known, passing it rescales
    the problem so the estimate stays consistent under unequal noise.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape or x.size < 2:
        raise ValueError("x and y must be equal-length vectors with n >= 2")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("x and y must be finite")
    if noise_ratio < 0:
        raise ValueError(f"noise_ratio must be >= 0, got {noise_ratio}")
    if noise_ratio == 0.0:
        # all error in x: invert the regression of x on y
        sxy = float(x @ y)
        if sxy == 0.0:
            raise ValueError(
                "slope is undefined: x and y are uncorrelated in sample with "
                "noise_ratio = 0"
            )
        return float(y @ y) / sxy
    scale = float(np.sqrt(noise_ratio))
    a, b, d = _moments(scale * x, y)
    if a == 0.0 and d == 0.0:
        raise ValueError("x and y are identically zero; the slope is undefined")
    half_gap = np.hypot(a - d, 2.0 * b) / 2.0
    lam_min = (a + d) / 2.0 - half_gap
    denom = a - lam_min
    if denom <= 1e-14 * max(a, d):
        raise ValueError(
            "the best-fitting direction is vertical (zero x component); "
            "the slope of y on x is undefined"
        )
    return scale * (b / denom)


def ols_coefficient(x, y) -> float:
    """Least-squares slope through the origin, x^T y / x^T x."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape or x.size < 1:
        raise ValueError("x and y must be equal-length vectors")
    sxx = float(x @ x)
    if sxx == 0.0:
        raise ValueError("x is identically zero; the slope is undefined")
    return float(x @ y) / sxx


def fit_coefficient(cfg: SimConfig, x: np.ndarray, y: np.ndarray) -> float:
    """The config's slope estimate for one training draw.

    The orthogonal-distance fit uses the known noise variance ratio
    (sigma_y / sigma_x)^2, which keeps it consistent for any noise sizes;
    with sigma_x = 0 the features are exact and least squares is already
    consistent.
    """
    if cfg.estimator == "ols" or cfg.sigma_x == 0.0:
        return ols_coefficient(x, y)
    return tls_coefficient(x, y, noise_ratio=(cfg.sigma_y / cfg.sigma_x) ** 2)


def closed_form_optimal_smoother(
    cfg: SimConfig, e_chat: float | None = None, e_chat_sq: float | None = None
) -> np.ndarray:
    """The model's optimal linear smoother for slope-estimate predictions.

    S = (c_sig E[chat] / E[chat^2]) K_zz (K_zz + sigma_x^2 I)^{-1}.  For the
    consistent orthogonal fit the slope moments default to (c_sig, c_sig^2);
    for least squares pass Monte-Carlo estimates.
    """
    if e_chat is None and e_chat_sq is None and cfg.estimator == "tls":
        e_chat, e_chat_sq = cfg.c_sig, cfg.c_sig**2
    if e_chat is None or e_chat_sq is None:
        raise ValueError(
            "e_chat and e_chat_sq are required unless the estimator is the "
            "consistent orthogonal fit"
        )
    if not (e_chat_sq > 0):
        raise ValueError(f"e_chat_sq must be > 0, got {e_chat_sq}")
    k_zz = hidden_covariance(cfg)
    system = k_zz + cfg.sigma_x**2 * np.eye(cfg.n)
    try:
        solved = cho_solve(cho_factor(system, lower=True), k_zz)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError(
            "K_zz + sigma_x^2 I is singular; the closed-form smoother needs it "
            "positive definite"
        ) from None
    return (cfg.c_sig * e_chat / e_chat_sq) * solved.T


def _asymptotic_formulas(
    k_zz: np.ndarray, c_sig: float, sigma_x: float, sigma_y: float, n: int
) -> tuple[float, float]:
    floor = sigma_y**2
    if sigma_x == 0.0:
        return floor, floor
    unsmoothed = floor + c_sig**2 * sigma_x**2
    eigs = np.linalg.eigvalsh((k_zz + k_zz.T) / 2.0)
    trace_term = float(np.sum(1.0 / (eigs / sigma_x**2 + 1.0)))
    smoothed = floor + c_sig**2 * sigma_x**2 * (1.0 - trace_term / n)
    return unsmoothed, smoothed


def asymptotic_mse(cfg: SimConfig) -> tuple[float, float]:
    """Large-sample unsmoothed and oracle-smoothed MSE for consistent fits.

    unsmoothed = sigma_y^2 + c_sig^2 sigma_x^2 and
    smoothed = sigma_y^2 + c_sig^2 sigma_x^2 (1 - tr((K_zz / sigma_x^2 +
    I)^{-1}) / n); both collapse to sigma_y^2 when sigma_x = 0.
    """
    if cfg.estimator != "tls":
        raise ValueError(
            "the closed-form MSE values assume the consistent orthogonal fit; "
            "got estimator 'ols'"
        )
    return _asymptotic_formulas(
        hidden_covariance(cfg), cfg.c_sig, cfg.sigma_x, cfg.sigma_y, cfg.n
    )


def model_covariance_bundle(
    cfg: SimConfig, e_chat: float | None = None, e_chat_sq: float | None = None
) -> CovarianceBundle:
    """The exact covariance bundle of (labels, prediction errors) for the model.

    Predictions on a fresh draw are chat * x with chat independent of the
    draw, so every block is a closed form in K_zz and the noise scales.
    """
    if e_chat is None and e_chat_sq is None and cfg.estimator == "tls":
        e_chat, e_chat_sq = cfg.c_sig, cfg.c_sig**2
    if e_chat is None or e_chat_sq is None:
        raise ValueError("e_chat and e_chat_sq are required for this bundle")
    k_zz = hidden_covariance(cfg)
    eye = np.eye(cfg.n)
    c = cfg.c_sig
    k_yy = c**2 * k_zz + cfg.sigma_y**2 * eye
    k_xx = k_zz + cfg.sigma_x**2 * eye
    k_ee = e_chat_sq * k_xx - 2.0 * c * e_chat * k_zz + k_yy
    k_ye = c * e_chat * k_zz - k_yy
    return CovarianceBundle(k_yy=k_yy, k_ee=k_ee, k_ye=k_ye)


def _tune_cell(
    yhat_val: np.ndarray,
    y_val: np.ndarray,
    yhat_test: np.ndarray,
    weight_by_sigma: dict,
    c_values: Sequence[float],
) -> np.ndarray:
    """Pick (sigma, c) by validation MSE, then smooth the test predictions."""
    best = None
    for sigma, w in weight_by_sigma.items():
        averaged = w @ yhat_val
        for c in c_values:
            smoothed = yhat_val if c == 0.0 else c * averaged + (1.0 - c) * yhat_val
            err = smoothed - y_val
            key = (float(np.mean(err * err)), c, sigma)
            if best is None or key < best:
                best = key
    _, c, sigma = best
    if c == 0.0:
        return yhat_test
    return c * (weight_by_sigma[sigma] @ yhat_test) + (1.0 - c) * yhat_test


def _run_cell(cfg: SimConfig, pes_grid: GridSpec) -> SimResult:
    k_zz = hidden_covariance(cfg)
    factor = covariance_factor(k_zz)
    draws = []
    for k in range(cfg.trials):
        rng = trial_rng(cfg, k)
        train = draw_trial(cfg, rng, factor)
        val = draw_trial(cfg, rng, factor)
        test = draw_trial(cfg, rng, factor)
        draws.append((train, val, test))
    chats = [fit_coefficient(cfg, x, y) for (x, y, _), _, _ in draws]
    if cfg.estimator == "tls":
        e_chat, e_chat_sq = cfg.c_sig, cfg.c_sig**2
    else:
        arr = np.asarray(chats)
        e_chat, e_chat_sq = float(arr.mean()), float(np.mean(arr**2))
    s_star = closed_form_optimal_smoother(cfg, e_chat, e_chat_sq)
    predicted_u, predicted_s = _asymptotic_formulas(
        k_zz, cfg.c_sig, cfg.sigma_x, cfg.sigma_y, cfg.n
    )
    t = index_grid(cfg.n)
    d2 = pairwise_sq_dists(t)
    weight_by_sigma = {
        sigma: nadaraya_watson_matrix(t, sigma, sq_dists=d2).weights
        for sigma in pes_grid.sigma_values
    }
    mse_u, mse_oracle, mse_pes = [], [], []
    for chat, (_, (x_val, y_val, _), (x_test, y_test, _)) in zip(chats, draws):
        yhat_val = chat * x_val
        yhat_test = chat * x_test
        err = yhat_test - y_test
        mse_u.append(float(np.mean(err * err)))
        err = s_star @ yhat_test - y_test
        mse_oracle.append(float(np.mean(err * err)))
        smoothed = _tune_cell(
            yhat_val, y_val, yhat_test, weight_by_sigma, pes_grid.c_values
        )
        err = smoothed - y_test
        mse_pes.append(float(np.mean(err * err)))
    return SimResult(
        config=cfg,
        mse_unsmoothed=tuple(mse_u),
        mse_oracle_smoothed=tuple(mse_oracle),
        mse_pes_smoothed=tuple(mse_pes),
        predicted_unsmoothed=predicted_u,
        predicted_smoothed=predicted_s,
        floor_sigma_y_sq=cfg.sigma_y**2,
    )


def run_sweep(
    grid: Sequence[SimConfig], pes_grid: GridSpec | None = None
) -> list[SimResult]:
    """Run every config; per-config failures are recorded, not raised.

    Each trial draws an independent training, validation, and test trio from
    its own (seed, trial) RNG stream, so results for a config do not depend
    on its position in the grid or on execution order.
    """
    if pes_grid is None:
        pes_grid = GridSpec()
    results = []
    for cfg in grid:
        try:
            results.append(_run_cell(cfg, pes_grid))
        except (ValueError, np.linalg.LinAlgError) as exc:
            results.append(
                SimResult(
                    config=cfg,
                    mse_unsmoothed=(),
                    mse_oracle_smoothed=(),
                    mse_pes_smoothed=(),
                    predicted_unsmoothed=float("nan"),
                    predicted_smoothed=float("nan"),
                    floor_sigma_y_sq=cfg.sigma_y**2,
                    error=str(exc),
                )
            )
    return results


SWEEP_CSV_COLUMNS = (
    "sigma_x",
    "sigma_y",
    "c_sig",
    "n",
    "estimator",
    "mse_unsmoothed_mean",
    "mse_unsmoothed_min",
    "mse_unsmoothed_max",
    "mse_oracle_mean",
    "mse_oracle_min",
    "mse_oracle_max",
    "mse_pes_mean",
    "mse_pes_min",
    "mse_pes_max",
    "predicted_unsmoothed",
    "predicted_smoothed",
    "floor",
    "error",
)


def _stats(values: tuple) -> list[str]:
    if not values:
        return ["", "", ""]
    arr = np.asarray(values)
    return [
        format_float(arr.mean()),
        format_float(arr.min()),
        format_float(arr.max()),
    ]


def write_sweep_csv(results: Sequence[SimResult], path: str) -> None:
    """Serialize sweep results, one row per config."""
    rows = []
    for res in results:
        cfg = res.config
        row = [
            format_float(cfg.sigma_x),
            format_float(cfg.sigma_y),
            format_float(cfg.c_sig),
            str(cfg.n),
            cfg.estimator,
        ]
        row += _stats(res.mse_unsmoothed)
        row += _stats(res.mse_oracle_smoothed)
        row += _stats(res.mse_pes_smoothed)
        if res.error is None:
            row += [
                format_float(res.predicted_unsmoothed),
                format_float(res.predicted_smoothed),
            ]
        else:
            row += ["", ""]
        row.append(format_float(res.floor_sigma_y_sq))
        row.append("" if res.error is None else res.error)
        rows.append(row)
    write_table(path, list(SWEEP_CSV_COLUMNS), rows)
