"""Reference predictors: ridge, random features, GP mean, LapRLS, HEM, shrinkage."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.sparse.csgraph import connected_components

from .data import IndexedDataset, PredictionSet
from .smoothing import pairwise_sq_dists

__all__ = [
    "BaselineSpec",
    "LinearModel",
    "RandomFeatureModel",
    "GaussianProcessMean",
    "KernelExpansion",
    "fit_ridge",
    "random_feature_map",
    "fit_random_features",
    "fit_gpr_mean",
    "fit_laprls",
    "fit_hem",
    "shrink_to_mean",
    "fit_and_predict",
    "default_grid",
]

METHODS = ("ridge", "random_features", "gpr", "laprls", "hem", "shrink_to_mean")

_REQUIRED_PARAMS = {
    "ridge": ("lambda",),
    "random_features": ("num_features", "sigma_rf", "lambda"),
    "gpr": ("alpha", "sigma_const", "sigma_gpr"),
    "laprls": ("lambda_ridge", "lambda_lap", "sigma_graph"),
    "hem": ("sigma_graph", "eta"),
    "shrink_to_mean": ("delta",),
}

MAX_CONDITION_NUMBER = 1e12


@dataclass(frozen=True)
class BaselineSpec:
    """A baseline method tag with its hyperparameter assignment."""

    method: str
    hyperparameters: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(
                f"unknown method {self.method!r}; expected one of {METHODS}"
            )
        params = dict(self.hyperparameters)
        missing = [k for k in _REQUIRED_PARAMS[self.method] if k not in params]
        if missing:
            raise ValueError(
                f"method {self.method!r} is missing hyperparameters {missing}"
            )
        for key in ("delta", "eta"):
            if key in params and not (0.0 <= params[key] <= 1.0):
                raise ValueError(f"{key} must lie in [0, 1], got {params[key]}")
        for key in ("lambda", "lambda_ridge", "lambda_lap", "alpha"):
            if key in params and params[key] < 0:
                raise ValueError(f"{key} must be >= 0, got {params[key]}")
        for key in ("sigma_rf", "sigma_const", "sigma_gpr", "sigma_graph"):
            if key in params and not (params[key] > 0):
                raise ValueError(f"{key} must be > 0, got {params[key]}")
        if "num_features" in params:
            if int(params["num_features"]) < 1:
                raise ValueError("num_features must be a positive integer")
        object.__setattr__(self, "hyperparameters", params)

    def __getitem__(self, key: str) -> float:
        return self.hyperparameters[key]


@dataclass(frozen=True)
class LinearModel:
    """Affine predictor with weights per feature and an intercept per output."""

    weights: np.ndarray
    intercept: np.ndarray

    def predict(self, features) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=float))
        return x @ self.weights + self.intercept


def fit_ridge(train: IndexedDataset, ridge_lambda: float) -> LinearModel:
    """L2-penalized least squares on centered data; the intercept is free.

    Solves (Xc^T Xc + lambda I) w = Xc^T Yc with both sides centered, then
    sets the intercept so predictions are unbiased at the feature means.
    """
    if ridge_lambda < 0:
        raise ValueError(f"lambda must be >= 0, got {ridge_lambda}")
    x = train.features
    y = train.labels
    x_mean = x.mean(axis=0)
    y_mean = y.mean(axis=0)
    xc = x - x_mean
    yc = y - y_mean
    gram = xc.T @ xc + ridge_lambda * np.eye(x.shape[1])
    try:
        weights = np.linalg.solve(gram, xc.T @ yc)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "ridge system is singular; a positive lambda is required for "
            "rank-deficient features"
        ) from exc
    intercept = y_mean - x_mean @ weights
    return LinearModel(weights, intercept)


@dataclass(frozen=True)
class RandomFeatureModel:
    """Ridge regression on random cosine features of the inputs."""

    frequencies: np.ndarray
    phases: np.ndarray
    linear: LinearModel

    def transform(self, features) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=float))
        return np.cos(x @ self.frequencies.T + self.phases)

    def predict(self, features) -> np.ndarray:
        return self.linear.predict(self.transform(features))


def random_feature_map(
    d_x: int, num_features: int, sigma_rf: float, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Random frequencies N(0, sigma_rf^2) and phases U(0, 2 pi) for cos features."""
    if num_features < 1:
        raise ValueError("num_features must be a positive integer")
    if not (sigma_rf > 0):
        raise ValueError(f"sigma_rf must be > 0, got {sigma_rf}")
    rng = np.random.default_rng(seed)
    frequencies = rng.normal(0.0, sigma_rf, size=(num_features, d_x))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=num_features)
    return frequencies, phases


def fit_random_features(
    train: IndexedDataset,
    num_features: int,
    sigma_rf: float,
    ridge_lambda: float,
    seed: int = 0,
) -> RandomFeatureModel:
    frequencies, phases = random_feature_map(
        train.features.shape[1], num_features, sigma_rf, seed
    )
    mapped = np.cos(train.features @ frequencies.T + phases)
    lifted = IndexedDataset(mapped, train.labels, train.indices)
    return RandomFeatureModel(frequencies, phases, fit_ridge(lifted, ridge_lambda))


def _gaussian_gram(a: np.ndarray, b: np.ndarray, sigma: float) -> np.ndarray:
    diff = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    np.maximum(diff, 0.0, out=diff)
    return np.exp(diff / (-2.0 * sigma**2))


@dataclass(frozen=True)
class GaussianProcessMean:
    """Posterior mean of a zero-mean GP with a scaled Gaussian kernel."""

    train_features: np.ndarray
    coefficients: np.ndarray
    sigma_const: float
    sigma_gpr: float

    def predict(self, features) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=float))
        cross = self.sigma_const**2 * _gaussian_gram(
            x, self.train_features, self.sigma_gpr
        )
        return cross @ self.coefficients


def fit_gpr_mean(
    train: IndexedDataset, alpha: float, sigma_const: float, sigma_gpr: float
) -> GaussianProcessMean:
    """Exact GP regression mean: k_*^T (K + alpha I)^{-1} y.

    The kernel is sigma_const^2 exp(-||a - b||^2 / (2 sigma_gpr^2)).  An
    ill-conditioned K + alpha I (condition number above 1e12) is rejected
    with a hint to raise alpha.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if not (sigma_const > 0) or not (sigma_gpr > 0):
        raise ValueError("sigma_const and sigma_gpr must be > 0")
    x = train.features
    gram = sigma_const**2 * _gaussian_gram(x, x, sigma_gpr)
    gram[np.diag_indices_from(gram)] += alpha
    eigs = np.linalg.eigvalsh(gram)
    smallest = eigs[0]
    cond = np.inf if smallest <= 0 else eigs[-1] / smallest
    if cond > MAX_CONDITION_NUMBER:
        raise np.linalg.LinAlgError(
            f"K + alpha I has condition number {cond:.3e} (limit 1e12); "
            "a larger alpha is needed for a stable posterior mean"
        )
    coefficients = cho_solve(cho_factor(gram, lower=True), train.labels)
    return GaussianProcessMean(x, coefficients, sigma_const, sigma_gpr)


@dataclass(frozen=True)
class KernelExpansion:
    """Predictor f(t) = sum_j alpha_j k(t, t_j) over stored anchor points."""

    anchors: np.ndarray
    coefficients: np.ndarray
    sigma: float

    def predict(self, indices) -> np.ndarray:
        t = np.atleast_2d(np.asarray(indices, dtype=float))
        return _gaussian_gram(t, self.anchors, self.sigma) @ self.coefficients


def fit_laprls(
    train_labeled: IndexedDataset,
    unlabeled_indices,
    lambda_ridge: float,
    lambda_lap: float,
    sigma_graph: float,
) -> KernelExpansion:
    """Laplacian-regularized kernel least squares over labeled plus unlabeled points.

    Minimizes ||f_l - y||^2 + lambda_ridge ||f||_K^2 + lambda_lap f^T L f with
    the representer expansion f = K alpha over all points.  One Gaussian
    bandwidth sigma_graph serves both the kernel and the graph weights; the
    graph Laplacian L uses zero self-loops.
    """
    if lambda_ridge <= 0:
        raise ValueError(f"lambda_ridge must be > 0, got {lambda_ridge}")
    if lambda_lap < 0:
        raise ValueError(f"lambda_lap must be >= 0, got {lambda_lap}")
    if not (sigma_graph > 0):
        raise ValueError(f"sigma_graph must be > 0, got {sigma_graph}")
    t_l = train_labeled.indices
    t_u = np.asarray(unlabeled_indices, dtype=float)
    if t_u.ndim == 1:
        t_u = t_u.reshape(-1, 1)
    if t_u.size and t_u.shape[1] != t_l.shape[1]:
        raise ValueError(
            f"unlabeled indices have dimension {t_u.shape[1]}, labeled have "
            f"{t_l.shape[1]}"
        )
    points = np.vstack([t_l, t_u]) if t_u.size else t_l
    n_l = t_l.shape[0]
    m = points.shape[0]
    gram = _gaussian_gram(points, points, sigma_graph)
    adjacency = gram.copy()
    np.fill_diagonal(adjacency, 0.0)
    laplacian = np.diag(adjacency.sum(axis=1)) - adjacency
    selector = np.zeros((m, m))
    selector[np.arange(n_l), np.arange(n_l)] = 1.0
    targets = np.zeros((m, train_labeled.labels.shape[1]))
    targets[:n_l] = train_labeled.labels
    system = selector @ gram + lambda_ridge * np.eye(m) + lambda_lap * (laplacian @ gram)
    try:
        coefficients = np.linalg.solve(system, targets)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "the regularized system is singular; increase lambda_ridge"
        ) from exc
    return KernelExpansion(points, coefficients, sigma_graph)


def fit_hem(
    labeled_indices,
    labeled_labels,
    unlabeled_indices,
    sigma_graph: float,
    eta: float,
) -> np.ndarray:
    """Harmonic propagation of labels to unlabeled points on a Gaussian graph.

    Solves f_u = (D_uu - eta W_uu)^{-1} (eta W_ul) y_l, where W are Gaussian
    weights without self-loops and D holds the undamped degrees.  eta damps
    the propagated weights; eta = 1 is the classical harmonic solution.
    Returns predictions at the unlabeled points.
    """
    if not (sigma_graph > 0):
        raise ValueError(f"sigma_graph must be > 0, got {sigma_graph}")
    if not (0.0 <= eta <= 1.0):
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    t_l = np.asarray(labeled_indices, dtype=float)
    y_l = np.asarray(labeled_labels, dtype=float)
    t_u = np.asarray(unlabeled_indices, dtype=float)
    if t_l.ndim == 1:
        t_l = t_l.reshape(-1, 1)
    if t_u.ndim == 1:
        t_u = t_u.reshape(-1, 1)
    if y_l.ndim == 1:
        y_l = y_l.reshape(-1, 1)
    if t_l.shape[0] < 1 or t_u.shape[0] < 1:
        raise ValueError("at least one labeled and one unlabeled point are required")
    if y_l.shape[0] != t_l.shape[0]:
        raise ValueError(
            f"{y_l.shape[0]} labels for {t_l.shape[0]} labeled points"
        )
    points = np.vstack([t_l, t_u])
    weights = _gaussian_gram(points, points, sigma_graph)
    np.fill_diagonal(weights, 0.0)
    n_l = t_l.shape[0]
    degrees = weights.sum(axis=1)
    w_uu = weights[n_l:, n_l:]
    w_ul = weights[n_l:, :n_l]
    system = np.diag(degrees[n_l:]) - eta * w_uu
    try:
        return np.linalg.solve(system, eta * (w_ul @ y_l))
    except np.linalg.LinAlgError:
        n_comp, membership = connected_components(weights > 0, directed=False)
        labeled_comps = set(membership[:n_l])
        stranded = [
            int(i) for i in range(t_u.shape[0])
            if membership[n_l + i] not in labeled_comps
        ]
        raise np.linalg.LinAlgError(
            "harmonic system is singular: unlabeled points "
            f"{stranded} sit in graph components with no labeled point "
            "(weights underflowed to zero); increase sigma_graph"
        ) from None


def shrink_to_mean(
    pred_set: PredictionSet, train_label_mean, delta: float
) -> PredictionSet:
    """Convex shrinkage (1 - delta) * predictions + delta * training label mean."""
    if not (0.0 <= delta <= 1.0):
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    mean = np.asarray(train_label_mean, dtype=float).reshape(1, -1)
    if mean.shape[1] != pred_set.d_y:
        raise ValueError(
            f"train_label_mean has {mean.shape[1]} entries for {pred_set.d_y} outputs"
        )
    shrunk = (1.0 - delta) * pred_set.predictions + delta * mean
    return PredictionSet(shrunk, pred_set.indices, pred_set.labels)


def fit_and_predict(
    spec: BaselineSpec, train: IndexedDataset, eval_set: IndexedDataset
) -> np.ndarray:
    """Fit one baseline spec on train and predict the evaluation rows.

    Feature-based methods (ridge, random_features, gpr) read eval features;
    the semi-supervised methods (laprls, hem) read eval index variables and
    treat them as the unlabeled set.
    """
    p = spec.hyperparameters
    if spec.method == "ridge":
        return fit_ridge(train, p["lambda"]).predict(eval_set.features)
    if spec.method == "random_features":
        model = fit_random_features(
            train, int(p["num_features"]), p["sigma_rf"], p["lambda"], spec.seed
        )
        return model.predict(eval_set.features)
    if spec.method == "gpr":
        model = fit_gpr_mean(train, p["alpha"], p["sigma_const"], p["sigma_gpr"])
        return model.predict(eval_set.features)
    if spec.method == "laprls":
        model = fit_laprls(
            train,
            eval_set.indices,
            p["lambda_ridge"],
            p["lambda_lap"],
            p["sigma_graph"],
        )
        return model.predict(eval_set.indices)
    if spec.method == "hem":
        return fit_hem(
            train.indices, train.labels, eval_set.indices, p["sigma_graph"], p["eta"]
        )
    raise ValueError(
        "shrink_to_mean rescales existing predictions rather than fitting; "
        "apply shrink_to_mean() to a PredictionSet instead"
    )


def default_grid(method: str, seed: int = 0) -> list[BaselineSpec]:
    """The stock hyperparameter grid searched for each baseline method."""
    if method == "ridge":
        return [
            BaselineSpec("ridge", {"lambda": lam}, seed)
            for lam in np.logspace(-6, 4, 5)
        ]
    if method == "random_features":
        return [
            BaselineSpec(
                "random_features",
                {"num_features": num, "sigma_rf": s, "lambda": lam},
                seed,
            )
            for num in (100, 200)
            for s in np.logspace(-8, -4, 3)
            for lam in np.logspace(-6, -4, 3)
        ]
    if method == "gpr":
        return [
            BaselineSpec(
                "gpr", {"alpha": a, "sigma_const": sc, "sigma_gpr": sg}, seed
            )
            for a in np.logspace(-6, 0, 3)
            for sc in np.logspace(-2, 2, 4)
            for sg in np.logspace(-2, 2, 4)
        ]
    if method == "laprls":
        return [
            BaselineSpec(
                "laprls",
                {"lambda_ridge": lr, "lambda_lap": ll, "sigma_graph": 1.0},
                seed,
            )
            for lr in np.logspace(-2, 4, 5)
            for ll in np.logspace(-4, 2, 5)
        ]
    if method == "hem":
        return [
            BaselineSpec("hem", {"sigma_graph": s, "eta": eta}, seed)
            for s in np.logspace(-4, 0, 5)
            for eta in np.linspace(0.01, 1.0, 6)
        ]
    if method == "shrink_to_mean":
        return [
            BaselineSpec("shrink_to_mean", {"delta": d}, seed)
            for d in np.linspace(0.0, 1.0, 11)
        ]
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
