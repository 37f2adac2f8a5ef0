"""
The best possible linear smoother, given the covariances
========================================================

If the covariance of the labels, of the prediction errors, and their
cross-covariance are all known, the MSE-minimizing linear map from
predictions to labels has a closed form.  It is the ceiling against which
practical smoothers can be judged.  This demo computes it for the latent
smooth-signal model, verifies it against a brute-force sample estimate,
and prints the exact expected improvement.
"""

import numpy as np

from postsmooth import (
    CovarianceBundle,
    SimConfig,
    expected_mse_reduction,
    model_covariance_bundle,
    optimal_smoother,
)

cfg = SimConfig(n=40, c_sig=1.0, sigma_x=0.5, sigma_y=0.1, seed=0)
bundle = model_covariance_bundle(cfg)
print("bundle blocks:", bundle.k_yy.shape, bundle.k_ee.shape, bundle.k_ye.shape)

s_star = optimal_smoother(bundle)
reduction = expected_mse_reduction(bundle)
unsmoothed = np.trace(bundle.k_ee) / cfg.n
print(f"expected per-point MSE, unsmoothed: {unsmoothed:.5f}")
print(f"expected reduction from S*:         {reduction:.5f}")
print(f"expected per-point MSE, smoothed:   {unsmoothed - reduction:.5f}")
print(f"noise floor sigma_y^2:              {cfg.sigma_y**2:.5f}")

# brute-force check: sample (label, error) pairs from the bundle's joint
# distribution and fit the linear map by least squares
rng = np.random.default_rng(1)
n = cfg.n
joint = np.block(
    [[bundle.k_yy, bundle.k_ye], [bundle.k_ye.T, bundle.k_ee]]
)
chol = np.linalg.cholesky(joint + 1e-10 * np.eye(2 * n))
draws = rng.standard_normal((200_000, 2 * n)) @ chol.T
y, e = draws[:, :n], draws[:, n:]
yhat = y + e
s_hat = np.linalg.solve(yhat.T @ yhat, yhat.T @ y).T
print(f"max entrywise gap between S* and the sample fit: "
      f"{np.max(np.abs(s_hat - s_star)):.5f}")

observed = (np.sum(e * e, axis=1) - np.sum((yhat @ s_star.T - y) ** 2, axis=1)) / n
print(f"sampled reduction: {observed.mean():.5f} "
      f"(analytic {reduction:.5f})")

# a hand-checkable corner: white labels observed with independent white
# errors of equal size; the best map halves everything
tiny = CovarianceBundle(k_yy=np.eye(3), k_ee=np.eye(3), k_ye=np.zeros((3, 3)))
print("white-noise corner, S* =")
print(optimal_smoother(tiny))
print("reduction =", expected_mse_reduction(tiny))
