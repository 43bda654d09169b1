"""Gaussian-mixture predictive distributions and the metrics computed on them.

Every inference method in this package (depth-marginalized nets, MC-dropout,
mean-field VI, plain SGD nets) reduces its predictions to the same object: a
per-point mixture of Gaussians with shared component weights. All downstream
metrics and acquisition scores consume only this type.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import NumericError, ShapeError

LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class GaussianMixturePredictive:
    """Mixture with K components over N points.

    weights: (K,) nonnegative, summing to 1.
    means, variances: (N, K); variances include the observation noise.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.asarray(self.means, dtype=np.float64)
        self.variances = np.asarray(self.variances, dtype=np.float64)
        if self.means.ndim != 2 or self.means.shape != self.variances.shape:
            raise ShapeError(f"means {self.means.shape} and variances {self.variances.shape} must match as (N, K)")
        if self.weights.shape != (self.means.shape[1],):
            raise ShapeError(f"weights shape {self.weights.shape} != (K,) = ({self.means.shape[1]},)")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise NumericError("mixture weights must be nonnegative and sum to 1")
        if np.any(self.variances <= 0):
            raise NumericError("mixture variances must be positive")
        if not (np.all(np.isfinite(self.means)) and np.all(np.isfinite(self.variances))):
            raise NumericError("non-finite mixture parameters")

    @property
    def n_points(self) -> int:
        return self.means.shape[0]

    @property
    def n_components(self) -> int:
        return self.means.shape[1]

    def mixture_mean(self) -> np.ndarray:
        return self.means @ self.weights

    def scaled(self, scale: float, shift: float = 0.0) -> "GaussianMixturePredictive":
        """Predictive for the affine-transformed target scale * y + shift.

        Used to report metrics in original units after training on
        standardized targets.
        """
        if scale <= 0 or not np.isfinite(scale) or not np.isfinite(shift):
            raise NumericError(f"need a finite positive scale, got {scale}, shift {shift}")
        return GaussianMixturePredictive(
            weights=self.weights.copy(),
            means=self.means * scale + shift,
            variances=self.variances * scale**2,
        )

    def mixture_variance(self) -> np.ndarray:
        """Moment-matched total variance: E[var] + var of component means."""
        mean = self.mixture_mean()
        second = (self.variances + self.means**2) @ self.weights
        return second - mean**2


def _check_targets(pred: GaussianMixturePredictive, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != pred.n_points:
        raise ShapeError(f"got {y.shape[0]} targets for {pred.n_points} predictive points")
    return y


def pointwise_nll(pred: GaussianMixturePredictive, y: np.ndarray) -> np.ndarray:
    """Per-point negative log density under the mixture."""
    y = _check_targets(pred, y)
    log_comp = (
        -0.5 * LOG_2PI
        - 0.5 * np.log(pred.variances)
        - 0.5 * (y[:, None] - pred.means) ** 2 / pred.variances
    )
    with np.errstate(divide="ignore"):
        log_w = np.where(pred.weights > 0, np.log(np.maximum(pred.weights, 1e-300)), -np.inf)
    return -logsumexp(log_comp + log_w, axis=1)


def mixture_nll(pred: GaussianMixturePredictive, y: np.ndarray) -> float:
    """Mean negative log likelihood of targets under the mixture."""
    return float(np.mean(pointwise_nll(pred, y)))


def mixture_rmse(pred: GaussianMixturePredictive, y: np.ndarray) -> float:
    """Root mean squared error of the mixture mean."""
    y = _check_targets(pred, y)
    return float(np.sqrt(np.mean((y - pred.mixture_mean()) ** 2)))
