"""Risk estimation on actively collected data.

Points picked by an informative acquisition policy are not an i.i.d. sample,
so their naive mean loss is a biased estimate of population risk. Given the
proposal probability each point was acquired with, a per-position importance
weight restores unbiasedness; comparing the weighted train risk against test
risk then measures how much the model overfit its own acquisitions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ShapeError, UsageError
from .predictive import GaussianMixturePredictive, pointwise_nll

__all__ = [
    "LOSS_KINDS",
    "pointwise_loss",
    "empirical_risk",
    "lure_weight",
    "lure_weights",
    "r_lure",
    "RiskReport",
    "overfitting_bias",
]

LOSS_KINDS = ("nll", "squared")


def pointwise_loss(pred: GaussianMixturePredictive, y: np.ndarray, kind: str) -> np.ndarray:
    """Per-point loss of a mixture predictive against targets."""
    if kind == "nll":
        return pointwise_nll(pred, y)
    if kind == "squared":
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if y.shape[0] != pred.n_points:
            raise ShapeError(f"{y.shape[0]} targets for {pred.n_points} predictions")
        return (y - pred.mixture_mean()) ** 2
    raise UsageError(f"unknown loss kind {kind!r}; choose from {LOSS_KINDS}")


def empirical_risk(losses: np.ndarray) -> float:
    """Plain mean loss (the biased estimator on actively sampled data)."""
    losses = np.asarray(losses, dtype=np.float64)
    if losses.size == 0:
        raise UsageError("empty loss vector")
    return float(losses.mean())


def lure_weight(n_pool: int, n_acquired: int, m: int, alpha: float) -> float:
    """Importance weight for the m-th of n_acquired points from a pool of n_pool.

    m is 1-based acquisition order; alpha is the proposal mass the point was
    drawn with at that step (over the n_pool - m + 1 then-remaining points).
    Uniform proposals give weight exactly 1, as does acquiring the whole pool.
    """
    if not 1 <= m <= n_acquired <= n_pool:
        raise UsageError(
            f"need 1 <= m <= n_acquired <= n_pool, got m={m}, "
            f"n_acquired={n_acquired}, n_pool={n_pool}"
        )
    if not 0.0 < alpha <= 1.0 + 1e-12:
        raise NumericError(f"proposal probability must be in (0, 1], got {alpha}")
    if m == n_pool:  # whole pool acquired; the final pick had no alternative
        return 1.0
    return 1.0 + (n_pool - n_acquired) / (n_pool - m) * (
        1.0 / ((n_pool - m + 1) * alpha) - 1.0
    )


def lure_weights(n_pool: int, alphas: np.ndarray) -> np.ndarray:
    """Vector of importance weights for an acquisition trace."""
    alphas = np.asarray(alphas, dtype=np.float64).reshape(-1)
    n_acquired = alphas.size
    return np.array(
        [lure_weight(n_pool, n_acquired, m, float(a)) for m, a in enumerate(alphas, start=1)]
    )


def r_lure(losses: np.ndarray, alphas: np.ndarray, n_pool: int) -> float:
    """Unbiased population risk estimate from actively sampled losses.

    losses must be in acquisition order and aligned with alphas, the proposal
    probabilities recorded when each point was picked.
    """
    losses = np.asarray(losses, dtype=np.float64).reshape(-1)
    alphas = np.asarray(alphas, dtype=np.float64).reshape(-1)
    if losses.shape != alphas.shape:
        raise ShapeError(f"losses {losses.shape} and alphas {alphas.shape} differ")
    if losses.size == 0:
        raise UsageError("empty loss vector")
    return float(np.mean(lure_weights(n_pool, alphas) * losses))


@dataclass(frozen=True)
class RiskReport:
    """Train/test risk summary for one model on one acquisition trace."""

    loss_kind: str
    n_pool: int
    n_acquired: int
    weighted_train_risk: float
    unweighted_train_risk: float
    test_risk: float

    @property
    def bias(self) -> float:
        """Overfitting measure: test risk minus the weighted train estimate."""
        return self.test_risk - self.weighted_train_risk


def overfitting_bias(
    train_losses: np.ndarray,
    alphas: np.ndarray,
    n_pool: int,
    test_losses: np.ndarray,
    loss_kind: str = "nll",
) -> RiskReport:
    """Summarize train (weighted and plain) versus test risk for one model."""
    if loss_kind not in LOSS_KINDS:
        raise UsageError(f"unknown loss kind {loss_kind!r}; choose from {LOSS_KINDS}")
    train_losses = np.asarray(train_losses, dtype=np.float64).reshape(-1)
    return RiskReport(
        loss_kind=loss_kind,
        n_pool=n_pool,
        n_acquired=train_losses.size,
        weighted_train_risk=r_lure(train_losses, alphas, n_pool),
        unweighted_train_risk=empirical_risk(train_losses),
        test_risk=empirical_risk(test_losses),
    )
