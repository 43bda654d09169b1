"""Active learning acquisition: information scores and batch selection.

Scores are the mutual information between a candidate's output and the model
(total predictive entropy minus expected per-component entropy), computed in
closed form for Gaussian mixtures via moment matching. Batch selection can be
greedy or stochastic; either way each pick records the proposal probability it
was drawn with, which downstream risk estimators need for importance weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .errors import NumericError, UsageError
from .predictive import GaussianMixturePredictive

__all__ = [
    "STRATEGIES",
    "AcquisitionConfig",
    "AcquisitionStep",
    "gaussian_mixture_bald",
    "acquire_batch",
    "dun_bald",
    "mc_bald",
]

STRATEGIES = ("bald_stochastic", "bald_argmax", "random")


@dataclass
class AcquisitionConfig:
    strategy: str = "bald_stochastic"
    temperature: float = 10.0
    batch_size: int = 1

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise UsageError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.temperature <= 0:
            raise UsageError(f"temperature must be positive, got {self.temperature}")
        if self.batch_size < 1:
            raise UsageError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class AcquisitionStep:
    """One acquired pool index plus the proposal mass it was selected with."""

    index: int
    probability: float
    n_remaining: int  # candidates available when this pick was made


def gaussian_mixture_bald(pred: GaussianMixturePredictive) -> np.ndarray:
    """Mutual information scores for each point of a mixture predictive.

    The mixture entropy is approximated by the entropy of a moment-matched
    Gaussian, so the score is 0.5 * (log total variance - sum_i w_i log v_i),
    clamped at zero against rounding.
    """
    total = pred.mixture_variance()
    expected_comp = np.log(pred.variances) @ pred.weights
    score = 0.5 * (np.log(total) - expected_comp)
    if not np.all(np.isfinite(score)):
        raise NumericError("non-finite acquisition score")
    return np.maximum(score, 0.0)


def acquire_batch(
    scores: np.ndarray,
    remaining: np.ndarray,
    cfg: AcquisitionConfig,
    rng: np.random.Generator | None = None,
) -> list[AcquisitionStep]:
    """Pick cfg.batch_size distinct pool indices from `remaining`.

    Stochastic strategies sample without replacement from softmax(temperature
    * score) over the still-available candidates, re-normalizing after each
    pick; `random` ignores scores; `bald_argmax` takes the highest score,
    breaking ties toward the lowest index with probability recorded as 1.
    """
    scores = np.asarray(scores, dtype=np.float64)
    remaining = np.asarray(remaining, dtype=np.intp)
    if remaining.ndim != 1 or remaining.size == 0:
        raise UsageError("remaining must be a non-empty 1-d index array")
    if cfg.batch_size > remaining.size:
        raise UsageError(
            f"cannot pick {cfg.batch_size} points from {remaining.size} candidates"
        )
    if not np.all(np.isfinite(scores[remaining])):
        raise NumericError("non-finite score among candidates")
    if cfg.strategy in ("bald_stochastic", "random") and rng is None:
        raise UsageError(f"{cfg.strategy} acquisition needs a random generator")

    avail = list(remaining)
    steps: list[AcquisitionStep] = []
    for _ in range(cfg.batch_size):
        avail_arr = np.asarray(avail)
        if cfg.strategy == "bald_argmax":
            s = scores[avail_arr]
            best = avail_arr[s == s.max()].min()
            steps.append(AcquisitionStep(int(best), 1.0, len(avail)))
            avail.remove(int(best))
            continue
        if cfg.strategy == "random":
            probs = np.full(len(avail), 1.0 / len(avail))
        else:
            probs = softmax(cfg.temperature * scores[avail_arr])
        pick = int(rng.choice(avail_arr, p=probs))
        prob = float(probs[avail.index(pick)])
        steps.append(AcquisitionStep(pick, prob, len(avail)))
        avail.remove(pick)
    return steps


def dun_bald(net, q, X: np.ndarray) -> np.ndarray:
    """Information scores from a depth-mixture predictive."""
    from .dun import dun_predict

    return gaussian_mixture_bald(dun_predict(net, q, X))


def mc_bald(net, X: np.ndarray, n_samples: int = 10, rng=None) -> np.ndarray:
    """Information scores from a dropout-sample mixture predictive."""
    from .baselines import mcdo_predict

    return gaussian_mixture_bald(mcdo_predict(net, X, n_samples=n_samples, rng=rng))
