"""Inference over network depth: exact likelihoods, posterior, ELBO, training.

Depth is a categorical random variable over 0..D. Because the categorical
marginalization is a finite sum, the marginal likelihood, the depth posterior
and the variational bound are all available in closed form; no sampling is
involved anywhere in this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_softmax, logsumexp, softmax

from .errors import NumericError, ShapeError, TrainingError, UsageError
from .nn import Network, NetworkConfig, OptimizerState, build_network
from .predictive import LOG_2PI, GaussianMixturePredictive, mixture_nll, mixture_rmse  # noqa: F401

__all__ = [
    "DepthDistribution",
    "DunTrainConfig",
    "TrainHistory",
    "per_depth_loglik",
    "marginal_loglik",
    "exact_depth_posterior",
    "categorical_kl",
    "elbo",
    "train_dun",
    "dun_predict",
    "mixture_nll",
    "mixture_rmse",
]


@dataclass
class DepthDistribution:
    """Categorical distribution over depths 0..D, stored as log probabilities."""

    log_probs: np.ndarray

    def __post_init__(self):
        self.log_probs = np.asarray(self.log_probs, dtype=np.float64).reshape(-1)
        if self.log_probs.size == 0:
            raise ShapeError("depth distribution needs at least one depth")
        if np.any(np.isnan(self.log_probs)) or np.any(self.log_probs == np.inf):
            raise NumericError("log probabilities must be finite or -inf")
        if abs(logsumexp(self.log_probs)) > 1e-9:
            raise NumericError("depth distribution is not normalized")

    @classmethod
    def from_logits(cls, logits: np.ndarray) -> "DepthDistribution":
        return cls(log_softmax(np.asarray(logits, dtype=np.float64)))

    @classmethod
    def uniform(cls, n_depths: int) -> "DepthDistribution":
        return cls(np.full(n_depths, -np.log(n_depths)))

    @classmethod
    def point_mass(cls, index: int, n_depths: int) -> "DepthDistribution":
        lp = np.full(n_depths, -np.inf)
        lp[index] = 0.0
        return cls(lp)

    @classmethod
    def decaying(cls, n_depths: int, rho: float = 0.95) -> "DepthDistribution":
        """Geometric prior: probability of depth i proportional to rho**i."""
        if not 0 < rho:
            raise UsageError(f"decay rate must be positive, got {rho}")
        logits = np.arange(n_depths) * np.log(rho)
        return cls.from_logits(logits)

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def mean_depth(self) -> float:
        return float(np.arange(len(self)) @ self.probs)

    def __len__(self) -> int:
        return self.log_probs.size


@dataclass
class TrainHistory:
    """Per-iteration objective plus the checkpoint-selection trace."""

    train_objective: np.ndarray
    eval_iters: np.ndarray
    eval_objective: np.ndarray
    best_iter: int


@dataclass
class DunTrainConfig:
    iterations: int = 1000
    learning_rate: float = 1e-4
    momentum: float = 0.9
    weight_decay: float = 1e-5
    prior: DepthDistribution | None = None  # None -> uniform over depths
    validation_selection: bool = True
    eval_every: int = 10

    def __post_init__(self):
        if self.iterations < 1:
            raise UsageError("iterations must be >= 1")


def per_depth_loglik(outputs: np.ndarray, y: np.ndarray, log_noise: float) -> np.ndarray:
    """Log density of each target under each depth's Gaussian head.

    outputs: (D+1, N, out); y: (N, out). Returns (N, D+1); entries sum the log
    density over output dimensions with shared noise scale exp(log_noise).
    """
    outputs = np.asarray(outputs, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if outputs.ndim != 3 or outputs.shape[1:] != y.shape:
        raise ShapeError(f"outputs {outputs.shape} incompatible with targets {y.shape}")
    var = np.exp(2.0 * float(log_noise))
    sq = ((outputs - y[None, :, :]) ** 2).sum(axis=2).T  # (N, D+1)
    out_dim = y.shape[1]
    ll = -0.5 * out_dim * (LOG_2PI + 2.0 * float(log_noise)) - 0.5 * sq / var
    if not np.all(np.isfinite(ll)):
        raise NumericError("non-finite per-depth log likelihood (noise scale collapsed?)")
    return ll


def _check_lengths(ll: np.ndarray, dist: DepthDistribution) -> None:
    if ll.ndim != 2 or ll.shape[1] != len(dist):
        raise UsageError(f"log-likelihood matrix {ll.shape} does not match {len(dist)} depths")


def marginal_loglik(ll: np.ndarray, prior: DepthDistribution) -> float:
    """Log of the prior-weighted sum of per-depth dataset likelihoods."""
    ll = np.asarray(ll, dtype=np.float64)
    _check_lengths(ll, prior)
    return float(logsumexp(prior.log_probs + ll.sum(axis=0)))


def exact_depth_posterior(ll: np.ndarray, prior: DepthDistribution) -> DepthDistribution:
    """Closed-form categorical posterior over depth given the data."""
    ll = np.asarray(ll, dtype=np.float64)
    _check_lengths(ll, prior)
    joint = prior.log_probs + ll.sum(axis=0)
    return DepthDistribution(joint - logsumexp(joint))


def fitted_depth_posterior(
    net: Network, prior: DepthDistribution, X: np.ndarray, y: np.ndarray
) -> DepthDistribution:
    """Closed-form depth posterior of a trained network on a dataset.

    Runs every depth head in eval mode and conditions the prior on the
    per-depth likelihoods. The variational logits converge to exactly this
    distribution, so reporting it directly avoids presenting a half-converged
    approximation as the model's belief over depth.
    """
    X = np.asarray(X, dtype=np.float64)
    outputs, _ = net.forward_all_depths(X, mode="eval")
    ll = per_depth_loglik(outputs, y, net.log_noise)
    return exact_depth_posterior(ll, prior)


def categorical_kl(q: DepthDistribution, p: DepthDistribution) -> float:
    if len(q) != len(p):
        raise UsageError("distributions have different lengths")
    qp = q.probs
    support = qp > 0
    if np.any(support & (p.log_probs == -np.inf)):
        raise UsageError("KL is infinite: q has mass where the prior has none")
    kl = float(np.sum(qp[support] * (q.log_probs[support] - p.log_probs[support])))
    return max(kl, 0.0)


def elbo(ll: np.ndarray, q: DepthDistribution, prior: DepthDistribution) -> float:
    """Expected log likelihood under q minus KL(q || prior), both exact."""
    ll = np.asarray(ll, dtype=np.float64)
    _check_lengths(ll, q)
    _check_lengths(ll, prior)
    expected = float(ll.sum(axis=0) @ q.probs)
    return expected - categorical_kl(q, prior)


def _elbo_phi_grad(phi: np.ndarray, col_ll: np.ndarray, prior: DepthDistribution) -> np.ndarray:
    """d(ELBO)/d(logits) with q = softmax(phi), derived in closed form."""
    q = softmax(phi)
    log_q = log_softmax(phi)
    g = col_ll - (log_q + 1.0 - prior.log_probs)
    return q * (g - float(q @ g))


def train_dun(
    train: tuple[np.ndarray, np.ndarray],
    valid: tuple[np.ndarray, np.ndarray] | None,
    net_cfg: NetworkConfig,
    train_cfg: DunTrainConfig,
    rng: np.random.Generator | None = None,
) -> tuple[Network, DepthDistribution, TrainHistory]:
    """Maximize the depth ELBO over weights, noise scale and depth logits.

    Full-batch gradient steps with momentum; the variational distribution is
    parameterized by unconstrained logits read through a log-softmax. Returns
    the checkpoint with the best selection objective (validation ELBO, or
    train-set ELBO when no validation data is given).
    """
    X, y = np.asarray(train[0], dtype=np.float64), np.asarray(train[1], dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if X.shape[0] == 0:
        raise UsageError("empty training set")
    has_valid = valid is not None and len(valid[0]) > 0
    n_depths = net_cfg.depth + 1
    prior = train_cfg.prior if train_cfg.prior is not None else DepthDistribution.uniform(n_depths)
    if len(prior) != n_depths:
        raise UsageError(f"prior over {len(prior)} depths for a depth-{net_cfg.depth} network")

    net = build_network(net_cfg, rng)
    phi = np.zeros(n_depths)
    opt = OptimizerState(
        learning_rate=train_cfg.learning_rate,
        momentum=train_cfg.momentum,
        weight_decay=train_cfg.weight_decay,
        exclude_decay=net.decay_exclusions() | {"phi"},
    )

    def selection_objective() -> float:
        q = DepthDistribution.from_logits(phi)
        Xs, ys = (valid if has_valid else (X, y))
        outputs, _ = net.forward_all_depths(np.asarray(Xs, dtype=np.float64), mode="eval")
        ll = per_depth_loglik(outputs, np.asarray(ys, dtype=np.float64), net.log_noise)
        return elbo(ll, q, prior)

    history_train = np.empty(train_cfg.iterations)
    eval_iters, eval_vals = [], []
    best = (-np.inf, None, None, -1)

    def maybe_checkpoint(it: int) -> None:
        nonlocal best
        if not train_cfg.validation_selection:
            return
        obj = selection_objective()
        eval_iters.append(it)
        eval_vals.append(obj)
        if obj > best[0]:
            best = (obj, net.copy_state(), phi.copy(), it)

    maybe_checkpoint(0)
    for it in range(train_cfg.iterations):
        try:
            outputs, cache = net.forward_all_depths(X, mode="train")
            ll = per_depth_loglik(outputs, y, net.log_noise)
        except NumericError as exc:
            raise TrainingError(f"diverged at iteration {it}: {exc}", iteration=it) from exc
        q_probs = softmax(phi)
        objective = elbo(ll, DepthDistribution.from_logits(phi), prior)
        if not np.isfinite(objective):
            raise TrainingError(f"non-finite objective at iteration {it}", iteration=it)
        history_train[it] = objective

        # gradients of the negative ELBO
        var = np.exp(2.0 * net.log_noise)
        resid = y[None, :, :] - outputs  # (D+1, N, out)
        upstream = -q_probs[:, None, None] * resid / var
        grads = net.backward(cache, upstream)
        sq = (resid**2).sum(axis=(1, 2))  # per-depth squared error totals
        out_dim = outputs.shape[2]
        d_ll_d_lognoise = float(q_probs @ (sq / var - out_dim * X.shape[0]))
        grads["log_noise"] = np.asarray(-d_ll_d_lognoise)
        grads["phi"] = -_elbo_phi_grad(phi, ll.sum(axis=0), prior)
        # Step on per-example mean gradients so the configured learning rate
        # behaves identically across dataset sizes; objective values stay in
        # sum form.
        inv_n = 1.0 / X.shape[0]
        for name in grads:
            grads[name] = grads[name] * inv_n

        params = net.params
        params["phi"] = phi
        opt.step(params, grads)
        phi = params.pop("phi")

        if (it + 1) % train_cfg.eval_every == 0 or it + 1 == train_cfg.iterations:
            maybe_checkpoint(it + 1)

    if train_cfg.validation_selection and best[1] is not None:
        net.load_state(best[1])
        phi = best[2]
    history = TrainHistory(
        train_objective=history_train,
        eval_iters=np.asarray(eval_iters),
        eval_objective=np.asarray(eval_vals),
        best_iter=best[3],
    )
    return net, DepthDistribution.from_logits(phi), history


def dun_predict(net: Network, q: DepthDistribution, X: np.ndarray) -> GaussianMixturePredictive:
    """Depth-mixture predictive from a single eval-mode forward pass."""
    if len(q) != net.cfg.depth + 1:
        raise UsageError(f"distribution over {len(q)} depths for a depth-{net.cfg.depth} network")
    outputs, _ = net.forward_all_depths(X, mode="eval")
    if net.cfg.output_dim != 1:
        raise UsageError("mixture predictive is defined for scalar outputs")
    means = outputs[:, :, 0].T  # (N, D+1)
    var = np.exp(2.0 * net.log_noise)
    return GaussianMixturePredictive(
        weights=q.probs,
        means=means,
        variances=np.full_like(means, var),
    )
