"""Reference uncertainty baselines: plain SGD, MC dropout, and mean-field VI.

All three share the residual architecture and optimizer defaults of the depth
model and only use the deepest output head. Mean-field VI places a factorized
Gaussian over every weight and samples pre-activations directly (local
reparameterization), so its gradient estimator is low variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dun import TrainHistory
from .errors import NumericError, ShapeError, TrainingError, UsageError
from .nn import Network, NetworkConfig, OptimizerState, build_network, he_init
from .predictive import LOG_2PI, GaussianMixturePredictive

__all__ = [
    "BaselineTrainConfig",
    "mcdo_train",
    "mcdo_predict",
    "sgd_train",
    "sgd_predict",
    "MfviNetwork",
    "build_mfvi",
    "mfvi_kl",
    "mfvi_train",
    "mfvi_predict",
]

MFVI_RHO_INIT = -5.0  # initial log standard deviation of weight posteriors


@dataclass
class BaselineTrainConfig:
    iterations: int = 1000
    learning_rate: float = 1e-4
    momentum: float = 0.9
    weight_decay: float = 1e-5
    validation_selection: bool = True
    eval_every: int = 10
    mc_train_samples: int = 5  # only used by the mean-field VI trainer

    def __post_init__(self):
        if self.iterations < 1:
            raise UsageError("iterations must be >= 1")
        if self.mc_train_samples < 1:
            raise UsageError("mc_train_samples must be >= 1")


def gaussian_nll_terms(pred: np.ndarray, y: np.ndarray, log_noise: float):
    """Total Gaussian NLL of predictions plus its gradients.

    Returns (nll, d_nll/d_pred, d_nll/d_log_noise) for pred, y of shape
    (N, out) with shared noise scale exp(log_noise).
    """
    var = np.exp(2.0 * float(log_noise))
    resid = y - pred
    sq = float((resid**2).sum())
    n_terms = y.size
    nll = n_terms * (0.5 * LOG_2PI + float(log_noise)) + 0.5 * sq / var
    d_pred = -resid / var
    d_log_noise = n_terms - sq / var
    return nll, d_pred, d_log_noise


def _as_2d_targets(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    return y[:, None] if y.ndim == 1 else y


def _nll_train_loop(
    train,
    valid,
    net_cfg: NetworkConfig,
    train_cfg: BaselineTrainConfig,
    rng: np.random.Generator | None,
    train_mode: str,
) -> tuple[Network, TrainHistory]:
    """Shared loop for the deterministic and dropout trainers.

    Minimizes the deepest head's Gaussian NLL; checkpoint selection uses the
    negative validation NLL (train set when no validation data is given), so
    higher eval_objective is always better.
    """
    if net_cfg.use_batchnorm:
        raise UsageError("baselines run without batch normalization")
    X, y = np.asarray(train[0], dtype=np.float64), _as_2d_targets(train[1])
    if X.shape[0] == 0:
        raise UsageError("empty training set")
    has_valid = valid is not None and len(valid[0]) > 0
    rng = rng if rng is not None else np.random.default_rng(net_cfg.seed)

    net = build_network(net_cfg, rng)
    opt = OptimizerState(
        learning_rate=train_cfg.learning_rate,
        momentum=train_cfg.momentum,
        weight_decay=train_cfg.weight_decay,
        exclude_decay=net.decay_exclusions(),
    )

    def selection_objective() -> float:
        Xs, ys = (valid if has_valid else (X, y))
        Xs = np.asarray(Xs, dtype=np.float64)
        ys = _as_2d_targets(ys)
        outputs, _ = net.forward_all_depths(Xs, mode="eval")
        nll, _, _ = gaussian_nll_terms(outputs[-1], ys, net.log_noise)
        return -nll / Xs.shape[0]

    history_train = np.empty(train_cfg.iterations)
    eval_iters, eval_vals = [], []
    best = (-np.inf, None, -1)

    def maybe_checkpoint(it: int) -> None:
        nonlocal best
        if not train_cfg.validation_selection:
            return
        obj = selection_objective()
        eval_iters.append(it)
        eval_vals.append(obj)
        if obj > best[0]:
            best = (obj, net.copy_state(), it)

    maybe_checkpoint(0)
    for it in range(train_cfg.iterations):
        try:
            outputs, cache = net.forward_all_depths(X, mode=train_mode, rng=rng)
            loss, d_pred, d_log_noise = gaussian_nll_terms(outputs[-1], y, net.log_noise)
        except NumericError as exc:
            raise TrainingError(f"diverged at iteration {it}: {exc}", iteration=it) from exc
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss at iteration {it}", iteration=it)
        history_train[it] = loss

        upstream = np.zeros_like(outputs)
        upstream[-1] = d_pred
        grads = net.backward(cache, upstream)
        grads["log_noise"] = np.asarray(float(d_log_noise))
        # Per-example mean gradients: the learning rate means the same thing
        # at every dataset size.
        inv_n = 1.0 / X.shape[0]
        for name in grads:
            grads[name] = grads[name] * inv_n
        opt.step(net.params, grads)

        if (it + 1) % train_cfg.eval_every == 0 or it + 1 == train_cfg.iterations:
            maybe_checkpoint(it + 1)

    if train_cfg.validation_selection and best[1] is not None:
        net.load_state(best[1])
    history = TrainHistory(
        train_objective=history_train,
        eval_iters=np.asarray(eval_iters),
        eval_objective=np.asarray(eval_vals),
        best_iter=best[2],
    )
    return net, history


def mcdo_train(train, valid, net_cfg, train_cfg, rng=None):
    """Train a dropout network on the deepest head's Gaussian NLL."""
    if net_cfg.dropout_prob <= 0:
        raise UsageError("MC dropout needs dropout_prob > 0; use sgd_train otherwise")
    return _nll_train_loop(train, valid, net_cfg, train_cfg, rng, train_mode="train")


def mcdo_predict(
    net: Network, X: np.ndarray, n_samples: int = 10, rng: np.random.Generator | None = None
) -> GaussianMixturePredictive:
    """Equally weighted mixture over stochastic forward passes with dropout on."""
    if n_samples < 1:
        raise UsageError("n_samples must be >= 1")
    if rng is None:
        raise UsageError("MC dropout prediction needs a random generator")
    if net.cfg.output_dim != 1:
        raise UsageError("mixture predictive is defined for scalar outputs")
    X = np.asarray(X, dtype=np.float64)
    means = np.empty((X.shape[0], n_samples))
    for k in range(n_samples):
        outputs, _ = net.forward_all_depths(X, mode="sample", rng=rng)
        means[:, k] = outputs[-1, :, 0]
    var = np.exp(2.0 * net.log_noise)
    return GaussianMixturePredictive(
        weights=np.full(n_samples, 1.0 / n_samples),
        means=means,
        variances=np.full_like(means, var),
    )


def sgd_train(train, valid, net_cfg, train_cfg, rng=None):
    """Train a deterministic network on the deepest head's Gaussian NLL."""
    if net_cfg.dropout_prob != 0:
        raise UsageError("the deterministic baseline must have dropout_prob == 0")
    return _nll_train_loop(train, valid, net_cfg, train_cfg, rng, train_mode="train")


def sgd_predict(net: Network, X: np.ndarray) -> GaussianMixturePredictive:
    """Single-component Gaussian predictive from a deterministic forward pass."""
    if net.cfg.output_dim != 1:
        raise UsageError("mixture predictive is defined for scalar outputs")
    outputs, _ = net.forward_all_depths(np.asarray(X, dtype=np.float64), mode="eval")
    var = np.exp(2.0 * net.log_noise)
    means = outputs[-1, :, 0][:, None]
    return GaussianMixturePredictive(
        weights=np.array([1.0]),
        means=means,
        variances=np.full_like(means, var),
    )


class MfviNetwork:
    """Residual network with a factorized Gaussian posterior over every weight.

    Parameters live in `params` with keys `<layer>.W_mu`, `<layer>.W_rho`,
    `<layer>.b_mu`, `<layer>.b_rho` (rho is the log standard deviation) plus a
    scalar `log_noise`. Layers are `f0` (input affine), `f1..fD` (residual
    branches with ReLU) and `out` (deepest head). Pre-activations are sampled
    directly from their induced Gaussians, so a forward pass needs one noise
    array per layer rather than one per weight.
    """

    def __init__(self, cfg: NetworkConfig, rng: np.random.Generator | None = None):
        if cfg.use_batchnorm or cfg.dropout_prob != 0:
            raise UsageError("mean-field VI supports neither batchnorm nor dropout")
        self.cfg = cfg
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self.params: dict[str, np.ndarray] = {}
        self._add_layer("f0", cfg.input_dim, cfg.hidden_dim, rng)
        for i in range(1, cfg.depth + 1):
            self._add_layer(f"f{i}", cfg.hidden_dim, cfg.hidden_dim, rng)
        self._add_layer("out", cfg.hidden_dim, cfg.output_dim, rng)
        self.params["log_noise"] = np.asarray(0.0)

    def _add_layer(self, name, fan_in, fan_out, rng):
        self.params[f"{name}.W_mu"] = he_init(rng, fan_in, fan_out)
        self.params[f"{name}.W_rho"] = np.full((fan_in, fan_out), MFVI_RHO_INIT)
        self.params[f"{name}.b_mu"] = np.zeros(fan_out)
        self.params[f"{name}.b_rho"] = np.full(fan_out, MFVI_RHO_INIT)

    @property
    def log_noise(self) -> float:
        return float(self.params["log_noise"])

    def layer_names(self) -> list[str]:
        return ["f0"] + [f"f{i}" for i in range(1, self.cfg.depth + 1)] + ["out"]

    def eps_shapes(self, n: int) -> dict[str, tuple[int, int]]:
        dims = {"f0": self.cfg.hidden_dim, "out": self.cfg.output_dim}
        return {
            name: (n, dims.get(name, self.cfg.hidden_dim)) for name in self.layer_names()
        }

    def sample_eps(self, rng: np.random.Generator, n: int) -> dict[str, np.ndarray]:
        return {k: rng.standard_normal(s) for k, s in self.eps_shapes(n).items()}

    def _affine(self, name, H, eps, cache):
        p = self.params
        mu = H @ p[f"{name}.W_mu"] + p[f"{name}.b_mu"]
        if eps is None:
            cache[name] = {"H": H, "mu": mu, "eps": None}
            return mu
        s2_w = np.exp(2.0 * p[f"{name}.W_rho"])
        s2_b = np.exp(2.0 * p[f"{name}.b_rho"])
        H2 = H * H
        v = H2 @ s2_w + s2_b
        sv = np.sqrt(v)
        z = mu + sv * eps[name]
        cache[name] = {"H": H, "H2": H2, "s2_w": s2_w, "s2_b": s2_b, "sv": sv, "eps": eps[name]}
        return z

    def forward(self, X: np.ndarray, eps: dict[str, np.ndarray] | None = None):
        """One pass; `eps=None` uses the posterior means (deterministic)."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.cfg.input_dim:
            raise ShapeError(f"expected (n, {self.cfg.input_dim}) input, got {X.shape}")
        cache = {"X": X}
        h = self._affine("f0", X, eps, cache)
        for i in range(1, self.cfg.depth + 1):
            z = self._affine(f"f{i}", h, eps, cache)
            mask = z > 0
            cache[f"f{i}.mask"] = mask
            h = h + np.where(mask, z, 0.0)
        out = self._affine("out", h, eps, cache)
        if not np.all(np.isfinite(out)):
            raise NumericError("non-finite output in variational forward pass")
        return out, cache

    def _affine_backward(self, name, g, cache, grads):
        p = self.params
        c = cache[name]
        H = c["H"]
        grads[f"{name}.W_mu"] += H.T @ g
        grads[f"{name}.b_mu"] += g.sum(axis=0)
        dH = g @ p[f"{name}.W_mu"].T
        if c["eps"] is not None:
            dv = g * c["eps"] / (2.0 * c["sv"])
            grads[f"{name}.W_rho"] += (c["H2"].T @ dv) * (2.0 * c["s2_w"])
            grads[f"{name}.b_rho"] += dv.sum(axis=0) * (2.0 * c["s2_b"])
            dH += (dv @ c["s2_w"].T) * (2.0 * H)
        return dH

    def backward(self, cache, upstream: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of a scalar loss given d(loss)/d(output)."""
        grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        g = self._affine_backward("out", np.asarray(upstream, dtype=np.float64), cache, grads)
        for i in range(self.cfg.depth, 0, -1):
            gz = np.where(cache[f"f{i}.mask"], g, 0.0)
            g = g + self._affine_backward(f"f{i}", gz, cache, grads)
        self._affine_backward("f0", g, cache, grads)
        return grads

    def kl(self, prior_std: float = 1.0) -> float:
        """KL from the factorized posterior to an isotropic normal prior."""
        total = 0.0
        s2 = prior_std**2
        for name in self.layer_names():
            for part in ("W", "b"):
                mu = self.params[f"{name}.{part}_mu"]
                rho = self.params[f"{name}.{part}_rho"]
                sig2 = np.exp(2.0 * rho)
                total += float(
                    np.sum(np.log(prior_std) - rho + (sig2 + mu**2) / (2.0 * s2) - 0.5)
                )
        return total

    def kl_grads(self, prior_std: float = 1.0) -> dict[str, np.ndarray]:
        grads = {}
        s2 = prior_std**2
        for name in self.layer_names():
            for part in ("W", "b"):
                mu = self.params[f"{name}.{part}_mu"]
                rho = self.params[f"{name}.{part}_rho"]
                grads[f"{name}.{part}_mu"] = mu / s2
                grads[f"{name}.{part}_rho"] = np.exp(2.0 * rho) / s2 - 1.0
        return grads

    def copy_state(self) -> dict:
        return {k: v.copy() for k, v in self.params.items()}

    def load_state(self, state: dict) -> None:
        for k in self.params:
            self.params[k] = state[k].copy()


def build_mfvi(cfg: NetworkConfig, rng: np.random.Generator | None = None) -> MfviNetwork:
    return MfviNetwork(cfg, rng)


def mfvi_kl(net: MfviNetwork, prior_std: float = 1.0) -> float:
    return net.kl(prior_std)


def mfvi_train(
    train,
    valid,
    net_cfg: NetworkConfig,
    train_cfg: BaselineTrainConfig,
    rng: np.random.Generator | None = None,
    prior_std: float = 1.0,
) -> tuple[MfviNetwork, TrainHistory]:
    """Maximize the mean-field weight ELBO with Monte Carlo likelihood terms.

    The likelihood expectation is averaged over `mc_train_samples` local
    reparameterization draws per iteration; the KL term is exact. Weight decay
    is never applied (the KL already shrinks the posterior toward the prior).
    Checkpoint selection uses the deterministic-pass ELBO on the validation
    set (train set when empty); history.train_objective records the minimized
    negative ELBO estimate per iteration.
    """
    X, y = np.asarray(train[0], dtype=np.float64), _as_2d_targets(train[1])
    if X.shape[0] == 0:
        raise UsageError("empty training set")
    has_valid = valid is not None and len(valid[0]) > 0
    rng = rng if rng is not None else np.random.default_rng(net_cfg.seed)

    net = build_mfvi(net_cfg, rng)
    opt = OptimizerState(
        learning_rate=train_cfg.learning_rate,
        momentum=train_cfg.momentum,
        weight_decay=0.0,
        exclude_decay=frozenset(),
    )

    def selection_objective() -> float:
        Xs, ys = (valid if has_valid else (X, y))
        Xs = np.asarray(Xs, dtype=np.float64)
        ys = _as_2d_targets(ys)
        out, _ = net.forward(Xs, eps=None)
        nll, _, _ = gaussian_nll_terms(out, ys, net.log_noise)
        return -nll - net.kl(prior_std)

    history_train = np.empty(train_cfg.iterations)
    eval_iters, eval_vals = [], []
    best = (-np.inf, None, -1)

    def maybe_checkpoint(it: int) -> None:
        nonlocal best
        if not train_cfg.validation_selection:
            return
        obj = selection_objective()
        eval_iters.append(it)
        eval_vals.append(obj)
        if obj > best[0]:
            best = (obj, net.copy_state(), it)

    n_samples = train_cfg.mc_train_samples
    maybe_checkpoint(0)
    for it in range(train_cfg.iterations):
        grads = {k: np.zeros_like(v) for k, v in net.params.items()}
        loss_ll = 0.0
        for _ in range(n_samples):
            eps = net.sample_eps(rng, X.shape[0])
            try:
                out, cache = net.forward(X, eps=eps)
            except NumericError as exc:
                raise TrainingError(
                    f"diverged at iteration {it}: {exc}", iteration=it
                ) from exc
            nll, d_pred, d_log_noise = gaussian_nll_terms(out, y, net.log_noise)
            loss_ll += nll
            sample_grads = net.backward(cache, d_pred)
            for k, g in sample_grads.items():
                grads[k] += g
            grads["log_noise"] = grads["log_noise"] + d_log_noise
        for k in grads:
            grads[k] = grads[k] / n_samples
        for k, g in net.kl_grads(prior_std).items():
            grads[k] += g
        loss = loss_ll / n_samples + net.kl(prior_std)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss at iteration {it}", iteration=it)
        history_train[it] = loss
        # Per-example mean gradients, matching the other trainers; the loss
        # recorded in history stays in sum form.
        inv_n = 1.0 / X.shape[0]
        for name in grads:
            grads[name] = grads[name] * inv_n
        opt.step(net.params, grads)
        if (it + 1) % train_cfg.eval_every == 0 or it + 1 == train_cfg.iterations:
            maybe_checkpoint(it + 1)

    if train_cfg.validation_selection and best[1] is not None:
        net.load_state(best[1])
    history = TrainHistory(
        train_objective=history_train,
        eval_iters=np.asarray(eval_iters),
        eval_objective=np.asarray(eval_vals),
        best_iter=best[2],
    )
    return net, history


def mfvi_predict(
    net: MfviNetwork, X: np.ndarray, n_samples: int = 10, rng: np.random.Generator | None = None
) -> GaussianMixturePredictive:
    """Equally weighted mixture over posterior samples of the weights."""
    if n_samples < 1:
        raise UsageError("n_samples must be >= 1")
    if rng is None:
        raise UsageError("mean-field VI prediction needs a random generator")
    if net.cfg.output_dim != 1:
        raise UsageError("mixture predictive is defined for scalar outputs")
    X = np.asarray(X, dtype=np.float64)
    means = np.empty((X.shape[0], n_samples))
    for k in range(n_samples):
        out, _ = net.forward(X, eps=net.sample_eps(rng, X.shape[0]))
        means[:, k] = out[:, 0]
    var = np.exp(2.0 * net.log_noise)
    return GaussianMixturePredictive(
        weights=np.full(n_samples, 1.0 / n_samples),
        means=means,
        variances=np.full_like(means, var),
    )
