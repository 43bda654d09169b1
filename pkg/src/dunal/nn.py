"""Residual MLP core: multi-depth forward pass, hand-derived backprop, SGD.

The architecture is fixed: an affine input block lifting inputs to the hidden
width, ``depth`` residual blocks (affine -> optional batchnorm -> ReLU ->
optional dropout -> skip add), and a single affine output block that is applied
to the activations of *every* depth, yielding ``depth + 1`` prediction heads.
Gradients are derived by hand for this family; there is no general autodiff.

All arrays are float64. Matrices are 2-D numpy arrays in row-major order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError, ShapeError, UsageError

BN_EPS = 1e-5
BN_MOMENTUM = 0.9

# Forward modes: "train" uses batch statistics (and updates running stats) and
# active dropout; "eval" uses running statistics and no dropout; "sample" uses
# running statistics with active dropout (MC-dropout prediction).
MODES = ("train", "eval", "sample")


@dataclass
class NetworkConfig:
    input_dim: int
    hidden_dim: int = 100
    depth: int = 10
    output_dim: int = 1
    use_batchnorm: bool = False
    dropout_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise ConfigError(f"input/output dims must be >= 1, got {self.input_dim}/{self.output_dim}")
        if self.hidden_dim < 1:
            raise ConfigError(f"hidden_dim must be >= 1, got {self.hidden_dim}")
        if self.depth < 0:
            raise ConfigError(f"depth must be >= 0, got {self.depth}")
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise ConfigError(f"dropout_prob must lie in [0, 1], got {self.dropout_prob}")


@dataclass
class OptimizerState:
    """SGD with momentum and decoupled-by-name weight decay.

    ``exclude_decay`` lists parameter names that never receive weight decay
    (batchnorm scale/shift, the observation-noise parameter, variational
    logits).
    """

    learning_rate: float = 1e-4
    momentum: float = 0.9
    weight_decay: float = 1e-5
    exclude_decay: frozenset = frozenset()
    velocity: dict = field(default_factory=dict)

    def step(self, params: dict, grads: dict) -> None:
        for name, p in params.items():
            g = grads[name]
            if np.shape(g) != np.shape(p):
                raise UsageError(f"gradient shape {np.shape(g)} != param shape {np.shape(p)} for '{name}'")
            if self.weight_decay != 0.0 and name not in self.exclude_decay:
                g = g + self.weight_decay * p
            v = self.velocity.get(name)
            if v is None:
                v = np.zeros_like(p)
            v = self.momentum * v + g
            self.velocity[name] = v
            params[name] = p - self.learning_rate * v


def sgd_step(params: dict, grads: dict, opt: OptimizerState) -> dict:
    """Apply one SGD update in place; returns the (mutated) params dict."""
    opt.step(params, grads)
    return params


def he_init(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))


class Network:
    """Residual MLP exposing per-depth predictions and exact gradients.

    Parameters live in ``self.params`` keyed by name; batchnorm running
    statistics are separate non-trainable buffers. One instance is owned by
    one thread at a time; there is no global state.
    """

    def __init__(self, cfg: NetworkConfig, rng: np.random.Generator | None = None):
        self.cfg = cfg
        if rng is None:
            rng = np.random.default_rng(cfg.seed)
        h, d = cfg.hidden_dim, cfg.depth
        p = {
            "f0.W": he_init(rng, cfg.input_dim, h),
            "f0.b": np.zeros(h),
            "out.W": he_init(rng, h, cfg.output_dim),
            "out.b": np.zeros(cfg.output_dim),
            "log_noise": np.zeros(()),
        }
        for i in range(1, d + 1):
            p[f"f{i}.W"] = he_init(rng, h, h)
            p[f"f{i}.b"] = np.zeros(h)
            if cfg.use_batchnorm:
                p[f"f{i}.gamma"] = np.ones(h)
                p[f"f{i}.beta"] = np.zeros(h)
        self.params = p
        self.running_mean = {i: np.zeros(h) for i in range(1, d + 1)}
        self.running_var = {i: np.ones(h) for i in range(1, d + 1)}

    # -- parameter bookkeeping -------------------------------------------------

    def decay_exclusions(self) -> frozenset:
        excl = {"log_noise"}
        excl.update(k for k in self.params if k.endswith(".gamma") or k.endswith(".beta"))
        return frozenset(excl)

    def copy_state(self) -> dict:
        return {
            "params": {k: v.copy() for k, v in self.params.items()},
            "running_mean": {k: v.copy() for k, v in self.running_mean.items()},
            "running_var": {k: v.copy() for k, v in self.running_var.items()},
        }

    def load_state(self, state: dict) -> None:
        self.params = {k: v.copy() for k, v in state["params"].items()}
        self.running_mean = {k: v.copy() for k, v in state["running_mean"].items()}
        self.running_var = {k: v.copy() for k, v in state["running_var"].items()}

    @property
    def log_noise(self) -> float:
        return float(self.params["log_noise"])

    # -- forward ---------------------------------------------------------------

    def forward_all_depths(self, X: np.ndarray, mode: str = "eval", rng: np.random.Generator | None = None):
        """Run all subnetworks; returns (outputs, cache).

        ``outputs`` has shape (depth + 1, N, output_dim): ``outputs[i]`` is the
        prediction from the subnetwork of depth ``i``. ``cache`` feeds
        :meth:`backward` and is only populated with gradients in mind (any mode
        works, as long as backward sees the same cache).
        """
        cfg = self.cfg
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != cfg.input_dim:
            raise ShapeError(f"expected inputs of shape (N, {cfg.input_dim}), got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise NumericError("non-finite entries in network input")
        if mode not in MODES:
            raise UsageError(f"unknown mode '{mode}'")
        train_bn = mode == "train"
        use_dropout = mode in ("train", "sample") and cfg.dropout_prob > 0.0
        if use_dropout and rng is None:
            raise UsageError("dropout is active but no rng was supplied")

        p = self.params
        n = X.shape[0]
        acts = np.empty((cfg.depth + 1, n, cfg.hidden_dim))
        acts[0] = X @ p["f0.W"] + p["f0.b"]
        blocks = []
        for i in range(1, cfg.depth + 1):
            h = acts[i - 1]
            z = h @ p[f"f{i}.W"] + p[f"f{i}.b"]
            blk = {"i": i}
            if cfg.use_batchnorm:
                if train_bn:
                    mu = z.mean(axis=0)
                    var = z.var(axis=0)
                    self.running_mean[i] = BN_MOMENTUM * self.running_mean[i] + (1 - BN_MOMENTUM) * mu
                    self.running_var[i] = BN_MOMENTUM * self.running_var[i] + (1 - BN_MOMENTUM) * var
                else:
                    mu = self.running_mean[i]
                    var = self.running_var[i]
                inv_std = 1.0 / np.sqrt(var + BN_EPS)
                zhat = (z - mu) * inv_std
                z = p[f"f{i}.gamma"] * zhat + p[f"f{i}.beta"]
                blk["zhat"] = zhat
                blk["inv_std"] = inv_std
                blk["bn_batch"] = train_bn
            relu_mask = z > 0
            z = np.where(relu_mask, z, 0.0)
            blk["relu_mask"] = relu_mask
            if use_dropout:
                keep = 1.0 - cfg.dropout_prob
                mask = (rng.random(z.shape) < keep) / keep
                z = z * mask
                blk["drop_mask"] = mask
            acts[i] = h + z
            blocks.append(blk)

        flat = acts.reshape(-1, cfg.hidden_dim)
        outputs = (flat @ p["out.W"] + p["out.b"]).reshape(cfg.depth + 1, n, cfg.output_dim)
        bad = ~np.isfinite(outputs).reshape(cfg.depth + 1, -1).all(axis=1)
        if bad.any():
            raise NumericError(f"non-finite output at depth {int(np.argmax(bad))}")
        cache = {"X": X, "acts": acts, "blocks": blocks, "mode": mode}
        return outputs, cache

    # -- backward --------------------------------------------------------------

    def backward(self, cache: dict, upstream: np.ndarray) -> dict:
        """Exact gradients of a scalar loss given d(loss)/d(outputs).

        ``upstream`` has shape (depth + 1, N, output_dim), aligned with the
        outputs of the forward pass that produced ``cache``. The returned dict
        is shape-matched to ``self.params``; the ``log_noise`` entry is zero
        (its gradient is routed by the caller, since the loss owns the
        likelihood).
        """
        cfg = self.cfg
        if cache is None or "acts" not in cache:
            raise UsageError("backward needs the cache from a forward pass on the same inputs")
        acts = cache["acts"]
        d1, n, _ = acts.shape
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.shape != (d1, n, cfg.output_dim):
            raise ShapeError(f"upstream shape {upstream.shape} != {(d1, n, cfg.output_dim)}")
        p = self.params
        grads = {"log_noise": np.zeros(())}

        flat_a = acts.reshape(-1, cfg.hidden_dim)
        flat_u = upstream.reshape(-1, cfg.output_dim)
        grads["out.W"] = flat_a.T @ flat_u
        grads["out.b"] = flat_u.sum(axis=0)
        d_acts = (flat_u @ p["out.W"].T).reshape(d1, n, cfg.hidden_dim)

        g = d_acts[cfg.depth].copy()
        for blk in reversed(cache["blocks"]):
            i = blk["i"]
            gz = g.copy()
            if "drop_mask" in blk:
                gz *= blk["drop_mask"]
            gz *= blk["relu_mask"]
            if cfg.use_batchnorm:
                zhat, inv_std = blk["zhat"], blk["inv_std"]
                grads[f"f{i}.gamma"] = (gz * zhat).sum(axis=0)
                grads[f"f{i}.beta"] = gz.sum(axis=0)
                gz = gz * p[f"f{i}.gamma"]
                if blk["bn_batch"]:
                    gz = inv_std / n * (n * gz - gz.sum(axis=0) - zhat * (gz * zhat).sum(axis=0))
                else:
                    gz = gz * inv_std
            h = acts[i - 1]
            grads[f"f{i}.W"] = h.T @ gz
            grads[f"f{i}.b"] = gz.sum(axis=0)
            g = g + gz @ p[f"f{i}.W"].T + d_acts[i - 1]
        grads["f0.W"] = cache["X"].T @ g
        grads["f0.b"] = g.sum(axis=0)
        return grads


def build_network(cfg: NetworkConfig, rng: np.random.Generator | None = None) -> Network:
    return Network(cfg, rng)


def finite_diff_check(loss_fn, net: Network, h: float = 1e-5, tolerance: float = 1e-4) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn(net)`` must return ``(loss, grads)`` and be deterministic (fixed
    dropout masks / fixed or batch-computed statistics). ``tolerance`` is the
    threshold callers compare the result against; this function only reports
    the number.
    """
    del tolerance
    _, grads = loss_fn(net)
    worst = 0.0
    for name, param in net.params.items():
        flat = param.reshape(-1)
        gflat = np.asarray(grads[name]).reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            lp, _ = loss_fn(net)
            flat[j] = orig - h
            lm, _ = loss_fn(net)
            flat[j] = orig
            fd = (lp - lm) / (2 * h)
            denom = max(abs(gflat[j]), abs(fd), 1e-8)
            worst = max(worst, abs(gflat[j] - fd) / denom)
    return worst


def _min_kink_distance(net: Network, X: np.ndarray, mode: str) -> float:
    """Smallest |pre-ReLU value| across blocks; finite differences straddle
    the ReLU corner when this is comparable to the step size."""
    _, cache = net.forward_all_depths(X, mode=mode)
    dist = np.inf
    p = net.params
    for blk in cache["blocks"]:
        i = blk["i"]
        if "zhat" in blk:
            pre = p[f"f{i}.gamma"] * blk["zhat"] + p[f"f{i}.beta"]
        else:
            pre = cache["acts"][i - 1] @ p[f"f{i}.W"] + p[f"f{i}.b"]
        dist = min(dist, float(np.abs(pre).min()))
    return dist


def gradient_check_suite(n_nets: int = 20, seed: int = 0) -> list[float]:
    """Finite-difference errors for randomized small networks.

    Alternates plain nets (checked in train mode) with batchnorm nets checked
    in frozen-stats mode, which makes the loss a plain differentiable function
    of the parameters. Inputs that put a pre-ReLU value near the kink are
    redrawn, since central differences are meaningless across the corner. The
    loss sums squared errors over every prediction head so every parameter is
    exercised.
    """
    rng = np.random.default_rng(seed)
    errors = []
    for k in range(n_nets):
        use_bn = bool(k % 2)
        cfg = NetworkConfig(
            input_dim=int(rng.integers(1, 5)),
            hidden_dim=int(rng.integers(2, 9)),
            depth=int(rng.integers(0, 4)),
            output_dim=int(rng.integers(1, 3)),
            use_batchnorm=use_bn,
            seed=int(rng.integers(0, 2**31)),
        )
        net = build_network(cfg)
        for i in net.running_mean:
            net.running_mean[i] = rng.normal(scale=0.3, size=cfg.hidden_dim)
            net.running_var[i] = np.exp(rng.normal(scale=0.3, size=cfg.hidden_dim))
        if use_bn:
            # exercise non-trivial scale/shift parameters
            for i in range(1, cfg.depth + 1):
                net.params[f"f{i}.gamma"] = np.exp(rng.normal(scale=0.2, size=cfg.hidden_dim))
                net.params[f"f{i}.beta"] = rng.normal(scale=0.2, size=cfg.hidden_dim)
        mode = "eval" if use_bn else "train"
        n = int(rng.integers(2, 7))
        for _ in range(50):
            X = rng.normal(size=(n, cfg.input_dim))
            if _min_kink_distance(net, X, mode) > 1e-3:
                break
        y = rng.normal(size=(n, cfg.output_dim))

        def loss_fn(net, X=X, y=y, mode=mode):
            outputs, cache = net.forward_all_depths(X, mode=mode)
            resid = outputs - y[None, :, :]
            loss = float(np.sum(resid**2))
            grads = net.backward(cache, 2.0 * resid)
            return loss, grads

        errors.append(finite_diff_check(loss_fn, net))
    return errors
