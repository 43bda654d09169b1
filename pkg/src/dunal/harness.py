"""Active learning experiment harness.

One *run* is: split and standardize a dataset, seed a training pool with
uniform picks, then alternate training a fresh model on the acquired points,
evaluating it, and acquiring the next batch. Runs are repeated over seeds and
aggregated; results persist as plain CSV so they can be consumed without this
package.

Seeding: every random draw comes from a generator keyed by an integer tuple
(run seed, purpose, round, attempt), so results do not depend on execution
order and identical configs reproduce identical outputs bit for bit.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acquisition import (
    AcquisitionConfig,
    AcquisitionStep,
    acquire_batch,
    dun_bald,
    gaussian_mixture_bald,
)
from .baselines import (
    BaselineTrainConfig,
    mcdo_predict,
    mcdo_train,
    mfvi_predict,
    mfvi_train,
    sgd_predict,
    sgd_train,
)
from .data import (
    DATASET_REGISTRY,
    Dataset,
    gen_toy,
    gen_uci_synthetic,
    load_delimited,
    split_standardize,
)
from .dun import (
    DepthDistribution,
    DunTrainConfig,
    dun_predict,
    fitted_depth_posterior,
    train_dun,
)
from .errors import TrainingError, UsageError
from .predictive import mixture_nll, mixture_rmse
from .risk import overfitting_bias, pointwise_loss

__all__ = [
    "METHODS",
    "ModelConfig",
    "TrainSettings",
    "AcquisitionSettings",
    "ExperimentConfig",
    "ActivePool",
    "init_pool",
    "RoundRecord",
    "RunResult",
    "ExperimentResult",
    "run_single",
    "run_experiment",
    "run_sweep",
    "measure_depth_adaptation",
    "persist_experiment",
    "RUNS_COLUMNS",
    "AGGREGATE_COLUMNS",
    "POSTERIOR_COLUMNS",
]

METHODS = ("dun", "mcdo", "mfvi", "sgd")
PRIORS = ("uniform", "decaying")


@dataclass
class ModelConfig:
    """Architecture and predictive settings; None fields get method defaults."""

    method: str = "dun"
    depth: int | None = None  # depth-marginalized nets default to 10, others 3
    hidden_dim: int = 100
    batchnorm: bool | None = None  # on for the depth model, off for baselines
    dropout_prob: float | None = None  # 0.1 for MC dropout, otherwise 0
    prior: str = "uniform"
    prior_rho: float = 0.95
    mc_eval_samples: int = 10

    def __post_init__(self):
        if self.method not in METHODS:
            raise UsageError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.prior not in PRIORS:
            raise UsageError(f"unknown prior {self.prior!r}; choose from {PRIORS}")
        if self.depth is None:
            self.depth = 10 if self.method == "dun" else 3
        if self.batchnorm is None:
            self.batchnorm = self.method == "dun"
        if self.dropout_prob is None:
            self.dropout_prob = 0.1 if self.method == "mcdo" else 0.0
        if self.mc_eval_samples < 1:
            raise UsageError("mc_eval_samples must be >= 1")

    def depth_prior(self) -> DepthDistribution:
        n = self.depth + 1
        if self.prior == "uniform":
            return DepthDistribution.uniform(n)
        return DepthDistribution.decaying(n, rho=self.prior_rho)


@dataclass
class TrainSettings:
    iterations: int = 1000
    learning_rate: float = 1e-4
    momentum: float = 0.9
    weight_decay: float = 1e-5
    mc_train_samples: int = 5
    eval_every: int = 10


@dataclass
class AcquisitionSettings:
    strategy: str = "bald_stochastic"
    temperature: float = 10.0

    def __post_init__(self):
        # reuse the acquisition validation (batch size filled in per round)
        AcquisitionConfig(strategy=self.strategy, temperature=self.temperature)


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one experiment."""

    dataset: str
    n_repeats: int = 1
    seed_base: int = 0
    data_path: str | None = None  # delimited file; falls back to synthetic
    n_init: int | None = None  # schedule overrides; None uses the registry
    n_queries: int | None = None
    query_size: int | None = None
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainSettings = field(default_factory=TrainSettings)
    acquisition: AcquisitionSettings = field(default_factory=AcquisitionSettings)

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = ModelConfig(**self.model)
        if isinstance(self.train, dict):
            self.train = TrainSettings(**self.train)
        if isinstance(self.acquisition, dict):
            self.acquisition = AcquisitionSettings(**self.acquisition)
        if self.dataset not in DATASET_REGISTRY and self.data_path is None:
            raise UsageError(
                f"unknown dataset {self.dataset!r} and no data_path given; "
                f"registered: {sorted(DATASET_REGISTRY)}"
            )
        if self.n_repeats < 1:
            raise UsageError("n_repeats must be >= 1")

    def schedule(self) -> tuple[int, int, int]:
        """(n_init, n_queries, query_size) with registry defaults filled in."""
        spec = DATASET_REGISTRY.get(self.dataset)
        n_init = self.n_init if self.n_init is not None else (spec.n_init if spec else 10)
        n_queries = (
            self.n_queries if self.n_queries is not None else (spec.n_queries if spec else 10)
        )
        query_size = (
            self.query_size if self.query_size is not None else (spec.query_size if spec else 5)
        )
        if min(n_init, query_size) < 1 or n_queries < 0:
            raise UsageError(
                f"bad schedule n_init={n_init}, n_queries={n_queries}, "
                f"query_size={query_size}"
            )
        return n_init, n_queries, query_size

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"invalid config JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise UsageError("config JSON must be an object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise UsageError(f"unknown config fields: {sorted(unknown)}")
        return cls(**payload)


def _rng(seed: int, *key: int) -> np.random.Generator:
    """Generator keyed by an integer tuple; independent of call order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))


# purpose ids for _rng keys
_P_SPLIT, _P_POOL, _P_TRAIN, _P_EVAL, _P_SCORE, _P_ACQUIRE = range(6)


class ActivePool:
    """Bookkeeping for which pool points have been acquired, in what order."""

    def __init__(self, n_pool: int):
        if n_pool < 1:
            raise UsageError("pool must contain at least one point")
        self.n_pool = n_pool
        self.steps: list[AcquisitionStep] = []
        self._selected = np.zeros(n_pool, dtype=bool)

    @property
    def remaining(self) -> np.ndarray:
        return np.flatnonzero(~self._selected)

    @property
    def selected_indices(self) -> np.ndarray:
        return np.asarray([s.index for s in self.steps], dtype=np.intp)

    @property
    def alphas(self) -> np.ndarray:
        return np.asarray([s.probability for s in self.steps])

    @property
    def n_selected(self) -> int:
        return len(self.steps)

    def add_steps(self, steps: list[AcquisitionStep]) -> None:
        for step in steps:
            if not 0 <= step.index < self.n_pool:
                raise UsageError(f"index {step.index} outside pool of {self.n_pool}")
            if self._selected[step.index]:
                raise UsageError(f"index {step.index} acquired twice")
            self._selected[step.index] = True
            self.steps.append(step)


def init_pool(pool: ActivePool, n_init: int, rng: np.random.Generator) -> None:
    """Seed the pool with uniform picks (recorded like any acquisition)."""
    cfg = AcquisitionConfig(strategy="random", batch_size=n_init)
    pool.add_steps(acquire_batch(np.zeros(pool.n_pool), pool.remaining, cfg, rng))


@dataclass
class RoundRecord:
    round: int
    n_train: int
    test_nll: float
    test_rmse: float
    bias_nll: float
    bias_squared: float
    weighted_train_nll: float
    unweighted_train_nll: float
    train_seconds: float
    depth_posterior: np.ndarray | None = None

    @property
    def mean_depth(self) -> float:
        if self.depth_posterior is None:
            return float("nan")
        return float(np.arange(self.depth_posterior.size) @ self.depth_posterior)


@dataclass
class RunResult:
    repeat: int
    seed: int
    rounds: list[RoundRecord]
    failed_at_round: int | None = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: list[RunResult]

    def metric_matrix(self, name: str) -> np.ndarray:
        """(n_runs, n_rounds) array of one metric, NaN where missing."""
        n_rounds = max((len(r.rounds) for r in self.runs), default=0)
        out = np.full((len(self.runs), n_rounds), np.nan)
        for i, run in enumerate(self.runs):
            for rec in run.rounds:
                out[i, rec.round] = getattr(rec, name)
        return out


def _nan_record(r: int, n_train: int) -> RoundRecord:
    nan = float("nan")
    return RoundRecord(r, n_train, nan, nan, nan, nan, nan, nan, nan)


def _load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.data_path is not None:
        path = Path(cfg.data_path)
        if path.exists():
            return load_delimited(path, name=cfg.dataset)
        if cfg.dataset not in DATASET_REGISTRY:
            raise UsageError(f"data file {path} not found and {cfg.dataset!r} unregistered")
    spec = DATASET_REGISTRY.get(cfg.dataset)
    if spec is not None and spec.toy:
        return gen_toy(cfg.dataset)
    return gen_uci_synthetic(cfg.dataset)


def _fit_model(cfg: ExperimentConfig, input_dim, train, valid, rng):
    """Train one fresh model; returns (predict, score, depth_posterior)."""
    from .nn import NetworkConfig

    m = cfg.model
    t = cfg.train
    net_cfg = NetworkConfig(
        input_dim=input_dim,
        hidden_dim=m.hidden_dim,
        depth=m.depth,
        use_batchnorm=m.batchnorm,
        dropout_prob=m.dropout_prob if m.method in ("mcdo",) else 0.0,
    )
    if m.method == "dun":
        dun_cfg = DunTrainConfig(
            iterations=t.iterations,
            learning_rate=t.learning_rate,
            momentum=t.momentum,
            weight_decay=t.weight_decay,
            prior=m.depth_prior(),
            eval_every=t.eval_every,
        )
        net, q, _ = train_dun(train, valid, net_cfg, dun_cfg, rng)
        posterior = fitted_depth_posterior(net, dun_cfg.prior, train[0], train[1])
        return (
            lambda X, _rng_eval: dun_predict(net, q, X),
            lambda X, _rng_eval: dun_bald(net, q, X),
            posterior.probs.copy(),
        )

    base_cfg = BaselineTrainConfig(
        iterations=t.iterations,
        learning_rate=t.learning_rate,
        momentum=t.momentum,
        weight_decay=t.weight_decay,
        eval_every=t.eval_every,
        mc_train_samples=t.mc_train_samples,
    )
    if m.method == "mcdo":
        net, _ = mcdo_train(train, valid, net_cfg, base_cfg, rng)
        predict = lambda X, rng_eval: mcdo_predict(  # noqa: E731
            net, X, n_samples=m.mc_eval_samples, rng=rng_eval
        )
    elif m.method == "mfvi":
        net, _ = mfvi_train(train, valid, net_cfg, base_cfg, rng)
        predict = lambda X, rng_eval: mfvi_predict(  # noqa: E731
            net, X, n_samples=m.mc_eval_samples, rng=rng_eval
        )
    else:  # sgd
        net, _ = sgd_train(train, valid, net_cfg, base_cfg, rng)
        predict = lambda X, _rng_eval: sgd_predict(net, X)  # noqa: E731
    return predict, lambda X, rng_eval: gaussian_mixture_bald(predict(X, rng_eval)), None


def run_single(cfg: ExperimentConfig, repeat: int) -> RunResult:
    """One full active learning run for repeat index `repeat`."""
    seed = cfg.seed_base + repeat
    n_init, n_queries, query_size = cfg.schedule()
    ds = _load_dataset(cfg)
    split = split_standardize(ds, seed=int(_rng(seed, _P_SPLIT).integers(2**31)))
    y_scale, y_shift = split.y_scale, split.y_shift
    y_train_orig = split.y_scaler.inverse_transform(split.train.y)
    y_test_orig = split.y_scaler.inverse_transform(split.test.y)
    valid = (split.valid.X, split.valid.y) if len(split.valid) else None

    pool = ActivePool(len(split.train))
    if n_init > pool.n_pool:
        raise UsageError(f"n_init={n_init} exceeds pool of {pool.n_pool}")
    init_pool(pool, n_init, _rng(seed, _P_POOL))

    rounds: list[RoundRecord] = []
    failed_at = None
    for r in range(n_queries + 1):
        sel = pool.selected_indices
        train_xy = (split.train.X[sel], split.train.y[sel])

        artifacts = None
        start = time.perf_counter()
        for attempt in (0, 1):
            try:
                artifacts = _fit_model(
                    cfg, ds.input_dim, train_xy, valid, _rng(seed, _P_TRAIN, r, attempt)
                )
                break
            except TrainingError:
                if attempt == 1:
                    failed_at = r
        elapsed = time.perf_counter() - start
        if artifacts is None:
            rounds.append(_nan_record(r, pool.n_selected))
            break
        predict, score, depth_posterior = artifacts

        rng_eval = _rng(seed, _P_EVAL, r)
        pred_test = predict(split.test.X, rng_eval).scaled(y_scale, y_shift)
        pred_sel = predict(split.train.X[sel], rng_eval).scaled(y_scale, y_shift)
        report_nll = overfitting_bias(
            pointwise_loss(pred_sel, y_train_orig[sel], "nll"),
            pool.alphas,
            pool.n_pool,
            pointwise_loss(pred_test, y_test_orig, "nll"),
            loss_kind="nll",
        )
        report_sq = overfitting_bias(
            pointwise_loss(pred_sel, y_train_orig[sel], "squared"),
            pool.alphas,
            pool.n_pool,
            pointwise_loss(pred_test, y_test_orig, "squared"),
            loss_kind="squared",
        )
        rounds.append(
            RoundRecord(
                round=r,
                n_train=pool.n_selected,
                test_nll=mixture_nll(pred_test, y_test_orig),
                test_rmse=mixture_rmse(pred_test, y_test_orig),
                bias_nll=report_nll.bias,
                bias_squared=report_sq.bias,
                weighted_train_nll=report_nll.weighted_train_risk,
                unweighted_train_nll=report_nll.unweighted_train_risk,
                train_seconds=elapsed,
                depth_posterior=depth_posterior,
            )
        )

        if r == n_queries:
            break
        k = min(query_size, pool.remaining.size)
        if k == 0:
            break  # pool exhausted; later rounds would retrain identical data
        scores = score(split.train.X, _rng(seed, _P_SCORE, r))
        acq_cfg = AcquisitionConfig(
            strategy=cfg.acquisition.strategy,
            temperature=cfg.acquisition.temperature,
            batch_size=k,
        )
        pool.add_steps(
            acquire_batch(scores, pool.remaining, acq_cfg, _rng(seed, _P_ACQUIRE, r))
        )

    return RunResult(repeat=repeat, seed=seed, rounds=rounds, failed_at_round=failed_at)


def run_experiment(cfg: ExperimentConfig, progress=None) -> ExperimentResult:
    """All repeats of an experiment; `progress` (if given) is called per run."""
    runs = []
    for repeat in range(cfg.n_repeats):
        run = run_single(cfg, repeat)
        runs.append(run)
        if progress is not None:
            progress(run)
    return ExperimentResult(config=cfg, runs=runs)


def measure_depth_adaptation(
    ds: Dataset,
    sizes,
    n_seeds: int,
    model: ModelConfig | None = None,
    train: TrainSettings | None = None,
    seed_base: int = 0,
) -> np.ndarray:
    """Posterior mean depth after training on subsets of increasing size.

    For each seed, draws nested random subsets of the standardized train split
    at each requested size, trains a fresh depth-marginalized model on each,
    and records the posterior mean depth. Returns (n_seeds, len(sizes)).
    """
    model = model if model is not None else ModelConfig(method="dun")
    train_cfg = train if train is not None else TrainSettings()
    if model.method != "dun":
        raise UsageError("depth adaptation is defined for the depth-marginalized model")
    sizes = [int(s) for s in sizes]
    if not sizes or min(sizes) < 2:
        raise UsageError(f"subset sizes must be >= 2, got {sizes}")
    from .nn import NetworkConfig

    out = np.empty((n_seeds, len(sizes)))
    for i in range(n_seeds):
        seed = seed_base + i
        split = split_standardize(ds, seed=int(_rng(seed, _P_SPLIT).integers(2**31)))
        if max(sizes) > len(split.train):
            raise UsageError(
                f"subset size {max(sizes)} exceeds train split of {len(split.train)}"
            )
        order = _rng(seed, _P_POOL).permutation(len(split.train))
        valid = (split.valid.X, split.valid.y) if len(split.valid) else None
        for j, size in enumerate(sizes):
            idx = order[:size]
            net_cfg = NetworkConfig(
                input_dim=ds.input_dim,
                hidden_dim=model.hidden_dim,
                depth=model.depth,
                use_batchnorm=model.batchnorm,
            )
            dun_cfg = DunTrainConfig(
                iterations=train_cfg.iterations,
                learning_rate=train_cfg.learning_rate,
                momentum=train_cfg.momentum,
                weight_decay=train_cfg.weight_decay,
                prior=model.depth_prior(),
                eval_every=train_cfg.eval_every,
            )
            net, _, _ = train_dun(
                (split.train.X[idx], split.train.y[idx]),
                valid,
                net_cfg,
                dun_cfg,
                _rng(seed, _P_TRAIN, j, 0),
            )
            posterior = fitted_depth_posterior(
                net, dun_cfg.prior, split.train.X[idx], split.train.y[idx]
            )
            out[i, j] = posterior.mean_depth()
    return out


_SWEEP_AXES = {
    "temperature": ("acquisition", "temperature"),
    "strategy": ("acquisition", "strategy"),
    "method": ("model", "method"),
    "depth": ("model", "depth"),
    "prior": ("model", "prior"),
}


def run_sweep(base: ExperimentConfig, axis: str, values, progress=None):
    """Repeat an experiment varying one axis, with shared seeds across values."""
    if axis not in _SWEEP_AXES:
        raise UsageError(f"unknown sweep axis {axis!r}; choose from {sorted(_SWEEP_AXES)}")
    section_name, field_name = _SWEEP_AXES[axis]
    results = []
    for value in values:
        section = dataclasses.replace(getattr(base, section_name))
        setattr(section, field_name, value)
        if axis == "method":
            # re-derive the method's architecture defaults
            section = ModelConfig(
                method=value,
                hidden_dim=base.model.hidden_dim,
                prior=base.model.prior,
                prior_rho=base.model.prior_rho,
                mc_eval_samples=base.model.mc_eval_samples,
            )
        cfg = dataclasses.replace(base, **{section_name: section})
        results.append((value, run_experiment(cfg, progress=progress)))
    return results


RUNS_COLUMNS = [
    "dataset",
    "method",
    "strategy",
    "temperature",
    "repeat",
    "seed",
    "round",
    "n_train",
    "test_nll",
    "test_rmse",
    "bias_nll",
    "bias_squared",
    "weighted_train_nll",
    "unweighted_train_nll",
    "train_seconds",
]

AGGREGATE_COLUMNS = [
    "dataset",
    "method",
    "strategy",
    "temperature",
    "round",
    "n_train",
    "n_runs",
    "test_nll_mean",
    "test_nll_std",
    "test_rmse_mean",
    "test_rmse_std",
    "bias_nll_mean",
    "bias_nll_std",
    "bias_squared_mean",
    "bias_squared_std",
]

POSTERIOR_COLUMNS = ["dataset", "repeat", "seed", "round", "depth", "prob"]


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _write_csv(path: Path, columns, rows) -> None:
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def persist_experiment(result: ExperimentResult, out_dir, force: bool = False) -> Path:
    """Write config.json, runs.csv, aggregate.csv (and depth posteriors).

    Refuses a non-empty directory unless force=True.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    existing = [p for p in out.iterdir() if not p.name.startswith(".")]
    if existing and not force:
        raise UsageError(f"output directory {out} is not empty (use force to overwrite)")

    cfg = result.config
    (out / "config.json").write_text(cfg.to_json() + "\n")

    tag = (cfg.dataset, cfg.model.method, cfg.acquisition.strategy, cfg.acquisition.temperature)
    run_rows = []
    for run in result.runs:
        for rec in run.rounds:
            run_rows.append(
                (
                    *tag,
                    run.repeat,
                    run.seed,
                    rec.round,
                    rec.n_train,
                    rec.test_nll,
                    rec.test_rmse,
                    rec.bias_nll,
                    rec.bias_squared,
                    rec.weighted_train_nll,
                    rec.unweighted_train_nll,
                    rec.train_seconds,
                )
            )
    _write_csv(out / "runs.csv", RUNS_COLUMNS, run_rows)

    agg_rows = []
    n_rounds = max((len(r.rounds) for r in result.runs), default=0)
    metrics = ("test_nll", "test_rmse", "bias_nll", "bias_squared")
    mats = {name: result.metric_matrix(name) for name in metrics}
    n_train_mat = result.metric_matrix("n_train")
    for r in range(n_rounds):
        cells = []
        for name in metrics:
            col = mats[name][:, r]
            ok = np.isfinite(col)
            if ok.any():
                cells.extend([float(col[ok].mean()), float(col[ok].std())])
            else:
                cells.extend([float("nan"), float("nan")])
        col = n_train_mat[:, r]
        ok = np.isfinite(col)
        n_train = int(col[ok].max()) if ok.any() else 0
        agg_rows.append((*tag, r, n_train, int(ok.sum()), *cells))
    _write_csv(out / "aggregate.csv", AGGREGATE_COLUMNS, agg_rows)

    if cfg.model.method == "dun":
        post_rows = []
        for run in result.runs:
            for rec in run.rounds:
                if rec.depth_posterior is None:
                    continue
                for depth, prob in enumerate(rec.depth_posterior):
                    post_rows.append(
                        (cfg.dataset, run.repeat, run.seed, rec.round, depth, float(prob))
                    )
        _write_csv(out / "depth_posteriors.csv", POSTERIOR_COLUMNS, post_rows)
    return out
