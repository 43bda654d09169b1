"""Depth-marginalized neural networks for active learning on regression tasks.

A feed-forward residual network is evaluated at every depth from 0 to D in one
pass; a categorical distribution over depth is inferred in closed form and the
predictions of all subnetworks are combined into a Gaussian mixture. The
mixture's disagreement drives data acquisition, and importance-weighted risk
estimation corrects for the resulting sampling bias.
"""

from .acquisition import (
    AcquisitionConfig,
    AcquisitionStep,
    acquire_batch,
    dun_bald,
    gaussian_mixture_bald,
    mc_bald,
)
from .baselines import (
    BaselineTrainConfig,
    MfviNetwork,
    build_mfvi,
    mcdo_predict,
    mcdo_train,
    mfvi_kl,
    mfvi_predict,
    mfvi_train,
    sgd_predict,
    sgd_train,
)
from .data import (
    DATASET_REGISTRY,
    Dataset,
    Standardizer,
    gen_toy,
    gen_uci_synthetic,
    load_delimited,
    split_standardize,
)
from .dun import (
    DepthDistribution,
    DunTrainConfig,
    dun_predict,
    elbo,
    exact_depth_posterior,
    fitted_depth_posterior,
    marginal_loglik,
    per_depth_loglik,
    train_dun,
)
from .errors import (
    ConfigError,
    DataError,
    DunalError,
    NumericError,
    ShapeError,
    TrainingError,
    UsageError,
)
from .harness import (
    AcquisitionSettings,
    ExperimentConfig,
    ModelConfig,
    TrainSettings,
    measure_depth_adaptation,
    persist_experiment,
    run_experiment,
    run_single,
    run_sweep,
)
from .nn import Network, NetworkConfig, build_network, finite_diff_check, gradient_check_suite
from .predictive import GaussianMixturePredictive, mixture_nll, mixture_rmse, pointwise_nll
from .risk import empirical_risk, lure_weights, overfitting_bias, pointwise_loss, r_lure

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig",
    "AcquisitionStep",
    "acquire_batch",
    "dun_bald",
    "gaussian_mixture_bald",
    "mc_bald",
    "BaselineTrainConfig",
    "MfviNetwork",
    "build_mfvi",
    "mcdo_predict",
    "mcdo_train",
    "mfvi_kl",
    "mfvi_predict",
    "mfvi_train",
    "sgd_predict",
    "sgd_train",
    "DATASET_REGISTRY",
    "Dataset",
    "Standardizer",
    "gen_toy",
    "gen_uci_synthetic",
    "load_delimited",
    "split_standardize",
    "DepthDistribution",
    "DunTrainConfig",
    "dun_predict",
    "elbo",
    "exact_depth_posterior",
    "fitted_depth_posterior",
    "marginal_loglik",
    "per_depth_loglik",
    "train_dun",
    "ConfigError",
    "DataError",
    "DunalError",
    "NumericError",
    "ShapeError",
    "TrainingError",
    "UsageError",
    "AcquisitionSettings",
    "ExperimentConfig",
    "ModelConfig",
    "TrainSettings",
    "measure_depth_adaptation",
    "persist_experiment",
    "run_experiment",
    "run_single",
    "run_sweep",
    "Network",
    "NetworkConfig",
    "build_network",
    "finite_diff_check",
    "gradient_check_suite",
    "GaussianMixturePredictive",
    "mixture_nll",
    "mixture_rmse",
    "pointwise_nll",
    "empirical_risk",
    "lure_weights",
    "overfitting_bias",
    "pointwise_loss",
    "r_lure",
    "__version__",
]
