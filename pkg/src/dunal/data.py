"""Datasets: containers, generators, loading and standardization.

The toy generators are self-contained reconstructions of common 1-d
uncertainty benchmarks (sizes match the usual protocol); the tabular
benchmark registry records pool sizes and acquisition schedules. When the
original tabular files are unavailable, `gen_uci_synthetic` produces a
deterministic stand-in with the registered dimensions: a dense smooth region
plus a sparse hard region, so informative acquisition has something to find.
"""

from __future__ import annotations

import csv
import io
import warnings
import zlib
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky

from .errors import DataError, ShapeError, UsageError

__all__ = [
    "Dataset",
    "DatasetSpec",
    "DATASET_REGISTRY",
    "TOY_NAMES",
    "UCI_NAMES",
    "gen_toy",
    "gen_uci_synthetic",
    "load_delimited",
    "Standardizer",
    "SplitStandardized",
    "split_standardize",
]


@dataclass
class Dataset:
    """A named regression dataset with inputs (n, d) and scalar targets (n,)."""

    name: str
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if self.X.ndim != 2:
            raise ShapeError(f"inputs must be 2-d, got shape {self.X.shape}")
        if self.X.shape[0] != self.y.shape[0]:
            raise ShapeError(
                f"{self.X.shape[0]} input rows but {self.y.shape[0]} targets"
            )
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise DataError(f"dataset {self.name!r} contains non-finite values")

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def input_dim(self) -> int:
        return self.X.shape[1]

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.intp)
        return Dataset(self.name, self.X[indices], self.y[indices])


@dataclass(frozen=True)
class DatasetSpec:
    """Registry entry: pool size, input width and acquisition schedule."""

    name: str
    n_points: int
    input_dim: int
    n_init: int
    n_queries: int
    query_size: int
    toy: bool


def _spec(name, n, d, init, queries, qsize, toy=False):
    return DatasetSpec(name, n, d, init, queries, qsize, toy)


DATASET_REGISTRY: dict[str, DatasetSpec] = {
    s.name: s
    for s in [
        _spec("simple_1d", 501, 1, 10, 30, 10, toy=True),
        _spec("izmailov", 400, 1, 10, 30, 10, toy=True),
        _spec("foong", 100, 1, 10, 15, 5, toy=True),
        _spec("matern", 400, 1, 10, 30, 10, toy=True),
        _spec("wiggle", 300, 1, 10, 20, 10, toy=True),
        _spec("boston", 506, 13, 20, 17, 20),
        _spec("concrete", 1030, 8, 50, 30, 20),
        _spec("energy", 768, 8, 50, 30, 20),
        _spec("kin8nm", 8192, 8, 50, 30, 20),
        _spec("naval", 11934, 16, 50, 30, 20),
        _spec("power", 9568, 4, 50, 30, 20),
        _spec("protein", 45730, 9, 50, 30, 20),
        _spec("wine", 1599, 11, 50, 30, 20),
        _spec("yacht", 308, 6, 20, 20, 10),
    ]
}

TOY_NAMES = tuple(s.name for s in DATASET_REGISTRY.values() if s.toy)
UCI_NAMES = tuple(s.name for s in DATASET_REGISTRY.values() if not s.toy)


def _matern32_draw(rng, x, lengthscale=0.5):
    """One function draw from a Matern-3/2 Gaussian process at locations x."""
    r = np.abs(x[:, None] - x[None, :]) * (np.sqrt(3.0) / lengthscale)
    K = (1.0 + r) * np.exp(-r) + 1e-8 * np.eye(x.size)
    return cholesky(K, lower=True) @ rng.standard_normal(x.size)


def gen_toy(name: str, n: int | None = None, seed: int = 0) -> Dataset:
    """Generate one of the 1-d toy benchmarks (reconstructions, see module doc)."""
    if name not in TOY_NAMES:
        raise UsageError(f"unknown toy dataset {name!r}; choose from {TOY_NAMES}")
    if n is None:
        n = DATASET_REGISTRY[name].n_points
    if n < 2:
        raise UsageError(f"need at least 2 points, got {n}")
    rng = np.random.default_rng(seed)

    if name == "simple_1d":
        # cubic trend observed in two dense side clusters plus a sparse middle
        n_side = int(0.45 * n)
        x = np.concatenate(
            [
                rng.uniform(-2.0, -0.5, n_side),
                rng.uniform(0.5, 2.0, n_side),
                rng.uniform(-0.5, 0.5, n - 2 * n_side),
            ]
        )
        y = 0.5 * x**3 + 0.2 * rng.standard_normal(n)
    elif name == "izmailov":
        # three separated clusters on a slow oscillation
        thirds = [n // 3, n // 3, n - 2 * (n // 3)]
        x = np.concatenate(
            [
                rng.uniform(-10.0, -6.0, thirds[0]),
                rng.uniform(-2.0, 2.0, thirds[1]),
                rng.uniform(6.0, 10.0, thirds[2]),
            ]
        )
        y = 0.2 * x * np.sin(x) + 0.1 * rng.standard_normal(n)
    elif name == "foong":
        # two clusters with a gap in between
        half = n // 2
        x = np.concatenate(
            [rng.uniform(-1.0, -0.7, half), rng.uniform(0.5, 1.0, n - half)]
        )
        y = -(x + 0.5) * np.sin(3 * np.pi * x) + 0.02 * rng.standard_normal(n)
    elif name == "matern":
        x = np.sort(rng.uniform(-2.0, 2.0, n))
        y = _matern32_draw(rng, x) + 0.05 * rng.standard_normal(n)
    else:  # wiggle
        # a slow wave plus a fast one: small samples look smooth, large ones
        # reveal the high-frequency structure
        x = rng.uniform(-2.5, 2.5, n)
        y = np.sin(2.0 * x) + 0.4 * np.sin(8.0 * x) + 0.05 * rng.standard_normal(n)

    order = rng.permutation(n)
    return Dataset(name, x[order][:, None], y[order])


def gen_uci_synthetic(name: str, seed: int | None = None) -> Dataset:
    """Deterministic stand-in with the registered size and input width.

    80% of rows live in a smooth near-linear region; 20% sit in a shifted
    cluster whose response adds a high-frequency component, so points there
    carry more information per label.
    """
    if name not in UCI_NAMES:
        raise UsageError(f"unknown tabular dataset {name!r}; choose from {UCI_NAMES}")
    spec = DATASET_REGISTRY[name]
    if seed is None:
        seed = zlib.crc32(name.encode())
    rng = np.random.default_rng(seed)
    n, d = spec.n_points, spec.input_dim

    n_hard = n // 5
    n_easy = n - n_hard
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    X_easy = rng.standard_normal((n_easy, d))
    X_hard = 0.6 * rng.standard_normal((n_hard, d)) + 2.5 * direction

    w = rng.standard_normal(d) / np.sqrt(d)
    v = rng.standard_normal(d) / np.sqrt(d)
    y_easy = X_easy @ w + 0.05 * rng.standard_normal(n_easy)
    y_hard = (
        X_hard @ w
        + 1.5 * np.sin(3.0 * (X_hard @ v))
        + 0.05 * rng.standard_normal(n_hard)
    )

    X = np.vstack([X_easy, X_hard])
    y = np.concatenate([y_easy, y_hard])
    order = rng.permutation(n)
    return Dataset(name, X[order], y[order])


def _parse_rows(text: str, path) -> list[list[float]]:
    sample = text[:4096]
    try:
        dialect = csv.Sniffer().sniff(sample, delimiters=",;\t ")
        reader = csv.reader(io.StringIO(text), dialect)
        rows = [[f for f in row if f != ""] for row in reader]
    except csv.Error:
        rows = [line.split() for line in text.splitlines()]
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"{path}: no data rows")

    def try_floats(fields):
        try:
            return [float(f) for f in fields]
        except ValueError:
            return None

    start = 0
    if try_floats(rows[0]) is None:
        start = 1  # header line
        if len(rows) == 1:
            raise DataError(f"{path}: only a header line, no data rows")
    parsed = []
    width = len(rows[start])
    for i, row in enumerate(rows[start:], start=start + 1):
        if len(row) != width:
            raise DataError(
                f"{path}: row {i} has {len(row)} fields, expected {width}"
            )
        values = try_floats(row)
        if values is None:
            bad = next(f for f in row if try_floats([f]) is None)
            raise DataError(f"{path}: row {i}: could not parse field {bad!r} as a number")
        parsed.append(values)
    return parsed


def load_delimited(path, name: str | None = None) -> Dataset:
    """Load a numeric delimited file; the last column is the target.

    Accepts comma/semicolon/tab/whitespace separation and skips a single
    header line if the first row is not numeric. Malformed rows raise
    DataError naming the row and offending field.
    """
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"could not read {path}: {exc}") from exc
    rows = _parse_rows(text, path)
    arr = np.asarray(rows, dtype=np.float64)
    if arr.shape[1] < 2:
        raise DataError(f"{path}: need at least 2 columns (features + target)")
    if name is None:
        name = str(path).rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return Dataset(name, arr[:, :-1], arr[:, -1])


@dataclass
class Standardizer:
    """Per-column affine map to zero mean, unit variance (train statistics)."""

    mean_: np.ndarray
    std_: np.ndarray

    @classmethod
    def fit(cls, values: np.ndarray) -> "Standardizer":
        values = np.asarray(values, dtype=np.float64)
        flat = values if values.ndim == 2 else values[:, None]
        if flat.shape[0] == 0:
            raise UsageError("cannot fit a standardizer on zero rows")
        mean = flat.mean(axis=0)
        std = flat.std(axis=0)
        constant = std == 0.0
        if np.any(constant):
            warnings.warn(
                f"{int(constant.sum())} constant column(s) left unscaled",
                stacklevel=2,
            )
            std = np.where(constant, 1.0, std)
        return cls(mean_=mean, std_=std)

    def transform(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            return (values - self.mean_[0]) / self.std_[0]
        return (values - self.mean_) / self.std_

    def inverse_transform(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            return values * self.std_[0] + self.mean_[0]
        return values * self.std_ + self.mean_


@dataclass
class SplitStandardized:
    """Standardized train/valid/test split plus the fitted transformers."""

    train: Dataset
    valid: Dataset
    test: Dataset
    x_scaler: Standardizer
    y_scaler: Standardizer

    @property
    def y_scale(self) -> float:
        return float(self.y_scaler.std_[0])

    @property
    def y_shift(self) -> float:
        return float(self.y_scaler.mean_[0])


def split_standardize(
    ds: Dataset, seed: int, fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
) -> SplitStandardized:
    """Shuffle, split train/valid/test and standardize by train statistics."""
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise UsageError(f"fractions must be three non-negative numbers, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise UsageError(f"fractions must sum to 1, got {fractions}")
    n = len(ds)
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(n * fractions[0])
    n_valid = int(n * fractions[1])
    if n_train < 1:
        raise UsageError(f"train split is empty for n={n} and fractions {fractions}")
    parts = np.split(order, [n_train, n_train + n_valid])
    raw = [ds.subset(p) for p in parts]
    x_scaler = Standardizer.fit(raw[0].X)
    y_scaler = Standardizer.fit(raw[0].y)
    std_sets = [
        Dataset(ds.name, x_scaler.transform(part.X), y_scaler.transform(part.y))
        for part in raw
    ]
    return SplitStandardized(
        train=std_sets[0],
        valid=std_sets[1],
        test=std_sets[2],
        x_scaler=x_scaler,
        y_scaler=y_scaler,
    )
