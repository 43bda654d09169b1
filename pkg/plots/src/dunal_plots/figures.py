"""Render figures from experiment CSVs.

Two figure families:

- curves: one line per aggregate file (mean over repeats vs. number of
  acquired training points) with a shaded ±1 standard-deviation band —
  used for test NLL, test RMSE and overfitting-bias learning curves;
- posterior bars: grouped bars comparing the depth posterior at the first
  and last acquisition rounds, averaged over repeats.

Every function saves to the requested path (format inferred from the
suffix) and returns the matplotlib Figure for inspection.
"""

from pathlib import Path

import pandas as pd
from matplotlib.figure import Figure

from .schema import (
    AGGREGATE_COLUMNS,
    POSTERIOR_COLUMNS,
    SchemaError,
    read_validated,
)

METRICS = {
    "nll": ("test_nll", "test negative log likelihood"),
    "rmse": ("test_rmse", "test RMSE"),
    "bias": ("bias_nll", "overfitting bias (test NLL − unbiased train NLL)"),
}

_LABEL_CANDIDATES = ("method", "strategy", "temperature", "dataset")


def _single_value(frame: pd.DataFrame, column: str, path) -> str:
    values = frame[column].unique()
    if len(values) != 1:
        raise SchemaError(
            f"{path}: expected a single {column} per aggregate file, "
            f"found {list(values)}"
        )
    return str(values[0])


def _labels(frames: list[pd.DataFrame], paths: list[Path]) -> list[str]:
    """One legend label per file, built from the columns that differ."""
    descriptors = [
        {c: _single_value(f, c, p) for c in _LABEL_CANDIDATES}
        for f, p in zip(frames, paths)
    ]
    varying = [
        c
        for c in _LABEL_CANDIDATES
        if len({d[c] for d in descriptors}) > 1
    ]
    if not varying:
        labels = [p.stem for p in paths]
        return labels if len(set(labels)) == len(labels) else [str(p) for p in paths]
    return [" ".join(d[c] for c in varying) for d in descriptors]


def plot_curves(files, metric: str, out, dpi: int = 150) -> Figure:
    """Learning curves with mean lines and ±1 std bands, one per file."""
    if metric not in METRICS:
        raise SchemaError(f"unknown metric {metric!r}; choose from {sorted(METRICS)}")
    paths = [Path(f) for f in files]
    if not paths:
        raise SchemaError("no aggregate files given")
    frames = [read_validated(p, AGGREGATE_COLUMNS, "aggregate") for p in paths]
    column, axis_label = METRICS[metric]

    fig = Figure(figsize=(6.4, 4.8), dpi=dpi)
    ax = fig.add_subplot(111)
    for frame, label in zip(frames, _labels(frames, paths)):
        frame = frame.sort_values("n_train")
        x = frame["n_train"].to_numpy()
        mean = frame[f"{column}_mean"].to_numpy()
        std = frame[f"{column}_std"].to_numpy()
        (line,) = ax.plot(x, mean, marker="o", markersize=3, label=label)
        ax.fill_between(x, mean - std, mean + std, alpha=0.2, color=line.get_color())
    ax.set_xlabel("acquired training points")
    ax.set_ylabel(axis_label)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, out)


def plot_posterior_bars(file, out, rounds=None, dpi: int = 150) -> Figure:
    """Grouped bars: depth posterior at the first vs. last acquisition round.

    Probabilities are averaged over repeats. `rounds` may override the
    (first, last) pair with any two recorded round numbers.
    """
    path = Path(file)
    frame = read_validated(path, POSTERIOR_COLUMNS, "depth-posterior")
    available = sorted(frame["round"].unique())
    if rounds is None:
        rounds = (available[0], available[-1])
    rounds = tuple(int(r) for r in rounds)
    if len(rounds) != 2:
        raise SchemaError(f"exactly two rounds are compared, got {rounds}")
    missing = [r for r in rounds if r not in available]
    if missing:
        raise SchemaError(
            f"{path}: rounds {missing} not present (recorded rounds: {available})"
        )

    mean_probs = (
        frame[frame["round"].isin(rounds)]
        .groupby(["round", "depth"])["prob"]
        .mean()
        .unstack("depth", fill_value=0.0)
        .reindex(list(rounds))
    )
    depths = mean_probs.columns.to_numpy()

    fig = Figure(figsize=(6.4, 4.8), dpi=dpi)
    ax = fig.add_subplot(111)
    width = 0.4
    names = ("first acquisition round", "final acquisition round")
    for k, (r, name) in enumerate(zip(rounds, names)):
        offset = (k - 0.5) * width
        ax.bar(
            depths + offset,
            mean_probs.loc[r].to_numpy(),
            width=width,
            label=f"{name} (round {r})",
        )
    ax.set_xlabel("network depth")
    ax.set_ylabel("posterior probability")
    ax.set_xticks(depths)
    dataset = ", ".join(sorted(frame["dataset"].unique()))
    ax.set_title(f"depth posterior — {dataset}")
    ax.legend()
    fig.tight_layout()
    return _save(fig, out)


def _save(fig: Figure, out) -> Figure:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out)
    return fig
