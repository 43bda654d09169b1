"""Column contracts for the experiment CSV files this package consumes.

The experiment harness documents three CSV schemas (per-run rows, per-round
aggregates, and per-depth posterior probabilities). This package talks to
those files only — it never imports the library that produced them — so the
contracts are restated here and every reader validates against them before
plotting.
"""

from pathlib import Path

import pandas as pd


class SchemaError(Exception):
    """A CSV file does not match the documented experiment schema."""


AGGREGATE_COLUMNS = frozenset(
    {
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
    }
)

POSTERIOR_COLUMNS = frozenset({"dataset", "repeat", "seed", "round", "depth", "prob"})

RUNS_COLUMNS = frozenset(
    {
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
    }
)


def read_validated(path, required: frozenset, kind: str) -> pd.DataFrame:
    """Read a CSV and check it carries at least the documented columns."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise SchemaError(f"{path}: not a readable CSV ({exc})") from exc
    missing = sorted(required - set(frame.columns))
    if missing:
        raise SchemaError(
            f"{path}: not a {kind} file — missing columns {', '.join(missing)}"
        )
    if frame.empty:
        raise SchemaError(f"{path}: {kind} file has a header but no rows")
    return frame
