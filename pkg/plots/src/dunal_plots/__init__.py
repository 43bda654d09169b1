"""Figure rendering for depth-uncertainty active-learning experiment CSVs."""

from .figures import METRICS, plot_curves, plot_posterior_bars
from .schema import (
    AGGREGATE_COLUMNS,
    POSTERIOR_COLUMNS,
    RUNS_COLUMNS,
    SchemaError,
    read_validated,
)

__version__ = "0.1.0"

__all__ = [
    "AGGREGATE_COLUMNS",
    "METRICS",
    "POSTERIOR_COLUMNS",
    "RUNS_COLUMNS",
    "SchemaError",
    "plot_curves",
    "plot_posterior_bars",
    "read_validated",
    "__version__",
]
