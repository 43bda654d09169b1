"""Shared fixture builders: synthetic CSVs matching the documented schemas."""

import csv

import pytest


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


AGGREGATE_HEADER = [
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

POSTERIOR_HEADER = ["dataset", "repeat", "seed", "round", "depth", "prob"]


def write_aggregate(
    path,
    dataset="concrete",
    method="dun",
    strategy="bald_stochastic",
    temperature=10.0,
    rounds=6,
    n_init=50,
    step=20,
):
    rows = []
    for r in range(rounds):
        n_train = n_init + step * r
        nll = 1.5 - 0.1 * r
        rmse = 6.0 - 0.4 * r
        rows.append(
            [
                dataset,
                method,
                strategy,
                temperature,
                r,
                n_train,
                10,
                nll,
                0.2,
                rmse,
                0.5,
                nll - 0.3,
                0.15,
                0.04,
                0.01,
            ]
        )
    return _write_rows(path, AGGREGATE_HEADER, rows)


def write_posterior(path, dataset="concrete", depths=6, rounds=(0, 15), repeats=2):
    rows = []
    for repeat in range(repeats):
        for r in rounds:
            # Early rounds lean shallow, late rounds lean deep; rows sum to 1.
            weights = [
                (depths - d) if r == rounds[0] else (d + 1) for d in range(depths)
            ]
            total = float(sum(weights))
            for d, w in enumerate(weights):
                rows.append([dataset, repeat, 100 + repeat, r, d, w / total])
    return _write_rows(path, POSTERIOR_HEADER, rows)


@pytest.fixture
def aggregate_csv(tmp_path):
    return write_aggregate(tmp_path / "aggregate.csv")


@pytest.fixture
def posterior_csv(tmp_path):
    return write_posterior(tmp_path / "depth_posteriors.csv")
