"""End-to-end acceptance gate for the package.

Each test checks one release criterion and prints a single PASS/FAIL line with
the measured numbers (run with ``pytest -s tests/test_acceptance.py`` to see
the lines live). The checks marked ``slow`` train hundreds of networks at
experiment scale; the whole file takes a few hours on one CPU core, while the
fast subset (``-m "not slow"``) finishes in under a minute.
"""

import csv
import dataclasses
import itertools
import time
from pathlib import Path

import numpy as np
import pytest

from dunal import (
    AcquisitionSettings,
    DepthDistribution,
    ExperimentConfig,
    GaussianMixturePredictive,
    ModelConfig,
    TrainSettings,
    elbo,
    exact_depth_posterior,
    gaussian_mixture_bald,
    gen_toy,
    gradient_check_suite,
    marginal_loglik,
    measure_depth_adaptation,
    mixture_nll,
    persist_experiment,
    r_lure,
    run_experiment,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# --------------------------------------------------------------------------
# 1. Gradient correctness


def test_c1_finite_difference_gradients():
    t0 = time.monotonic()
    errors = gradient_check_suite(n_nets=20, seed=0)
    elapsed = time.monotonic() - t0
    worst = max(errors)
    ok = len(errors) >= 20 and worst < 1e-4 and elapsed < 30.0
    _report(
        "gradient correctness",
        ok,
        f"max relative error {worst:.2e} over {len(errors)} nets "
        f"(tol 1e-4) in {elapsed:.1f}s (limit 30s)",
    )


# --------------------------------------------------------------------------
# 2. Depth-marginal bound is tight at the closed-form optimum


def test_c2_elbo_tightness():
    rng = np.random.default_rng(2)
    worst_gap = 0.0
    worst_excess = -np.inf
    for _ in range(100):
        n = int(rng.integers(1, 13))
        depths = int(rng.integers(1, 10))
        ll = rng.normal(scale=rng.uniform(0.1, 3.0), size=(n, depths))
        prior = DepthDistribution.from_logits(rng.normal(size=depths))
        mll = marginal_loglik(ll, prior)
        posterior = exact_depth_posterior(ll, prior)
        worst_gap = max(worst_gap, abs(elbo(ll, posterior, prior) - mll))
        q = DepthDistribution.from_logits(rng.normal(scale=2.0, size=depths))
        worst_excess = max(worst_excess, elbo(ll, q, prior) - mll)
    ok = worst_gap <= 1e-9 and worst_excess <= 1e-9
    _report(
        "bound tightness",
        ok,
        f"optimum gap {worst_gap:.2e}, worst bound excess {worst_excess:.2e} "
        f"over 100 random problems (tol 1e-9)",
    )


# --------------------------------------------------------------------------
# 3. Weighted-risk estimator is exactly unbiased


def _uniform_proposal(remaining, history, losses):
    return np.full(len(remaining), 1.0 / len(remaining))


def _fixed_weight_proposal(remaining, history, losses):
    w = np.arange(1.0, len(losses) + 1.0)[remaining]
    return w / w.sum()


def _adaptive_proposal(remaining, history, losses):
    w = np.exp(0.7 * (len(history) + 1) * losses[remaining]) + 0.1 * sum(history)
    return w / w.sum()


def _exact_expectation(losses, n_acquired, proposal):
    """E[r_lure] enumerated over every ordered acquisition sequence."""
    n = len(losses)
    total = 0.0

    def rec(remaining, history, prob, alphas):
        nonlocal total
        if len(history) == n_acquired:
            total += prob * r_lure(losses[history], alphas, n)
            return
        probs = proposal(remaining, history, losses)
        for idx, p in zip(remaining, probs):
            rec(
                [r for r in remaining if r != idx],
                history + [idx],
                prob * p,
                alphas + [p],
            )

    rec(list(range(n)), [], 1.0, [])
    return total


def test_c3_weighted_risk_unbiased_by_enumeration():
    t0 = time.monotonic()
    schemes = (_uniform_proposal, _fixed_weight_proposal, _adaptive_proposal)
    worst = 0.0
    cases = 0
    for n, scheme in itertools.product((4, 5, 6), schemes):
        losses = np.random.default_rng(n).uniform(0.1, 2.0, size=n)
        for m in range(1, n + 1):
            expect = _exact_expectation(losses, m, scheme)
            worst = max(worst, abs(expect - losses.mean()))
            cases += 1
    elapsed = time.monotonic() - t0
    ok = worst <= 1e-9 and elapsed < 10.0
    _report(
        "risk-estimator unbiasedness",
        ok,
        f"max |E[estimate] - pool mean| {worst:.2e} over {cases} "
        f"(pool size, batch, proposal) cases (tol 1e-9) in {elapsed:.1f}s (limit 10s)",
    )


# --------------------------------------------------------------------------
# 4. Inferred depth grows with dataset size


@pytest.mark.slow
def test_c4_depth_adapts_to_dataset_size():
    t0 = time.monotonic()
    # The generator draws 400 points so the 80% train split can hold the
    # 300-point subsets being compared against 10-point subsets.
    ds = gen_toy("wiggle", n=400)
    depths = measure_depth_adaptation(
        ds,
        sizes=[10, 300],
        n_seeds=20,
        model=ModelConfig(method="dun"),
        train=TrainSettings(),
    )
    elapsed = time.monotonic() - t0
    wins = int((depths[:, 1] > depths[:, 0]).sum())
    ok = wins >= 14 and elapsed < 900.0
    _report(
        "depth adapts to dataset size",
        ok,
        f"posterior mean depth larger at 300 than at 10 points in {wins}/20 seeds "
        f"(need >=14) in {elapsed:.0f}s (limit 900s)",
    )


# --------------------------------------------------------------------------
# 5. Guided acquisition beats random acquisition


@pytest.mark.slow
def test_c5_stochastic_score_acquisition_beats_random():
    t0 = time.monotonic()
    finals = {}
    first_round = {}
    for strategy in ("bald_stochastic", "random"):
        cfg = ExperimentConfig(
            dataset="concrete",
            n_repeats=10,
            seed_base=0,
            n_init=50,
            n_queries=15,
            query_size=20,
            model=ModelConfig(method="dun"),
            train=TrainSettings(),
            acquisition=AcquisitionSettings(strategy=strategy, temperature=10.0),
        )
        nll = run_experiment(cfg).metric_matrix("test_nll")
        assert np.isfinite(nll).all(), f"non-finite NLL curve under {strategy}"
        finals[strategy] = nll[:, -1]
        first_round[strategy] = nll[:, 0]
    elapsed = time.monotonic() - t0
    # Paired seeds: before any guided acquisition happens the runs coincide.
    np.testing.assert_array_equal(
        first_round["bald_stochastic"], first_round["random"]
    )
    guided = float(finals["bald_stochastic"].mean())
    random_ = float(finals["random"].mean())
    ok = guided <= random_ and elapsed < 3600.0
    _report(
        "guided acquisition beats random",
        ok,
        f"mean final test NLL {guided:.4f} (guided) vs {random_:.4f} (random), "
        f"10 paired repeats, in {elapsed:.0f}s (limit 3600s)",
    )


# --------------------------------------------------------------------------
# 6. Depth-marginalized model overfits less than MC dropout


@pytest.mark.slow
def test_c6_overfitting_bias_ordering(tmp_path):
    t0 = time.monotonic()
    finals = {}
    for dataset, method in itertools.product(("concrete", "energy"), ("dun", "mcdo")):
        preset = CONFIG_DIR / f"{dataset}_{method}.json"
        cfg = dataclasses.replace(
            ExperimentConfig.from_json(preset.read_text()), n_repeats=10
        )
        result = run_experiment(cfg)
        assert all(r.failed_at_round is None for r in result.runs), (
            f"{dataset}/{method}: a repeat failed to train"
        )
        bias = result.metric_matrix("bias_nll")
        assert np.isfinite(bias).all(), f"{dataset}/{method}: non-finite bias curve"
        out = tmp_path / f"{dataset}_{method}"
        persist_experiment(result, out)
        with (out / "runs.csv").open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert rows and all(np.isfinite(float(r["bias_nll"])) for r in rows), (
            f"{dataset}/{method}: persisted bias values not finite"
        )
        finals[(dataset, method)] = float(bias[:, -1].mean())
    elapsed = time.monotonic() - t0
    margins = {
        ds: finals[(ds, "dun")] - finals[(ds, "mcdo")] for ds in ("concrete", "energy")
    }
    ok = any(m <= 0 for m in margins.values())
    detail = ", ".join(
        f"{ds}: dun {finals[(ds, 'dun')]:+.4f} vs mcdo {finals[(ds, 'mcdo')]:+.4f}"
        for ds in ("concrete", "energy")
    )
    _report(
        "overfitting-bias ordering",
        ok,
        f"final-step mean bias {detail} (need dun <= mcdo on >=1 dataset) "
        f"in {elapsed:.0f}s",
    )


# --------------------------------------------------------------------------
# 7. Presets are deterministic end to end


def test_c7_preset_determinism(tmp_path):
    cfg_text = (CONFIG_DIR / "smoke_wiggle_dun.json").read_text()
    outputs = []
    for tag in ("a", "b"):
        result = run_experiment(ExperimentConfig.from_json(cfg_text))
        out = tmp_path / tag
        persist_experiment(result, out)
        outputs.append(out)

    def rows_without_walltime(path):
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            return [
                {k: v for k, v in row.items() if k != "train_seconds"}
                for row in reader
            ]

    runs_equal = rows_without_walltime(outputs[0] / "runs.csv") == rows_without_walltime(
        outputs[1] / "runs.csv"
    )
    others_equal = all(
        (outputs[0] / name).read_text() == (outputs[1] / name).read_text()
        for name in ("aggregate.csv", "depth_posteriors.csv", "config.json")
    )
    ok = runs_equal and others_equal
    _report(
        "preset determinism",
        ok,
        "two runs of the smoke preset produce identical outputs "
        "(runs.csv compared without the wall-time column)",
    )


# --------------------------------------------------------------------------
# 8. Mixture likelihood agrees with a high-precision oracle


def test_c8_mixture_nll_matches_high_precision_oracle():
    mpmath = pytest.importorskip("mpmath")
    mp = mpmath.mp
    rng = np.random.default_rng(8)
    worst = 0.0
    with mpmath.workdps(50):
        for _ in range(1000):
            k = int(rng.integers(1, 6))
            weights = rng.dirichlet(np.ones(k))
            means = rng.normal(scale=3.0, size=(1, k))
            variances = rng.uniform(0.05, 4.0, size=(1, k))
            y = np.array([rng.normal(scale=2.0)])
            pred = GaussianMixturePredictive(weights, means, variances)
            got = mixture_nll(pred, y)
            density = mp.mpf(0)
            for w, m, v in zip(weights, means[0], variances[0]):
                vv = mp.mpf(v)
                density += (
                    mp.mpf(w)
                    * mp.exp(-((mp.mpf(y[0]) - mp.mpf(m)) ** 2) / (2 * vv))
                    / mp.sqrt(2 * mp.pi * vv)
                )
            worst = max(worst, abs(got - float(-mp.log(density))))
    ok = worst <= 1e-10
    _report(
        "mixture likelihood oracle",
        ok,
        f"max |NLL - 50-digit oracle| {worst:.2e} over 1000 random mixtures (tol 1e-10)",
    )


# --------------------------------------------------------------------------
# 9. Disagreement-score properties


def test_c9_disagreement_score_properties():
    rng = np.random.default_rng(9)
    single = GaussianMixturePredictive(
        np.array([1.0]), rng.normal(size=(5, 1)), rng.uniform(0.2, 2.0, size=(5, 1))
    )
    zero_ok = bool(np.all(np.abs(gaussian_mixture_bald(single)) <= 1e-15))

    mix = GaussianMixturePredictive(
        rng.dirichlet(np.ones(4)),
        rng.normal(size=(6, 4)),
        rng.uniform(0.2, 2.0, size=(6, 4)),
    )
    shifted = GaussianMixturePredictive(mix.weights, mix.means + 3.7, mix.variances)
    shift_err = float(
        np.max(np.abs(gaussian_mixture_bald(mix) - gaussian_mixture_bald(shifted)))
    )

    hand = GaussianMixturePredictive(
        np.array([0.5, 0.5]), np.array([[0.0, 2.0]]), np.ones((1, 2))
    )
    hand_err = abs(float(gaussian_mixture_bald(hand)[0]) - 0.5 * np.log(2.0))

    ok = zero_ok and shift_err <= 1e-10 and hand_err <= 1e-12
    _report(
        "disagreement-score properties",
        ok,
        f"single-component score 0 ({zero_ok}), shift error {shift_err:.2e} "
        f"(tol 1e-10), two-component hand case off by {hand_err:.2e} (tol 1e-12)",
    )
