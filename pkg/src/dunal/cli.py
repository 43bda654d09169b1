"""Command line interface.

Exit codes: 0 success, 1 operational failure (training, data, numerics),
2 usage error (bad arguments or config). Relative --out paths are resolved
under $DUNAL_OUT_ROOT when that variable is set.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from .data import DATASET_REGISTRY, TOY_NAMES, gen_toy
from .errors import ConfigError, DunalError, UsageError
from .harness import (
    ExperimentConfig,
    ModelConfig,
    TrainSettings,
    measure_depth_adaptation,
    persist_experiment,
    run_experiment,
    run_sweep,
)

__all__ = ["main", "build_parser"]


def _resolve_out(path_str: str) -> Path:
    path = Path(path_str)
    root = os.environ.get("DUNAL_OUT_ROOT")
    if root and not path.is_absolute():
        return Path(root) / path
    return path


def _load_config(path_str: str) -> ExperimentConfig:
    path = Path(path_str)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    return ExperimentConfig.from_json(path.read_text())


def _progress_printer(quiet: bool, n_repeats: int):
    if quiet:
        return None

    def report(run):
        final = run.rounds[-1] if run.rounds else None
        if final is None or not np.isfinite(final.test_nll):
            status = "failed"
        else:
            status = f"final test_nll={final.test_nll:.4f} rmse={final.test_rmse:.4f}"
        print(f"  run {run.repeat + 1}/{n_repeats} (seed {run.seed}): {status}", flush=True)

    return report


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    if args.repeats is not None:
        import dataclasses

        cfg = dataclasses.replace(cfg, n_repeats=args.repeats)
    if args.seed_base is not None:
        import dataclasses

        cfg = dataclasses.replace(cfg, seed_base=args.seed_base)
    print(
        f"dataset={cfg.dataset} method={cfg.model.method} "
        f"strategy={cfg.acquisition.strategy} repeats={cfg.n_repeats}",
        flush=True,
    )
    result = run_experiment(cfg, progress=_progress_printer(args.quiet, cfg.n_repeats))
    out = persist_experiment(result, _resolve_out(args.out), force=args.force)
    print(f"wrote {out}/runs.csv")
    return 0


def _parse_axis_values(axis: str, raw: str):
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        raise UsageError("no sweep values given")
    if axis == "temperature":
        return [float(p) for p in parts]
    if axis == "depth":
        return [int(p) for p in parts]
    return parts


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    values = _parse_axis_values(args.axis, args.values)
    out_root = _resolve_out(args.out)
    results = run_sweep(
        cfg, args.axis, values, progress=_progress_printer(args.quiet, cfg.n_repeats)
    )
    summary_rows = []
    for value, result in results:
        sub = out_root / f"{args.axis}={value}"
        persist_experiment(result, sub, force=args.force)
        final = result.metric_matrix("test_nll")[:, -1]
        ok = np.isfinite(final)
        mean = float(final[ok].mean()) if ok.any() else float("nan")
        summary_rows.append((args.axis, value, int(ok.sum()), mean))
        print(f"  {args.axis}={value}: final test_nll mean {mean:.4f} over {int(ok.sum())} runs")
    out_root.mkdir(parents=True, exist_ok=True)
    with open(out_root / "sweep_summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["axis", "value", "n_runs", "final_test_nll_mean"])
        writer.writerows(summary_rows)
    print(f"wrote {out_root}/sweep_summary.csv")
    return 0


def cmd_posterior(args) -> int:
    sizes = [int(p) for p in args.sizes.split(",") if p.strip()]
    if args.dataset not in DATASET_REGISTRY:
        raise UsageError(f"unknown dataset {args.dataset!r}")
    from .harness import _load_dataset  # reuse toy/synthetic resolution

    ds = _load_dataset(ExperimentConfig(dataset=args.dataset, n_queries=0))
    model = ModelConfig(method="dun", depth=args.depth, hidden_dim=args.hidden_dim)
    train = TrainSettings(iterations=args.iterations)
    depths = measure_depth_adaptation(
        ds, sizes, args.n_seeds, model=model, train=train, seed_base=args.seed_base
    )
    for j, size in enumerate(sizes):
        col = depths[:, j]
        print(f"  n={size}: posterior mean depth {col.mean():.3f} +- {col.std():.3f}")
    if args.out:
        out = _resolve_out(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["dataset", "size", "seed", "mean_depth"])
            for i in range(args.n_seeds):
                for j, size in enumerate(sizes):
                    writer.writerow(
                        [args.dataset, size, args.seed_base + i, format(depths[i, j], ".17g")]
                    )
        print(f"wrote {out}")
    return 0


def cmd_bias(args) -> int:
    path = Path(args.runs)
    if not path.exists():
        raise UsageError(f"runs file not found: {path}")
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise UsageError(f"{path} has no data rows")
    needed = {"round", "n_train", "bias_nll", "bias_squared"}
    if not needed <= set(rows[0]):
        raise UsageError(f"{path} is missing columns {sorted(needed - set(rows[0]))}")
    by_round: dict[int, list[dict]] = {}
    for row in rows:
        by_round.setdefault(int(row["round"]), []).append(row)
    print(f"{'round':>5} {'n_train':>8} {'bias_nll':>22} {'bias_squared':>22}")
    for r in sorted(by_round):
        group = by_round[r]
        n_train = max(int(g["n_train"]) for g in group)
        cells = []
        for key in ("bias_nll", "bias_squared"):
            vals = np.array([float(g[key]) for g in group])
            ok = np.isfinite(vals)
            if ok.any():
                cells.append(f"{vals[ok].mean():>12.4f} +- {vals[ok].std():<7.4f}")
            else:
                cells.append(f"{'missing':>22}")
        print(f"{r:>5} {n_train:>8} {cells[0]:>22} {cells[1]:>22}")
    return 0


def cmd_gen_toy(args) -> int:
    ds = gen_toy(args.name, n=args.n, seed=args.seed)
    out = _resolve_out(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(ds.input_dim)] + ["y"])
        for row, target in zip(ds.X, ds.y):
            writer.writerow([format(v, ".17g") for v in row] + [format(target, ".17g")])
    print(f"wrote {out} ({len(ds)} rows)")
    return 0


def cmd_check_gradients(args) -> int:
    from .nn import gradient_check_suite

    errors = gradient_check_suite(n_nets=args.n_nets, seed=args.seed)
    worst = max(errors)
    status = "PASS" if worst < args.tolerance else "FAIL"
    print(f"{status}: max relative gradient error {worst:.3e} over {len(errors)} networks")
    return 0 if status == "PASS" else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dunal",
        description="Depth-marginalized networks for active learning on regression tasks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment config and persist CSVs")
    p.add_argument("--config", required=True, help="path to an experiment JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--force", action="store_true", help="overwrite a non-empty directory")
    p.add_argument("--repeats", type=int, default=None, help="override n_repeats")
    p.add_argument("--seed-base", type=int, default=None, help="override seed_base")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a config varying one axis")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True, choices=["temperature", "strategy", "method", "depth", "prior"])
    p.add_argument("--values", required=True, help="comma separated values")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("posterior", help="depth posterior vs training set size")
    p.add_argument("--dataset", required=True)
    p.add_argument("--sizes", required=True, help="comma separated subset sizes")
    p.add_argument("--n-seeds", type=int, default=10)
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--hidden-dim", type=int, default=100)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--out", default=None, help="optional CSV path")
    p.set_defaults(func=cmd_posterior)

    p = sub.add_parser("bias", help="summarize overfitting bias from a runs.csv")
    p.add_argument("--runs", required=True, help="path to runs.csv")
    p.set_defaults(func=cmd_bias)

    p = sub.add_parser("gen-toy", help="write a toy dataset as CSV")
    p.add_argument("--name", required=True, choices=list(TOY_NAMES))
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_toy)

    p = sub.add_parser("check-gradients", help="finite-difference gradient self-test")
    p.add_argument("--n-nets", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_check_gradients)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DunalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
