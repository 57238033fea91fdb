"""Command line front end.

Five subcommands: ``bench`` (UCI benchmark runs), ``toy1d`` (synthetic
1-D predictive-distribution export), ``rl`` (cartpole PETS runs),
``fit`` and ``predict`` (artifact-based regression on user CSVs).

Every command is deterministic given its full flag set, every output
file embeds the configuration that produced it, and exit codes follow
the usual convention: 0 success, 2 usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
import pandas as pd

from . import bench as bench_mod
from .artifact import (ArtifactError, fit_artifact, load_artifact,
                       predict_artifact, save_artifact)
from .blr import DEFAULT_G_GRID, fit_deep_blr_with_grid, predict_deep_blr
from .data import load_csv
from .mbrl.dynamics import RL_PRIOR_VARIANCE
from .mbrl.pets import RL_KINDS, PetsConfig, pets_loop
from .nn import MlpArchitecture, TrainConfig, train

_BLR_RL_KINDS = ("single_blr", "blr_ensemble")


def _float_cell(value: float) -> str:
    # repr round-trips float64 exactly and keeps same-seed runs
    # byte-identical across platforms.
    return repr(float(value))


def _ensure_parent(path) -> None:
    parent = Path(path).parent
    if parent and not parent.exists():
        parent.mkdir(parents=True, exist_ok=True)


def _write_csv(path, header: list[str], rows, config: dict) -> None:
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"# config: {json.dumps(config, sort_keys=True)}\n")
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(_float_cell(v) for v in row) + "\n")


# --- bench ---------------------------------------------------------------

def cmd_bench(args) -> int:
    dataset = bench_mod.load_dataset(args.dataset, args.data_dir)
    if args.subsample != 1.0:
        dataset = bench_mod.subsample(dataset, args.subsample, args.seed)
    proto = bench_mod.PROTOCOLS[args.dataset]
    n_splits = args.splits if args.splits is not None else proto.n_splits
    g_grid = (args.g,) if args.g is not None else DEFAULT_G_GRID
    record = bench_mod.run_benchmark(dataset, args.method, n_splits,
                                     args.seed, proto=proto, g_grid=g_grid,
                                     verbose=args.verbose)
    print(bench_mod.format_summary_row(record))
    if args.out:
        _ensure_parent(args.out)
        doc = json.loads(record.to_json())
        doc["cli"] = {"command": "bench", "dataset": args.dataset,
                      "method": args.method, "splits": n_splits,
                      "seed": args.seed, "subsample": args.subsample,
                      "g": args.g}
        with open(args.out, "w", encoding="utf-8") as handle:
            json.dump(doc, handle, indent=2)
            handle.write("\n")
    return 0


# --- toy1d ---------------------------------------------------------------

def toy1d_training_set(seed: int, n: int = 100):
    """The gap task: x uniform on [-3, -0.5] U [0.5, 3], heteroscedastic y."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, 5.0, size=n)
    x = np.where(u < 2.5, -3.0 + u, 0.5 + (u - 2.5))
    noise_std = 0.1 + 0.1 * np.abs(x)
    y = np.sin(2.0 * x) + rng.normal(size=n) * noise_std
    return x, y


def _train_csv_path(out: str) -> Path:
    path = Path(out)
    return path.with_name(path.stem + "_train" + (path.suffix or ".csv"))


def cmd_toy1d(args) -> int:
    config = {"command": "toy1d", "seed": args.seed, "hidden": args.hidden,
              "epochs": args.epochs, "lr": args.lr,
              "grid_points": args.grid_points}
    x, y = toy1d_training_set(args.seed)
    arch = MlpArchitecture(input_dim=1, hidden_units=args.hidden, output_dim=1)
    # Light training on purpose: a collapsed representation hides the
    # epistemic bump in the data gap that this demo exists to show.
    model = train(x[:, None], y[:, None], arch,
                  TrainConfig(epochs=args.epochs, learning_rate=args.lr,
                              seed=args.seed))
    posteriors, grid_result = fit_deep_blr_with_grid(
        model, x[:, None], y[:, None], seed=args.seed)

    grid = np.linspace(-4.0, 4.0, args.grid_points)
    pred = predict_deep_blr(model, posteriors, grid[:, None])
    alea = np.sqrt(pred.aleatoric_variance[:, 0])
    total = np.sqrt(pred.variance[:, 0])
    _write_csv(args.out, ["x", "mean", "aleatoric_std", "total_std"],
               zip(grid, pred.mean[:, 0], alea, total), config)
    _write_csv(_train_csv_path(args.out), ["x", "y"], zip(x, y), config)

    epi = pred.epistemic_variance[:, 0]
    in_gap = np.abs(grid) < 0.5
    on_support = (np.abs(grid) >= 0.5) & (np.abs(grid) <= 3.0)
    print(f"toy1d: g={grid_result.chosen_g:g}  epistemic std "
          f"gap {np.sqrt(epi[in_gap].mean()):.4f} vs "
          f"support {np.sqrt(epi[on_support].mean()):.4f}  -> {args.out}")
    return 0


# --- rl ------------------------------------------------------------------

def _rl_manifest(args, seed: int, records, config: PetsConfig) -> dict:
    kind = RL_KINDS[args.model]
    return {"command": "rl", "model": args.model, "model_kind": kind,
            "episodes": args.episodes, "steps_per_episode": args.steps,
            "seed": seed,
            "g": RL_PRIOR_VARIANCE if kind in _BLR_RL_KINDS else None,
            "cem": asdict(config.cem), "dynamics": asdict(config.dynamics),
            "returns": [r.episode_return for r in records],
            "wall_ms": [r.wall_ms for r in records]}


def cmd_rl(args) -> int:
    seeds = args.seeds if args.seeds is not None else [args.seed]
    config = PetsConfig(episodes=args.episodes,
                        steps_per_episode=args.steps)
    stem = Path(args.out if args.out else f"rl_{args.model}")
    base_config = {"command": "rl", "model": args.model,
                   "episodes": args.episodes, "steps": args.steps}
    _ensure_parent(stem.with_name(stem.name or "rl"))
    for seed in seeds:
        csv_path = stem.with_name(f"{stem.name}_seed{seed}.csv")
        with open(csv_path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write("# config: "
                         f"{json.dumps({**base_config, 'seed': seed}, sort_keys=True)}\n")
            handle.write("episode,return,wall_ms\n")

            def on_episode(record, _handle=handle):
                _handle.write(f"{record.episode},"
                              f"{_float_cell(record.episode_return)},"
                              f"{_float_cell(record.wall_ms)}\n")
                _handle.flush()

            records = pets_loop(args.model, args.episodes, seed,
                                config=config, on_episode=on_episode)
        manifest = _rl_manifest(args, seed, records, config)
        json_path = stem.with_name(f"{stem.name}_seed{seed}.json")
        with open(json_path, "w", encoding="utf-8") as handle:
            json.dump(manifest, handle, indent=1)
            handle.write("\n")
        final = records[-1].episode_return
        print(f"rl {args.model} seed {seed}: final return {final:.1f} "
              f"-> {csv_path}")
    return 0


# --- fit / predict -------------------------------------------------------

def cmd_fit(args) -> int:
    targets = [c.strip() for c in args.target.split(",") if c.strip()]
    dataset = load_csv(args.data, targets)
    config = {"command": "fit", "data": str(args.data), "target": targets,
              "hidden": args.hidden, "epochs": args.epochs,
              "batch_size": args.batch_size, "lr": args.lr,
              "seed": args.seed, "g": args.g}
    artifact = fit_artifact(dataset, hidden_units=args.hidden,
                            epochs=args.epochs, batch_size=args.batch_size,
                            learning_rate=args.lr, seed=args.seed, g=args.g,
                            config=config)
    _ensure_parent(args.out)
    save_artifact(artifact, args.out)
    print(f"fit: {dataset.n_rows} rows, {artifact.n_features} features, "
          f"g={artifact.prior_variance:g} -> {args.out}")
    return 0


def _prediction_inputs(artifact, frame: pd.DataFrame) -> np.ndarray:
    names = list(artifact.feature_names)
    if set(names) <= set(frame.columns):
        frame = frame[names]
    elif frame.shape[1] != artifact.n_features:
        raise ValueError(
            f"input has {frame.shape[1]} columns, artifact expects "
            f"p={artifact.n_features} features: {names}")
    matrix = frame.apply(pd.to_numeric, errors="coerce").to_numpy(np.float64)
    if np.isnan(matrix).any():
        bad = frame.columns[np.isnan(matrix).any(axis=0)]
        raise ValueError(f"non-numeric values in column(s) {list(bad)}")
    return matrix


def cmd_predict(args) -> int:
    artifact = load_artifact(args.artifact)
    frame = pd.read_csv(args.data, header=0, comment="#")
    mean, alea, total = predict_artifact(
        artifact, _prediction_inputs(artifact, frame))
    header, columns = [], []
    for k, name in enumerate(artifact.target_names):
        header += [f"{name}_mean", f"{name}_aleatoric_std",
                   f"{name}_total_std"]
        columns += [mean[:, k], alea[:, k], total[:, k]]
    config = {"command": "predict", "artifact": str(args.artifact),
              "data": str(args.data)}
    _write_csv(args.out, header, zip(*columns), config)
    print(f"predict: {mean.shape[0]} rows -> {args.out}")
    return 0


# --- parser --------------------------------------------------------------

def _seed_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty seed list")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deepblr",
        description="Deep BLR benchmarks, demos and artifact fit/predict.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="run one (dataset, method) benchmark")
    p.add_argument("--dataset", required=True,
                   choices=sorted(bench_mod.PROTOCOLS))
    p.add_argument("--method", required=True, choices=bench_mod.METHODS)
    p.add_argument("--splits", type=int, default=None,
                   help="override the dataset protocol's split count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--subsample", type=float, default=1.0,
                   help="seeded row fraction in (0, 1]; smoke runs")
    p.add_argument("--g", type=float, default=None,
                   help="fix the BLR prior variance instead of grid search")
    p.add_argument("--data-dir", default=None)
    p.add_argument("--out", default=None, help="JSON result path")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("toy1d", help="export the 1-D gap demo predictive")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="toy1d.csv")
    p.add_argument("--hidden", type=int, default=50)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.002)
    p.add_argument("--grid-points", type=int, default=401)
    p.set_defaults(func=cmd_toy1d)

    p = sub.add_parser("rl", help="run PETS cartpole episodes")
    p.add_argument("--model", required=True, choices=sorted(RL_KINDS))
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=_seed_list, default=None,
                   help="comma-separated seeds; one CSV+manifest per seed")
    p.add_argument("--out", default=None,
                   help="output stem (default rl_<model>)")
    p.set_defaults(func=cmd_rl)

    p = sub.add_parser("fit", help="train a Deep BLR on a CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--target", required=True,
                   help="target column name(s), comma-separated")
    p.add_argument("--out", required=True, help="artifact JSON path")
    p.add_argument("--hidden", type=int, default=50)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--g", type=float, default=None,
                   help="fix the prior variance instead of grid search")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict from a fit artifact")
    p.add_argument("--artifact", required=True)
    p.add_argument("--data", required=True, help="feature CSV")
    p.add_argument("--out", default="predictions.csv")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse has already printed usage
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ArtifactError, ValueError, KeyError, FileNotFoundError,
            OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
