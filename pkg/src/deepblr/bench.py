"""Benchmark harness: the tabular-regression evaluation protocol.

For each random 90/10 split the harness normalizes with training
statistics, trains the method's network(s), fits BLR heads where the
method calls for them, and reports test NLL and RMSE in original target
units.  Everything is seeded; rerunning a configuration reproduces the
record bit for bit.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import blr as blr_mod
from . import ensembles
from . import nn as nn_mod
from .data import (Dataset, denormalized_nll, load_csv, normalize,
                   split_dataset)

METHODS = ("single_nn", "nn_ensemble", "mc_dropout", "blr", "blr_ensemble")

_METHOD_KIND = {"single_nn": "single_nn", "nn_ensemble": "nn_ensemble",
                "mc_dropout": "mc_dropout", "blr": "single_blr",
                "blr_ensemble": "blr_ensemble"}
_METHOD_SIZE = {"single_nn": 1, "nn_ensemble": 5, "mc_dropout": 1,
                "blr": 1, "blr_ensemble": 5}

# per-split member seeds live in disjoint blocks so no two splits share them
_SPLIT_SEED_STRIDE = 100_000


@dataclass(frozen=True)
class DatasetProtocol:
    """Per-dataset protocol constants (architecture, optimizer, splits)."""

    key: str
    relpath: str
    hidden_units: int = 50
    learning_rate: float = 0.01
    n_splits: int = 20


PROTOCOLS = {
    "boston": DatasetProtocol("boston", "boston/boston.csv"),
    "concrete": DatasetProtocol("concrete", "concrete/concrete.csv"),
    "energy": DatasetProtocol("energy", "energy/energy.csv"),
    "kin8nm": DatasetProtocol("kin8nm", "kin8nm/kin8nm.csv"),
    "naval": DatasetProtocol("naval", "naval/naval.csv"),
    "power": DatasetProtocol("power", "power/power.csv"),
    "protein": DatasetProtocol("protein", "protein/protein.csv",
                               hidden_units=100, learning_rate=0.001,
                               n_splits=5),
    "wine": DatasetProtocol("wine", "wine/wine.csv"),
    "yacht": DatasetProtocol("yacht", "yacht/yacht.csv"),
    "year": DatasetProtocol("year", "year/year.csv", hidden_units=100,
                            learning_rate=0.0001, n_splits=1),
}

EPOCHS = 40
BATCH_SIZE = 32
ENSEMBLE_SIZE = 5


def data_directory(override=None) -> Path:
    """Data root: explicit argument, then $DEEPBLR_DATA_DIR, then ./data."""
    if override:
        return Path(override)
    env = os.environ.get("DEEPBLR_DATA_DIR")
    return Path(env) if env else Path("data")


def load_dataset(key: str, data_dir=None) -> Dataset:
    if key not in PROTOCOLS:
        raise KeyError(f"unknown dataset {key!r}; known: {sorted(PROTOCOLS)}")
    proto = PROTOCOLS[key]
    path = data_directory(data_dir) / proto.relpath
    if not path.exists():
        raise FileNotFoundError(
            f"{path} not found; run scripts/fetch_data.py first "
            f"(or set DEEPBLR_DATA_DIR)")
    target = "y"
    return load_csv(path, target, name=key)


def subsample(dataset: Dataset, fraction: float, seed: int) -> Dataset:
    """Seeded without-replacement row subsample (smoke runs on large sets)."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    n = max(10, int(round(dataset.n_rows * fraction)))
    idx = np.random.default_rng(seed).choice(dataset.n_rows, size=n,
                                             replace=False)
    return Dataset(name=dataset.name, features=dataset.features[idx],
                   targets=dataset.targets[idx],
                   feature_names=dataset.feature_names,
                   target_names=dataset.target_names)


@dataclass(frozen=True)
class BenchmarkRecord:
    dataset: str
    method: str
    config: dict
    per_split: tuple
    failures: tuple = field(default=())

    def nlls(self) -> np.ndarray:
        return np.array([s["nll"] for s in self.per_split])

    def rmses(self) -> np.ndarray:
        return np.array([s["rmse"] for s in self.per_split])

    def summary(self) -> dict:
        def mean_se(values):
            mean = float(np.mean(values))
            se = (float(np.std(values, ddof=1) / np.sqrt(len(values)))
                  if len(values) > 1 else None)
            return mean, se

        nll_mean, nll_se = mean_se(self.nlls())
        rmse_mean, rmse_se = mean_se(self.rmses())
        return {"nll_mean": nll_mean, "nll_se": nll_se,
                "rmse_mean": rmse_mean, "rmse_se": rmse_se}

    def to_json(self) -> str:
        doc = {"dataset": self.dataset, "method": self.method,
               "config": self.config, "per_split": list(self.per_split),
               "summary": self.summary()}
        if self.failures:
            doc["failures"] = list(self.failures)
        return json.dumps(doc, indent=2)


def split_member_seed(base_seed: int, split_index: int) -> int:
    return base_seed + _SPLIT_SEED_STRIDE * (split_index + 1)


def _run_split(dataset, method, split_index, base_seed, proto, g_grid,
               mc_samples):
    train_ds, test_ds = split_dataset(dataset, split_index, base_seed)
    norm_train, norm_test, stats = normalize(train_ds, test_ds)

    rate = ensembles.MC_DROPOUT_RATE if method == "mc_dropout" else 0.0
    arch = nn_mod.MlpArchitecture(
        input_dim=norm_train.features.shape[1],
        hidden_units=proto.hidden_units,
        output_dim=norm_train.targets.shape[1],
        dropout_rate=rate)
    config = nn_mod.TrainConfig(epochs=EPOCHS, batch_size=BATCH_SIZE,
                                learning_rate=proto.learning_rate, seed=0)
    member_base = split_member_seed(base_seed, split_index)
    ens = ensembles.train_ensemble(
        norm_train.features, norm_train.targets, arch, config,
        m=_METHOD_SIZE[method], base_seed=member_base,
        kind=_METHOD_KIND[method], g_grid=g_grid)

    mix = ensembles.mixture_predict(ens, norm_test.features,
                                    mc_samples=mc_samples, seed=member_base)
    nll_norm = float(np.mean(ensembles.mixture_nll(mix, norm_test.targets)))
    nll = denormalized_nll(nll_norm, stats.target_stds)

    mix_mean, _ = ensembles.mixture_moments(mix)
    pred_orig = mix_mean * stats.target_stds + stats.target_means
    true_orig = test_ds.targets
    rmse = float(np.sqrt(np.mean((pred_orig - true_orig) ** 2)))

    if ens.member_g[0] is None:
        g_rec = None
    elif len(ens.member_g) == 1:
        g_rec = ens.member_g[0]
    else:
        g_rec = list(ens.member_g)
    return {"seed": base_seed + split_index, "nll": nll, "rmse": rmse,
            "g": g_rec}


def run_benchmark(dataset: Dataset, method: str, n_splits: int,
                  base_seed: int, proto: DatasetProtocol | None = None,
                  g_grid=blr_mod.DEFAULT_G_GRID,
                  mc_samples: int = ensembles.MC_DROPOUT_SAMPLES,
                  verbose: bool = False) -> BenchmarkRecord:
    """Run one (dataset, method) configuration across seeded splits.

    Split failures are recorded and the run continues; it only raises if
    every split failed.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; known: {METHODS}")
    if n_splits < 1:
        raise ValueError("n_splits must be >= 1")
    if dataset.n_rows < 10:
        raise ValueError("benchmark needs at least 10 rows")
    proto = proto or PROTOCOLS.get(dataset.name) or DatasetProtocol(
        dataset.name, relpath="")

    per_split, failures = [], []
    for s in range(n_splits):
        started = time.perf_counter()
        try:
            entry = _run_split(dataset, method, s, base_seed, proto, g_grid,
                               mc_samples)
        except Exception as exc:  # noqa: BLE001 - surfaced in the record
            failures.append({"seed": base_seed + s, "error": f"{exc}"})
            continue
        entry["wall_ms"] = (time.perf_counter() - started) * 1000.0
        per_split.append(entry)
        if verbose:
            print(f"  split {s:2d}: nll {entry['nll']:8.4f} "
                  f"rmse {entry['rmse']:8.4f} "
                  f"({entry['wall_ms']:7.0f} ms)")
    if not per_split:
        raise RuntimeError(f"all {n_splits} splits failed; first error: "
                           f"{failures[0]['error']}")

    config = {"n_splits": n_splits, "base_seed": base_seed,
              "hidden_units": proto.hidden_units,
              "learning_rate": proto.learning_rate, "epochs": EPOCHS,
              "batch_size": BATCH_SIZE,
              "ensemble_size": _METHOD_SIZE[method],
              "mc_samples": mc_samples if method == "mc_dropout" else None,
              "g_grid": [float(g) for g in g_grid]}
    return BenchmarkRecord(dataset=dataset.name, method=method, config=config,
                           per_split=tuple(per_split),
                           failures=tuple(failures))


def format_summary_row(record: BenchmarkRecord) -> str:
    """One aligned 'mean +/- SE' row for terminal output."""
    s = record.summary()
    se = "   n/a" if s["nll_se"] is None else f"{s['nll_se']:6.3f}"
    return (f"{record.dataset:10s} {record.method:12s} "
            f"NLL {s['nll_mean']:7.3f} +/- {se}   "
            f"RMSE {s['rmse_mean']:9.4f}")
