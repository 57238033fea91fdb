"""Self-contained fit artifacts.

A fitted model is persisted as a single JSON document carrying a format
tag and version, the network architecture and parameters, the feature
and target normalization statistics, and the per-output-dimension BLR
posterior (mean weights plus the lower Cholesky factor of the
precision).  Prediction from a loaded artifact therefore never touches
the training data, and floats survive the round trip exactly (JSON
serializes them via repr, which is lossless for float64).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .blr import BlrPosterior, fit_deep_blr, fit_deep_blr_with_grid, \
    predict_deep_blr
from .data import Dataset, NormalizationStats, normalize, normalize_features
from .nn import MlpArchitecture, MlpModel, TrainConfig, train

FORMAT_NAME = "deepblr-artifact"
FORMAT_VERSION = 1

_PARAM_FIELDS = ("first_layer_weights", "first_layer_bias",
                 "mean_head_weights", "mean_head_bias",
                 "variance_head_weights", "variance_head_bias")
_STAT_FIELDS = ("feature_means", "feature_stds", "target_means", "target_stds")


class ArtifactError(ValueError):
    """Raised when a document is not a loadable artifact."""


@dataclass(frozen=True)
class FitArtifact:
    """Everything predict needs, detached from the training data."""

    model: MlpModel
    posteriors: tuple[BlrPosterior, ...]
    stats: NormalizationStats
    feature_names: tuple[str, ...]
    target_names: tuple[str, ...]
    prior_variance: float
    config: dict

    def __post_init__(self):
        if len(self.posteriors) != self.model.architecture.output_dim:
            raise ValueError("one posterior per output dimension required")
        if len(self.feature_names) != self.model.architecture.input_dim:
            raise ValueError("feature name count disagrees with input_dim")
        if len(self.target_names) != self.model.architecture.output_dim:
            raise ValueError("target name count disagrees with output_dim")

    @property
    def n_features(self) -> int:
        return self.model.architecture.input_dim


def _frozen(values, shape=None) -> np.ndarray:
    a = np.asarray(values, dtype=np.float64)
    if shape is not None:
        a = a.reshape(shape)
    a.setflags(write=False)
    return a


def fit_artifact(dataset: Dataset, *, hidden_units: int = 50,
                 epochs: int = 40, batch_size: int = 32,
                 learning_rate: float = 0.01, seed: int = 0,
                 g: float | None = None, config: dict | None = None
                 ) -> FitArtifact:
    """Train a Deep BLR on the full dataset and bundle it for persistence.

    With g=None the prior variance is grid-selected on a held-out slice;
    a fixed g skips the search.
    """
    normalized, _, stats = normalize(dataset, dataset)
    arch = MlpArchitecture(input_dim=dataset.features.shape[1],
                           hidden_units=hidden_units,
                           output_dim=dataset.targets.shape[1])
    train_cfg = TrainConfig(epochs=epochs, batch_size=batch_size,
                            learning_rate=learning_rate, seed=seed)
    model = train(normalized.features, normalized.targets, arch, train_cfg)
    if g is None:
        posteriors, grid_result = fit_deep_blr_with_grid(
            model, normalized.features, normalized.targets, seed=seed)
        chosen = grid_result.chosen_g
    else:
        posteriors = fit_deep_blr(model, normalized.features,
                                  normalized.targets, g)
        chosen = float(g)
    return FitArtifact(model=model, posteriors=tuple(posteriors), stats=stats,
                       feature_names=tuple(dataset.feature_names),
                       target_names=tuple(dataset.target_names),
                       prior_variance=chosen, config=dict(config or {}))


def predict_artifact(artifact: FitArtifact, features):
    """Per-row (mean, aleatoric std, total std) in original units.

    Accepts a (n, p) array in the artifact's feature order; every array
    returned is (n, output_dim).
    """
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    p = artifact.n_features
    if x.ndim != 2 or x.shape[1] != p:
        raise ValueError(
            f"input has {x.shape[1] if x.ndim == 2 else x.ndim} feature "
            f"columns, artifact expects p={p}: {list(artifact.feature_names)}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input rows contain non-finite values")
    pred = predict_deep_blr(artifact.model, list(artifact.posteriors),
                            normalize_features(x, artifact.stats))
    t_std = artifact.stats.target_stds
    mean = pred.mean * t_std + artifact.stats.target_means
    return mean, np.sqrt(pred.aleatoric_variance) * t_std, \
        np.sqrt(pred.variance) * t_std


def _document(artifact: FitArtifact) -> dict:
    model = artifact.model
    arch = model.architecture
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "config": artifact.config,
        "architecture": {"input_dim": arch.input_dim,
                         "hidden_units": arch.hidden_units,
                         "output_dim": arch.output_dim,
                         "dropout_rate": arch.dropout_rate},
        "parameters": {name: getattr(model, name).tolist()
                       for name in _PARAM_FIELDS},
        "normalization": {name: getattr(artifact.stats, name).tolist()
                          for name in _STAT_FIELDS},
        "prior_variance": artifact.prior_variance,
        "posteriors": [{"prior_variance": post.prior_variance,
                        "mean_weights": post.mean_weights.tolist(),
                        "precision_cholesky": post.precision_cholesky.tolist()}
                       for post in artifact.posteriors],
        "feature_names": list(artifact.feature_names),
        "target_names": list(artifact.target_names),
    }


def save_artifact(artifact: FitArtifact, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(_document(artifact), handle, indent=1)
        handle.write("\n")


def load_artifact(path) -> FitArtifact:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ArtifactError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ArtifactError(f"{path} is not a {FORMAT_NAME} file")
    if doc.get("version") != FORMAT_VERSION:
        raise ArtifactError(f"artifact version {doc.get('version')!r} not "
                            f"supported; this build reads version "
                            f"{FORMAT_VERSION}")
    try:
        arch = MlpArchitecture(**doc["architecture"])
        h, p, d = arch.hidden_units, arch.input_dim, arch.output_dim
        shapes = {"first_layer_weights": (h, p), "first_layer_bias": (h,),
                  "mean_head_weights": (d, h), "mean_head_bias": (d,),
                  "variance_head_weights": (d, h), "variance_head_bias": (d,)}
        params = doc["parameters"]
        model = MlpModel(arch, *(_frozen(params[name], shapes[name])
                                 for name in _PARAM_FIELDS))
        stats = NormalizationStats(*(_frozen(doc["normalization"][name])
                                     for name in _STAT_FIELDS))
        posteriors = tuple(
            BlrPosterior(prior_variance=float(entry["prior_variance"]),
                         mean_weights=_frozen(entry["mean_weights"], (h,)),
                         precision_cholesky=_frozen(
                             entry["precision_cholesky"], (h, h)),
                         latent_dim=h)
            for entry in doc["posteriors"])
        return FitArtifact(model=model, posteriors=posteriors, stats=stats,
                           feature_names=tuple(doc["feature_names"]),
                           target_names=tuple(doc["target_names"]),
                           prior_variance=float(doc["prior_variance"]),
                           config=dict(doc.get("config", {})))
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"malformed artifact {path}: {exc}") from exc
