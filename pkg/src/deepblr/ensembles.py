"""Ensembles, MC-dropout, and the mixture-of-Gaussians predictive.

Every method in the benchmark reduces to a uniform mixture of Gaussian
components: a single network is a 1-component mixture, an ensemble has
one component per member, MC-dropout has one per sampled mask, and the
BLR variants swap the network's own mean/variance for the posterior
predictive.  NLL is computed exactly through log-sum-exp, summaries via
the law of total variance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

from . import blr as blr_mod
from . import nn as nn_mod
from .nn import VARIANCE_FLOOR, GaussianPrediction

KINDS = ("single_nn", "nn_ensemble", "mc_dropout", "single_blr", "blr_ensemble")
BLR_KINDS = ("single_blr", "blr_ensemble")
SINGLE_KINDS = ("single_nn", "single_blr", "mc_dropout")

MC_DROPOUT_SAMPLES = 50
MC_DROPOUT_RATE = 0.05


@dataclass(frozen=True)
class MixturePrediction:
    """Uniform mixture of Gaussian predictive components (weights 1/M)."""

    components: tuple[GaussianPrediction, ...]

    def __post_init__(self):
        if len(self.components) < 1:
            raise ValueError("mixture needs at least one component")
        shape = self.components[0].mean.shape
        if any(c.mean.shape != shape for c in self.components):
            raise ValueError("mixture components disagree on output shape")


@dataclass(frozen=True)
class EnsembleModel:
    """Trained members plus (for BLR kinds) per-member posteriors.

    posteriors[i] is a tuple of per-output-dimension BlrPosterior for the
    BLR kinds and None otherwise; member_g mirrors it with the prior
    variance each member ended up using.
    """

    kind: str
    members: tuple[nn_mod.MlpModel, ...]
    posteriors: tuple
    member_g: tuple
    base_seed: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if not self.members:
            raise ValueError("ensemble needs at least one member")
        arch0 = self.members[0].architecture
        if any(m.architecture != arch0 for m in self.members):
            raise ValueError("ensemble members disagree on architecture")
        if self.kind in SINGLE_KINDS and len(self.members) != 1:
            raise ValueError(f"{self.kind} must have exactly one member")
        if self.kind in BLR_KINDS:
            if any(p is None for p in self.posteriors):
                raise ValueError(f"{self.kind} members must carry posteriors")
        if len(self.posteriors) != len(self.members):
            raise ValueError("posteriors and members must align")

    @property
    def architecture(self) -> nn_mod.MlpArchitecture:
        return self.members[0].architecture


def train_ensemble(train_x, train_y, architecture: nn_mod.MlpArchitecture,
                   config: nn_mod.TrainConfig, m: int, base_seed: int,
                   kind: str, *, g: float | None = None,
                   g_grid=blr_mod.DEFAULT_G_GRID) -> EnsembleModel:
    """Train M members with seeds base_seed..base_seed+M-1 on the full set.

    No bagging: every member sees all rows and differs only through its
    seed.  BLR kinds then fit per-dimension posteriors for each member,
    either at a fixed g or by grid search (seeded with the member seed).
    MC-dropout requires a dropout architecture; everything else trains
    dropout-free.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown ensemble kind {kind!r}")
    if m < 1:
        raise ValueError("m must be >= 1")
    if kind in SINGLE_KINDS and m != 1:
        raise ValueError(f"{kind} requires m=1, got {m}")
    if kind == "mc_dropout":
        if architecture.dropout_rate <= 0.0:
            raise ValueError("mc_dropout needs dropout_rate > 0")
    elif architecture.dropout_rate != 0.0:
        raise ValueError(f"{kind} must train with dropout_rate 0")

    members, posteriors, member_g = [], [], []
    for i in range(m):
        member_seed = base_seed + i
        model = nn_mod.train(train_x, train_y, architecture,
                             replace(config, seed=member_seed))
        members.append(model)
        if kind in BLR_KINDS:
            if g is not None:
                posts = blr_mod.fit_deep_blr(model, train_x, train_y, g)
                chosen = float(g)
            else:
                posts, result = blr_mod.fit_deep_blr_with_grid(
                    model, train_x, train_y, g_grid, seed=member_seed)
                chosen = result.chosen_g
            posteriors.append(tuple(posts))
            member_g.append(chosen)
        else:
            posteriors.append(None)
            member_g.append(None)
    return EnsembleModel(kind=kind, members=tuple(members),
                         posteriors=tuple(posteriors),
                         member_g=tuple(member_g), base_seed=base_seed)


def dropout_masks(architecture: nn_mod.MlpArchitecture, mc_samples: int,
                  seed: int) -> np.ndarray:
    """(mc_samples, hidden_units) uint8 masks; shared across inputs."""
    rng = np.random.default_rng(seed)
    return (rng.random((mc_samples, architecture.hidden_units))
            >= architecture.dropout_rate).astype(np.uint8)


def mixture_predict(ensemble: EnsembleModel, x,
                    mc_samples: int = MC_DROPOUT_SAMPLES,
                    seed: int = 0) -> MixturePrediction:
    """One Gaussian component per member (or per dropout mask).

    For mc_dropout the same mc_samples masks are applied to every input
    row, seeded for determinism.
    """
    if ensemble.kind == "mc_dropout":
        model = ensemble.members[0]
        masks = dropout_masks(model.architecture, mc_samples, seed)
        comps = [nn_mod.forward(model, x, dropout_mask=mask)[1] for mask in masks]
    elif ensemble.kind in BLR_KINDS:
        comps = [blr_mod.predict_deep_blr(model, list(posts), x)
                 for model, posts in zip(ensemble.members, ensemble.posteriors)]
    else:
        comps = [nn_mod.forward(model, x)[1] for model in ensemble.members]
    return MixturePrediction(components=tuple(comps))


def mixture_nll(mixture: MixturePrediction, y):
    """-ln[(1/M) sum_m N(y | mu_m, var_m)] per output dim, summed over dims.

    Computed via log-sum-exp so near-zero densities stay finite.  Returns
    a scalar for a single point, an (n,) array for batched components.
    """
    y = np.asarray(y, dtype=np.float64)
    shape = mixture.components[0].mean.shape
    if y.shape != shape:
        raise ValueError(f"target shape {y.shape} does not match component "
                         f"shape {shape}")
    means = np.stack([c.mean for c in mixture.components])
    variances = np.stack([np.maximum(c.variance, VARIANCE_FLOOR)
                          for c in mixture.components])
    log_pdf = (-0.5 * np.log(2.0 * np.pi * variances)
               - (y - means) ** 2 / (2.0 * variances))
    per_dim = logsumexp(log_pdf, axis=0) - np.log(len(mixture.components))
    out = -per_dim.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def mixture_moments(mixture: MixturePrediction):
    """Exact mixture mean and variance (law of total variance)."""
    means = np.stack([c.mean for c in mixture.components])
    variances = np.stack([c.variance for c in mixture.components])
    mean = means.mean(axis=0)
    variance = (variances + means ** 2).mean(axis=0) - mean ** 2
    return mean, variance
