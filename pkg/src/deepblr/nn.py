"""One-hidden-layer ReLU network with a Gaussian output head.

The network maps an input x to a latent representation z(x) (the hidden
layer after ReLU) and from there to a per-dimension predictive mean and
aleatoric variance.  It is trained by minimising the Gaussian negative
log-likelihood with minibatch Adam.  Gradients are derived by hand for
this fixed architecture; a finite-difference oracle in the tests keeps
them honest.

All operations are pure functions of their inputs and a seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _native
from ._kernels_py import (ALEATORIC_CEILING, ALEATORIC_FLOOR, VARIANCE_FLOOR,
                          grad_arrays as _grad_arrays, param_views as _param_views,
                          sigmoid, softplus)

_SEED_MASK = 0xFFFFFFFFFFFFFFFF


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed & _SEED_MASK)


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss becomes non-finite."""


@dataclass(frozen=True)
class MlpArchitecture:
    input_dim: int
    hidden_units: int
    output_dim: int
    dropout_rate: float = 0.0

    def __post_init__(self):
        if min(self.input_dim, self.hidden_units, self.output_dim) < 1:
            raise ValueError("input_dim, hidden_units and output_dim must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    batch_size: int = 32
    learning_rate: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("adam betas must lie strictly in (0, 1)")


@dataclass(frozen=True)
class MlpModel:
    """Parameters of a trained (or freshly initialised) network.

    Weight matrices are stored row-major with the output dimension first:
    ``first_layer_weights`` is (hidden_units, input_dim), the two heads are
    (output_dim, hidden_units).  Arrays are marked read-only; models are
    immutable once built.
    """

    architecture: MlpArchitecture
    first_layer_weights: np.ndarray
    first_layer_bias: np.ndarray
    mean_head_weights: np.ndarray
    mean_head_bias: np.ndarray
    variance_head_weights: np.ndarray
    variance_head_bias: np.ndarray

    def parameter_arrays(self) -> tuple[np.ndarray, ...]:
        return (self.first_layer_weights, self.first_layer_bias,
                self.mean_head_weights, self.mean_head_bias,
                self.variance_head_weights, self.variance_head_bias)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _build_model(arch: MlpArchitecture, params: tuple[np.ndarray, ...]) -> MlpModel:
    for p in params:
        if not np.all(np.isfinite(p)):
            raise ValueError("model parameters must be finite")
    return MlpModel(arch, *(_freeze(p) for p in params))


@dataclass(frozen=True)
class GaussianPrediction:
    """Per-input Gaussian prediction, split into aleatoric and epistemic parts.

    Arrays have shape (..., output_dim); ``variance`` is constructed as the
    exact elementwise sum of the two parts.
    """

    mean: np.ndarray
    aleatoric_variance: np.ndarray
    epistemic_variance: np.ndarray
    variance: np.ndarray = field(init=False)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        alea = np.maximum(np.asarray(self.aleatoric_variance, dtype=np.float64),
                          VARIANCE_FLOOR)
        epi = np.maximum(np.asarray(self.epistemic_variance, dtype=np.float64), 0.0)
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(alea))
                and np.all(np.isfinite(epi))):
            raise ValueError("prediction entries must be finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "aleatoric_variance", alea)
        object.__setattr__(self, "epistemic_variance", epi)
        object.__setattr__(self, "variance", alea + epi)


def aleatoric_from_raw(raw: np.ndarray) -> np.ndarray:
    """Variance head parameterisation: softplus(raw) + floor, clamped above."""
    return np.minimum(softplus(raw) + ALEATORIC_FLOOR, ALEATORIC_CEILING)


def init_mlp(architecture: MlpArchitecture, seed: int) -> MlpModel:
    """Initialise weights uniformly in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.

    Identical (architecture, seed) pairs yield bit-identical models.
    """
    p, h, d = architecture.input_dim, architecture.hidden_units, architecture.output_dim
    rng = _rng(seed)
    bound1 = 1.0 / np.sqrt(p)
    bound2 = 1.0 / np.sqrt(h)
    w1 = rng.uniform(-bound1, bound1, size=(h, p))
    wm = rng.uniform(-bound2, bound2, size=(d, h))
    wv = rng.uniform(-bound2, bound2, size=(d, h))
    return _build_model(architecture,
                        (w1, np.zeros(h), wm, np.zeros(d), wv, np.zeros(d)))


def _forward_arrays(model: MlpModel, x: np.ndarray,
                    dropout_mask: np.ndarray | None = None):
    """Batched forward pass.

    Returns (latent, mean, aleatoric_variance) with shapes (..., h) and (..., D).
    """
    arch = model.architecture
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != arch.input_dim:
        raise ValueError(f"expected input dimension {arch.input_dim}, got {x.shape[-1]}")
    latent = np.maximum(x @ model.first_layer_weights.T + model.first_layer_bias, 0.0)
    if dropout_mask is not None:
        mask = np.asarray(dropout_mask, dtype=np.float64)
        if mask.shape[-1] != arch.hidden_units:
            raise ValueError(f"dropout mask must have length {arch.hidden_units}")
        latent = latent * mask / (1.0 - arch.dropout_rate)
    mean = latent @ model.mean_head_weights.T + model.mean_head_bias
    raw = latent @ model.variance_head_weights.T + model.variance_head_bias
    return latent, mean, aleatoric_from_raw(raw)


def forward(model: MlpModel, x: np.ndarray,
            dropout_mask: np.ndarray | None = None):
    """Run the network on one input (or a batch of inputs).

    With a dropout mask present the latent units are rescaled by
    mask / (1 - dropout_rate) (inverted dropout), so the expectation over
    masks equals the unmasked latent.  A bare network carries no epistemic
    uncertainty: epistemic_variance is zero.

    Returns (latent, GaussianPrediction).
    """
    latent, mean, alea = _forward_arrays(model, x, dropout_mask)
    pred = GaussianPrediction(mean=mean, aleatoric_variance=alea,
                              epistemic_variance=np.zeros_like(mean))
    return latent, pred


def gaussian_nll(prediction: GaussianPrediction, y: np.ndarray):
    """Negative log-likelihood of y under the prediction, summed over output dims.

    Returns a scalar for a single prediction, an array of per-point values
    for a batch.
    """
    y = np.asarray(y, dtype=np.float64)
    mean, var = prediction.mean, prediction.variance
    if y.shape != mean.shape:
        raise ValueError(f"target shape {y.shape} does not match mean shape {mean.shape}")
    if np.any(var <= 0):
        raise ValueError("non-positive predictive variance")
    var = np.maximum(var, VARIANCE_FLOOR)
    nll = 0.5 * np.log(2.0 * np.pi * var) + (y - mean) ** 2 / (2.0 * var)
    out = nll.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Gradients:
    first_layer_weights: np.ndarray
    first_layer_bias: np.ndarray
    mean_head_weights: np.ndarray
    mean_head_bias: np.ndarray
    variance_head_weights: np.ndarray
    variance_head_bias: np.ndarray

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.first_layer_weights, self.first_layer_bias,
                self.mean_head_weights, self.mean_head_bias,
                self.variance_head_weights, self.variance_head_bias)


def backward(model: MlpModel, batch_x: np.ndarray, batch_y: np.ndarray,
             dropout_masks: np.ndarray | None = None) -> Gradients:
    """Exact gradients of the mean-over-batch NLL w.r.t. every parameter."""
    x = np.asarray(batch_x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    y = np.asarray(batch_y, dtype=np.float64)
    if single:
        y = y.reshape(1, -1)
    elif y.ndim == 1:
        y = y[:, None]
    if x.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    expected = (x.shape[0], model.architecture.output_dim)
    if y.shape != expected:
        raise ValueError(f"target shape {y.shape} does not match {expected}")
    grads, _ = _grad_arrays(model.parameter_arrays(),
                            model.architecture.dropout_rate, x, y, dropout_masks)
    return Gradients(*grads)


@dataclass(frozen=True)
class AdamState:
    first_moment: tuple[np.ndarray, ...]
    second_moment: tuple[np.ndarray, ...]
    step: int = 0

    @classmethod
    def zeros_like(cls, params: tuple[np.ndarray, ...]) -> "AdamState":
        return cls(tuple(np.zeros_like(p) for p in params),
                   tuple(np.zeros_like(p) for p in params), 0)


def adam_step(state: AdamState, gradients, params: tuple[np.ndarray, ...],
              config: TrainConfig):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    grads = gradients.arrays() if isinstance(gradients, Gradients) else tuple(gradients)
    t = state.step + 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1 ** t)
        vhat = v / (1 - b2 ** t)
        new_p.append(p - config.learning_rate * mhat / (np.sqrt(vhat) + config.adam_epsilon))
        new_m.append(m)
        new_v.append(v)
    return tuple(new_p), AdamState(tuple(new_m), tuple(new_v), t)


def _flatten_params(params: tuple[np.ndarray, ...]) -> np.ndarray:
    return np.concatenate([p.ravel() for p in params])


def epoch_order_and_masks(arch: MlpArchitecture, config: TrainConfig,
                          n_rows: int, epoch: int):
    """Seeded shuffle (and dropout masks) for one epoch.

    The per-epoch generator is seeded with config.seed XOR epoch, so epochs
    reshuffle independently but reproducibly.  masks[i] applies to the i-th
    row in shuffled order; it is None when the architecture has no dropout.
    """
    rng = _rng(config.seed ^ epoch)
    order = rng.permutation(n_rows).astype(np.int64)
    masks = None
    if arch.dropout_rate > 0.0:
        masks = (rng.random((n_rows, arch.hidden_units))
                 >= arch.dropout_rate).astype(np.uint8)
    return order, masks


def train(train_x: np.ndarray, train_y: np.ndarray,
          architecture: MlpArchitecture, config: TrainConfig) -> MlpModel:
    """Minibatch Adam on the Gaussian NLL for the configured number of epochs.

    Rows are reshuffled every epoch with a seeded permutation; the final
    partial batch is kept.  Training is deterministic: the same data,
    architecture and config produce a bit-identical model.

    Raises TrainingDivergedError if the loss becomes non-finite.
    """
    x = np.ascontiguousarray(np.atleast_2d(train_x), dtype=np.float64)
    y = np.asarray(train_y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    y = np.ascontiguousarray(y)
    if x.shape[0] == 0:
        raise ValueError("training set must be non-empty")
    if x.shape[0] != y.shape[0]:
        raise ValueError("feature and target row counts differ")

    model = init_mlp(architecture, config.seed)
    theta = _flatten_params(model.parameter_arrays())
    first_m = np.zeros_like(theta)
    second_m = np.zeros_like(theta)
    step = 0
    for epoch in range(config.epochs):
        order, masks = epoch_order_and_masks(architecture, config, x.shape[0], epoch)
        step, epoch_nll = _native.train_epoch(
            theta, first_m, second_m, x, y, order, masks,
            architecture.input_dim, architecture.hidden_units,
            architecture.output_dim, architecture.dropout_rate,
            config.batch_size, config.learning_rate,
            config.adam_beta1, config.adam_beta2, config.adam_epsilon, step)
        if not np.isfinite(epoch_nll):
            raise TrainingDivergedError(
                f"non-finite training NLL in epoch {epoch} "
                f"(learning_rate={config.learning_rate}); aborting")
    views = _param_views(theta, architecture.input_dim,
                         architecture.hidden_units, architecture.output_dim)
    return _build_model(architecture, views)
