"""Uncertainty-aware dynamics models over (state, action) -> state delta.

The network input is the 4-dim cart-pole state plus the scalar force
(p = 5); targets are next_state - state (D = 4).  Both sides are
renormalized against the full replay buffer before every refit.  BLR
kinds always use prior variance 0.1; anything else is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .. import _native
from .. import ensembles
from .. import nn as nn_mod
from ..data import NormalizationStats, _column_stats
from .cartpole import POSITION_LIMIT, EnvState

RL_PRIOR_VARIANCE = 0.1
STATE_DIM = 4
INPUT_DIM = 5
STATE_CLAMP = 1e6


@dataclass
class ReplayBuffer:
    """Growing transition store; arrays are copied out on read."""

    states: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    next_states: list = field(default_factory=list)

    def add(self, state: EnvState, action: float, next_state: EnvState):
        self.states.append(state.as_tuple())
        self.actions.append(float(action))
        self.next_states.append(next_state.as_tuple())

    def __len__(self) -> int:
        return len(self.actions)

    def arrays(self):
        return (np.array(self.states, dtype=np.float64),
                np.array(self.actions, dtype=np.float64),
                np.array(self.next_states, dtype=np.float64))


@dataclass(frozen=True)
class DynamicsTrainConfig:
    hidden_units: int = 50
    epochs: int = 35
    batch_size: int = 32
    learning_rate: float = 0.001
    ensemble_size: int = 5


@dataclass(frozen=True)
class DynamicsModel:
    ensemble: ensembles.EnsembleModel
    stats: NormalizationStats

    @property
    def kind(self) -> str:
        return self.ensemble.kind

    @property
    def n_members(self) -> int:
        return len(self.ensemble.members)


def _replay_normalization(features, deltas) -> NormalizationStats:
    f_mean, f_std = _column_stats(features, "dynamics input")
    t_mean, t_std = _column_stats(deltas, "dynamics delta")
    return NormalizationStats(f_mean, f_std, t_mean, t_std)


def fit_dynamics(buffer: ReplayBuffer, kind: str, base_seed: int,
                 config: DynamicsTrainConfig = DynamicsTrainConfig(),
                 g: float = RL_PRIOR_VARIANCE) -> DynamicsModel:
    """Retrain from scratch on the whole buffer with fresh normalization."""
    if kind in ensembles.BLR_KINDS and g != RL_PRIOR_VARIANCE:
        raise ValueError(f"dynamics BLR fits are pinned to prior variance "
                         f"{RL_PRIOR_VARIANCE}, got {g}")
    if len(buffer) < 2:
        raise ValueError("need at least 2 transitions to fit dynamics")
    states, actions, next_states = buffer.arrays()
    features = np.column_stack([states, actions])
    deltas = next_states - states
    stats = _replay_normalization(features, deltas)
    x = (features - stats.feature_means) / stats.feature_stds
    y = (deltas - stats.target_means) / stats.target_stds

    arch = nn_mod.MlpArchitecture(INPUT_DIM, config.hidden_units, STATE_DIM)
    train_cfg = nn_mod.TrainConfig(epochs=config.epochs,
                                   batch_size=config.batch_size,
                                   learning_rate=config.learning_rate,
                                   seed=0)
    m = config.ensemble_size if kind in ("nn_ensemble", "blr_ensemble") else 1
    ens = ensembles.train_ensemble(x, y, arch, train_cfg, m=m,
                                   base_seed=base_seed, kind=kind, g=g)
    return DynamicsModel(ensemble=ens, stats=stats)


def _stacked_params(model: DynamicsModel):
    members = model.ensemble.members
    return tuple(np.ascontiguousarray(np.stack(arrays))
                 for arrays in zip(*(m.parameter_arrays() for m in members)))


def _draw_weight_samples(model: DynamicsModel, member_of: np.ndarray,
                         xi: np.ndarray) -> np.ndarray:
    """Map standard-normal draws xi (R, D, h) to posterior weight samples.

    Row j uses member member_of[j]'s per-dimension posteriors:
    w = w_N + L^{-T} xi.
    """
    r, d, h = xi.shape
    out = np.empty((r, d, h))
    for m, posts in enumerate(model.ensemble.posteriors):
        rows = np.flatnonzero(member_of == m)
        if rows.size == 0:
            continue
        for k in range(d):
            post = posts[k]
            shift = solve_triangular(post.precision_cholesky,
                                     xi[rows, k, :].T, lower=True, trans="T")
            out[rows, k, :] = post.mean_weights[None, :] + shift.T
    return out


def batched_rollout(model: DynamicsModel, start: EnvState,
                    actions: np.ndarray, member_of: np.ndarray,
                    noise: np.ndarray,
                    weight_xi: np.ndarray | None) -> np.ndarray:
    """Imagined returns for R rollouts of horizon H under the learned model.

    actions is (R, H); member_of assigns each row a fixed ensemble member;
    noise (R, H, 4) holds the standard-normal aleatoric draws; weight_xi
    (R, 4, h) holds standard-normal posterior draws for BLR kinds (None
    otherwise).  Each imagined step samples the next state from the row's
    Gaussian prediction; the cart position is clipped like the real
    environment and every dimension is clamped for safety.
    """
    actions = np.ascontiguousarray(actions, dtype=np.float64)
    noise = np.ascontiguousarray(noise, dtype=np.float64)
    member_of = np.ascontiguousarray(member_of, dtype=np.int64)
    if actions.shape[0] != member_of.shape[0] or noise.shape[:2] != actions.shape:
        raise ValueError("rollout batch shapes disagree")
    weight_samples = None
    if model.kind in ensembles.BLR_KINDS:
        if weight_xi is None:
            raise ValueError(f"{model.kind} rollouts need weight draws")
        weight_samples = np.ascontiguousarray(
            _draw_weight_samples(model, member_of, weight_xi))
    w1, b1, wm, bm, wv, bv = _stacked_params(model)
    stats = model.stats
    return _native.rollout_cartpole(
        w1, b1, wm, bm, wv, bv, weight_samples, member_of, actions, noise,
        np.ascontiguousarray(stats.feature_means),
        np.ascontiguousarray(stats.feature_stds),
        np.ascontiguousarray(stats.target_means),
        np.ascontiguousarray(stats.target_stds),
        np.array(start.as_tuple(), dtype=np.float64),
        POSITION_LIMIT, STATE_CLAMP)


def particle_returns(model: DynamicsModel, state: EnvState, action_sequence,
                     particles: int, seed) -> np.ndarray:
    """Per-particle imagined returns, one trajectory-sampling particle each.

    Particle j is pinned to member j mod M for the whole rollout and owns
    an independent random stream, so adding particles never disturbs the
    trajectories of existing ones.
    """
    if particles < 1:
        raise ValueError("particles must be >= 1")
    actions = np.asarray(action_sequence, dtype=np.float64).ravel()
    horizon = actions.shape[0]
    member_of = np.arange(particles, dtype=np.int64) % model.n_members
    h = model.ensemble.architecture.hidden_units
    noise = np.empty((particles, horizon, STATE_DIM))
    weight_xi = None
    if model.kind in ensembles.BLR_KINDS:
        weight_xi = np.empty((particles, STATE_DIM, h))
    for j in range(particles):
        stream = np.random.default_rng([seed, j] if np.isscalar(seed)
                                       else list(seed) + [j])
        noise[j] = stream.standard_normal((horizon, STATE_DIM))
        if weight_xi is not None:
            weight_xi[j] = stream.standard_normal((STATE_DIM, h))
    tiled = np.broadcast_to(actions, (particles, horizon))
    return batched_rollout(model, state, tiled, member_of, noise, weight_xi)


def ts_rollout(model: DynamicsModel, state: EnvState, action_sequence,
               particles: int, seed) -> float:
    """Mean imagined return over trajectory-sampling particles."""
    return float(particle_returns(model, state, action_sequence,
                                  particles, seed).mean())


def predict_next_state(model: DynamicsModel, state: EnvState,
                       action: float):
    """Mixture-mean next state (no sampling); handy for diagnostics."""
    feats = np.array([[*state.as_tuple(), float(action)]])
    x = (feats - model.stats.feature_means) / model.stats.feature_stds
    mix = ensembles.mixture_predict(model.ensemble, x)
    mean_norm, _ = ensembles.mixture_moments(mix)
    delta = mean_norm[0] * model.stats.target_stds + model.stats.target_means
    raw = np.array(state.as_tuple()) + delta
    raw[0] = np.clip(raw[0], -POSITION_LIMIT, POSITION_LIMIT)
    return EnvState(*raw)
