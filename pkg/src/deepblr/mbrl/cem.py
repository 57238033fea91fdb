"""Cross-entropy method planner over open-loop action sequences.

A diagonal Gaussian over length-H force sequences is refit to the top
scoring candidates for a few iterations; the planner executes the first
action of the final mean (MPC style).  Elites survive into the next
candidate pool, which makes the elite-mean score non-decreasing across
iterations for a deterministic objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import ensembles
from .cartpole import EnvState
from .dynamics import STATE_DIM, DynamicsModel, batched_rollout

STD_FLOOR = 1e-9


@dataclass(frozen=True)
class CemConfig:
    horizon: int = 25
    population: int = 200
    elites: int = 20
    iterations: int = 5
    particles: int = 20
    action_low: float = -10.0
    action_high: float = 10.0
    initial_std: float = 10.0  # half the action range

    def __post_init__(self):
        if self.horizon < 1 or self.population < 1 or self.elites < 1:
            raise ValueError("horizon, population and elites must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.particles < 1:
            raise ValueError("particles must be >= 1")
        if self.elites > self.population:
            raise ValueError("elites must not exceed population")
        if not self.action_low < self.action_high:
            raise ValueError("empty action interval")
        if self.initial_std <= 0.0:
            raise ValueError("initial_std must be positive")


@dataclass(frozen=True)
class CemResult:
    mean: np.ndarray
    elite_score_trace: tuple


def _seed_tuple(seed) -> tuple:
    if np.isscalar(seed):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def cem_optimize(evaluate, config: CemConfig, seed) -> CemResult:
    """Run CEM against an arbitrary batched objective.

    evaluate(plans, iteration) receives a (candidates, horizon) array and
    returns one score per row; higher is better.  With zero iterations
    the initial mean (all zeros) is returned untouched.
    """
    base = _seed_tuple(seed)
    mean = np.zeros(config.horizon)
    std = np.full(config.horizon, config.initial_std)
    retained = np.empty((0, config.horizon))
    trace = []
    for iteration in range(config.iterations):
        rng = np.random.default_rng((*base, 0, iteration))
        samples = rng.normal(mean, std, size=(config.population, config.horizon))
        np.clip(samples, config.action_low, config.action_high, out=samples)
        candidates = np.vstack([samples, retained])
        scores = np.asarray(evaluate(candidates, iteration), dtype=np.float64)
        if scores.shape != (candidates.shape[0],):
            raise ValueError("objective returned wrong number of scores")
        elite_idx = np.argsort(-scores, kind="stable")[:config.elites]
        retained = candidates[elite_idx]
        trace.append(float(scores[elite_idx].mean()))
        mean = retained.mean(axis=0)
        std = np.maximum(retained.std(axis=0), STD_FLOOR)
    return CemResult(mean=mean, elite_score_trace=tuple(trace))


def _model_evaluator(model: DynamicsModel, state: EnvState,
                     config: CemConfig, base: tuple):
    """Batched expected-return objective under the learned dynamics.

    Each candidate is expanded into `particles` rollouts; particle j is
    pinned to member j mod M as in ts_rollout, and all aleatoric /
    posterior-weight draws for one CEM iteration come from a single
    stream keyed off (seed, 1, iteration), disjoint from the sampler's
    (seed, 0, iteration) stream.
    """
    p = config.particles
    m = model.n_members
    h = model.ensemble.architecture.hidden_units
    blr = model.kind in ensembles.BLR_KINDS

    def evaluate(plans, iteration):
        c = plans.shape[0]
        rng = np.random.default_rng((*base, 1, iteration))
        member_of = np.tile(np.arange(p, dtype=np.int64) % m, c)
        actions = np.repeat(plans, p, axis=0)
        noise = rng.standard_normal((c * p, plans.shape[1], STATE_DIM))
        weight_xi = (rng.standard_normal((c * p, STATE_DIM, h))
                     if blr else None)
        returns = batched_rollout(model, state, actions, member_of,
                                  noise, weight_xi)
        return returns.reshape(c, p).mean(axis=1)

    return evaluate


def cem_plan(model: DynamicsModel, state: EnvState, config: CemConfig,
             seed) -> float:
    """First action of the CEM-optimized sequence; deterministic in seed."""
    base = _seed_tuple(seed)
    evaluate = _model_evaluator(model, state, config, base)
    result = cem_optimize(evaluate, config, seed)
    return float(result.mean[0])
