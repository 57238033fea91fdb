from .cartpole import (ACTION_LIMIT, POSITION_LIMIT, EnvState, cartpole_step,
                       initial_state, mechanical_energy)
from .cem import CemConfig, cem_optimize, cem_plan
from .dynamics import (RL_PRIOR_VARIANCE, DynamicsModel, DynamicsTrainConfig,
                       ReplayBuffer, fit_dynamics, particle_returns,
                       predict_next_state, ts_rollout)
from .pets import RL_KINDS, PetsConfig, pets_loop

__all__ = [
    "ACTION_LIMIT", "POSITION_LIMIT", "EnvState", "cartpole_step",
    "initial_state", "mechanical_energy", "CemConfig", "cem_optimize",
    "cem_plan", "RL_PRIOR_VARIANCE", "DynamicsModel", "DynamicsTrainConfig",
    "ReplayBuffer", "fit_dynamics", "particle_returns",
    "predict_next_state", "ts_rollout",
    "RL_KINDS", "PetsConfig", "pets_loop",
]
