import numpy as np
import pytest

import deepblr.mbrl.pets as pets_mod
from deepblr.mbrl import CemConfig, DynamicsTrainConfig, PetsConfig, pets_loop
from deepblr.mbrl.pets import RL_KINDS, DESK_CEM, EpisodeRecord

FAST = PetsConfig(
    episodes=2,
    steps_per_episode=20,
    cem=CemConfig(horizon=4, population=10, elites=2, iterations=2,
                  particles=2),
    dynamics=DynamicsTrainConfig(hidden_units=8, epochs=3, ensemble_size=2),
)


def returns_of(records):
    return [r.episode_return for r in records]


class TestKinds:
    def test_cli_names_map_to_ensemble_kinds(self):
        assert RL_KINDS == {"single": "single_nn",
                           "ensemble": "nn_ensemble",
                           "blr": "single_blr",
                           "blr-ensemble": "blr_ensemble"}

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="model kind"):
            pets_loop("mc_dropout", 1, seed=0, config=FAST)

    def test_cli_alias_equals_internal_name(self):
        a = pets_loop("blr", 2, seed=0, config=FAST)
        b = pets_loop("single_blr", 2, seed=0, config=FAST)
        assert returns_of(a) == returns_of(b)


class TestLoop:
    def test_single_episode_bootstrap(self):
        records = pets_loop("single", 1, seed=0, config=FAST)
        assert len(records) == 1
        assert records[0].episode == 0
        assert np.isfinite(records[0].episode_return)
        assert records[0].wall_ms >= 0.0

    def test_deterministic_given_seed(self):
        a = pets_loop("ensemble", 2, seed=3, config=FAST)
        b = pets_loop("ensemble", 2, seed=3, config=FAST)
        assert returns_of(a) == returns_of(b)

    def test_seeds_differ(self):
        a = pets_loop("single", 1, seed=0, config=FAST)
        b = pets_loop("single", 1, seed=1, config=FAST)
        assert returns_of(a) != returns_of(b)

    def test_episode_zero_is_model_free(self, monkeypatch):
        def boom(*args, **kwargs):
            raise AssertionError("episode 0 must not fit a model")

        monkeypatch.setattr(pets_mod, "fit_dynamics", boom)
        records = pets_loop("single", 1, seed=0, config=FAST)
        assert len(records) == 1

    def test_callback_sees_partial_results_before_failure(self, monkeypatch):
        seen = []

        def failing_fit(*args, **kwargs):
            raise RuntimeError("diverged")

        monkeypatch.setattr(pets_mod, "fit_dynamics", failing_fit)
        with pytest.raises(RuntimeError, match="diverged"):
            pets_loop("single", 3, seed=0, config=FAST,
                      on_episode=seen.append)
        assert [r.episode for r in seen] == [0]

    def test_callback_order_and_count(self):
        seen = []
        records = pets_loop("blr", 2, seed=1, config=FAST,
                            on_episode=seen.append)
        assert seen == records
        assert [r.episode for r in seen] == [0, 1]

    def test_all_kinds_run(self):
        for kind in RL_KINDS.values():
            records = pets_loop(kind, 2, seed=0, config=FAST)
            assert len(records) == 2
            assert all(np.isfinite(r.episode_return) for r in records)

    def test_validation(self):
        with pytest.raises(ValueError):
            pets_loop("single", 0, seed=0, config=FAST)
        with pytest.raises(ValueError):
            PetsConfig(episodes=0)
        with pytest.raises(ValueError):
            PetsConfig(steps_per_episode=0)


def test_desk_planner_particles_cover_all_members():
    assert DESK_CEM.particles % 5 == 0


def test_episode_record_fields():
    r = EpisodeRecord(3, 120.5, 17.0)
    assert (r.episode, r.episode_return, r.wall_ms) == (3, 120.5, 17.0)
