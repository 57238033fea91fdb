import json

import numpy as np
import pytest

from deepblr import artifact as art
from deepblr.data import Dataset


def linear_dataset(n=120, seed=7, p=2):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, p))
    coef = np.linspace(3.0, -2.0, p)
    y = x @ coef + 1.0 + 0.01 * rng.normal(size=n)
    return Dataset(name="lin", features=x, targets=y[:, None],
                   feature_names=tuple(f"f{i}" for i in range(p)),
                   target_names=("y",))


@pytest.fixture(scope="module")
def fitted():
    return art.fit_artifact(linear_dataset(), epochs=60, seed=0)


def test_linear_fit_rmse(fitted):
    ds = linear_dataset()
    mean, _, _ = art.predict_artifact(fitted, ds.features)
    rmse = np.sqrt(np.mean((mean[:, 0] - ds.targets[:, 0]) ** 2))
    assert rmse < 0.1


def test_predictions_in_original_units():
    base = linear_dataset()
    scaled = Dataset(name="scaled", features=base.features,
                     targets=base.targets * 250.0 + 1000.0,
                     feature_names=base.feature_names,
                     target_names=base.target_names)
    fitted = art.fit_artifact(scaled, epochs=60, seed=0)
    mean, alea, total = art.predict_artifact(fitted, scaled.features)
    # means live near the shifted targets, not near the normalized scale
    assert abs(mean.mean() - scaled.targets.mean()) < 100.0
    assert np.all(total >= alea) and np.all(alea > 0)


def test_round_trip_identical_predictions(fitted, tmp_path):
    path = tmp_path / "model.json"
    art.save_artifact(fitted, path)
    loaded = art.load_artifact(path)
    x = linear_dataset().features
    for a, b in zip(art.predict_artifact(fitted, x),
                    art.predict_artifact(loaded, x)):
        # JSON floats round-trip exactly, so bitwise equality is expected
        assert np.array_equal(a, b)


def test_second_generation_copy_stable(fitted, tmp_path):
    art.save_artifact(fitted, tmp_path / "g1.json")
    g1 = art.load_artifact(tmp_path / "g1.json")
    art.save_artifact(g1, tmp_path / "g2.json")
    assert (tmp_path / "g1.json").read_bytes() == \
        (tmp_path / "g2.json").read_bytes()


def test_fixed_g_skips_grid(fitted):
    fixed = art.fit_artifact(linear_dataset(), epochs=30, seed=0, g=0.5)
    assert fixed.prior_variance == 0.5
    assert all(p.prior_variance == 0.5 for p in fixed.posteriors)


def test_wrong_feature_count_names_p(fitted):
    with pytest.raises(ValueError, match=r"p=2"):
        art.predict_artifact(fitted, np.zeros((4, 3)))


def test_non_finite_input_rejected(fitted):
    bad = np.zeros((2, 2))
    bad[1, 0] = np.nan
    with pytest.raises(ValueError, match="finite"):
        art.predict_artifact(fitted, bad)


def test_not_an_artifact(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text('{"hello": 1}')
    with pytest.raises(art.ArtifactError, match="deepblr-artifact"):
        art.load_artifact(path)


def test_invalid_json(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text("{nope")
    with pytest.raises(art.ArtifactError, match="JSON"):
        art.load_artifact(path)


def test_unsupported_version(fitted, tmp_path):
    path = tmp_path / "model.json"
    art.save_artifact(fitted, path)
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(art.ArtifactError, match="version"):
        art.load_artifact(path)


def test_missing_field_is_descriptive(fitted, tmp_path):
    path = tmp_path / "model.json"
    art.save_artifact(fitted, path)
    doc = json.loads(path.read_text())
    del doc["posteriors"]
    path.write_text(json.dumps(doc))
    with pytest.raises(art.ArtifactError, match="malformed"):
        art.load_artifact(path)


def test_config_round_trips(tmp_path):
    fitted = art.fit_artifact(linear_dataset(), epochs=20, seed=3,
                              config={"seed": 3, "note": "fixture"})
    art.save_artifact(fitted, tmp_path / "m.json")
    assert art.load_artifact(tmp_path / "m.json").config == \
        {"seed": 3, "note": "fixture"}


def test_multi_target_artifact(tmp_path):
    rng = np.random.default_rng(5)
    x = rng.normal(size=(80, 3))
    y = np.column_stack([x @ [1.0, 0.5, -1.0], x @ [-2.0, 0.0, 1.0]])
    ds = Dataset(name="two", features=x, targets=y,
                 feature_names=("a", "b", "c"), target_names=("u", "v"))
    fitted = art.fit_artifact(ds, epochs=40, seed=1)
    art.save_artifact(fitted, tmp_path / "m.json")
    mean, alea, total = art.predict_artifact(
        art.load_artifact(tmp_path / "m.json"), x)
    assert mean.shape == alea.shape == total.shape == (80, 2)
