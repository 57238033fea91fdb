import json

import numpy as np
import pytest

from deepblr import bench, data, nn


def linear_dataset(n=60, seed=0, name="synthetic"):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 2))
    y = (x @ np.array([[1.5], [-0.5]])) + rng.normal(0, 0.1, size=(n, 1))
    return data.Dataset(name=name, features=x, targets=y,
                        feature_names=("x1", "x2"), target_names=("y",))


FAST = bench.DatasetProtocol("synthetic", "", hidden_units=8,
                             learning_rate=0.01, n_splits=3)


def run(method, n_splits=3, seed=0, ds=None):
    return bench.run_benchmark(ds or linear_dataset(), method, n_splits, seed,
                               proto=FAST)


# --------------------------------------------------------------- record

def test_record_shape_and_summary_recompute():
    rec = run("blr")
    assert rec.dataset == "synthetic"
    assert rec.method == "blr"
    assert len(rec.per_split) == 3
    s = rec.summary()
    assert s["nll_mean"] == pytest.approx(float(np.mean(rec.nlls())))
    assert s["nll_se"] == pytest.approx(
        float(np.std(rec.nlls(), ddof=1) / np.sqrt(3)))
    assert s["rmse_mean"] == pytest.approx(float(np.mean(rec.rmses())))


def test_json_schema_exact_fields():
    rec = run("blr_ensemble", n_splits=2)
    doc = json.loads(rec.to_json())
    assert set(doc) == {"dataset", "method", "config", "per_split", "summary"}
    assert set(doc["summary"]) == {"nll_mean", "nll_se", "rmse_mean", "rmse_se"}
    for entry in doc["per_split"]:
        assert set(entry) == {"seed", "nll", "rmse", "g", "wall_ms"}
        assert len(entry["g"]) == 5          # one g per ensemble member
    assert doc["config"]["n_splits"] == 2


def test_single_split_se_is_null():
    rec = run("single_nn", n_splits=1)
    doc = json.loads(rec.to_json())
    assert doc["summary"]["nll_se"] is None


def test_deterministic_given_seeds():
    a = run("blr", seed=4)
    b = run("blr", seed=4)
    assert np.array_equal(a.nlls(), b.nlls())
    assert np.array_equal(a.rmses(), b.rmses())
    assert [e["g"] for e in a.per_split] == [e["g"] for e in b.per_split]


def test_different_seed_changes_results():
    a = run("blr", seed=0)
    b = run("blr", seed=1)
    assert not np.array_equal(a.nlls(), b.nlls())


def test_all_methods_finite():
    ds = linear_dataset(n=80)
    for method in bench.METHODS:
        rec = bench.run_benchmark(ds, method, 2, 0, proto=FAST)
        assert np.all(np.isfinite(rec.nlls())), method
        assert np.all(np.isfinite(rec.rmses())), method


def test_g_recording_by_method():
    assert run("single_nn", n_splits=1).per_split[0]["g"] is None
    g = run("blr", n_splits=1).per_split[0]["g"]
    assert isinstance(g, float) and g > 0


# ------------------------------------------------------- training reuse

def test_one_training_run_per_member_per_split(monkeypatch):
    """The g grid search must reuse the trained network, never retrain."""
    calls = {"n": 0}
    original = nn.train

    def counting_train(*args, **kwargs):
        calls["n"] += 1
        return original(*args, **kwargs)

    monkeypatch.setattr(nn, "train", counting_train)
    run("blr", n_splits=3)
    assert calls["n"] == 3
    calls["n"] = 0
    run("blr_ensemble", n_splits=2)
    assert calls["n"] == 10


# ------------------------------------------------------------- failures

def test_split_failure_recorded_and_run_continues(monkeypatch):
    original = bench._run_split

    def flaky(dataset, method, split_index, *args, **kwargs):
        if split_index == 1:
            raise RuntimeError("synthetic failure")
        return original(dataset, method, split_index, *args, **kwargs)

    monkeypatch.setattr(bench, "_run_split", flaky)
    rec = run("single_nn", n_splits=3)
    assert len(rec.per_split) == 2
    assert len(rec.failures) == 1
    assert "synthetic failure" in rec.failures[0]["error"]
    doc = json.loads(rec.to_json())
    assert "failures" in doc


def test_all_splits_failing_raises(monkeypatch):
    def broken(*args, **kwargs):
        raise RuntimeError("boom")

    monkeypatch.setattr(bench, "_run_split", broken)
    with pytest.raises(RuntimeError, match="boom"):
        run("single_nn", n_splits=2)


# ------------------------------------------------------------ validation

def test_unknown_method_rejected():
    with pytest.raises(ValueError, match="unknown method"):
        run("stacking")


def test_small_dataset_rejected():
    tiny = linear_dataset(n=5)
    with pytest.raises(ValueError, match="at least 10 rows"):
        bench.run_benchmark(tiny, "blr", 1, 0, proto=FAST)


def test_load_dataset_unknown_key():
    with pytest.raises(KeyError, match="unknown dataset"):
        bench.load_dataset("mnist")


def test_load_dataset_missing_file(tmp_path, monkeypatch):
    monkeypatch.setenv("DEEPBLR_DATA_DIR", str(tmp_path))
    with pytest.raises(FileNotFoundError, match="fetch_data"):
        bench.load_dataset("boston")


def test_load_dataset_env_override(tmp_path, monkeypatch):
    target = tmp_path / "boston"
    target.mkdir()
    (target / "boston.csv").write_text("x1,y\n" + "\n".join(
        f"{i},{2 * i}" for i in range(12)) + "\n")
    monkeypatch.setenv("DEEPBLR_DATA_DIR", str(tmp_path))
    ds = bench.load_dataset("boston")
    assert ds.n_rows == 12
    assert ds.name == "boston"


def test_subsample():
    ds = linear_dataset(n=200)
    sub = bench.subsample(ds, 0.1, seed=0)
    assert sub.n_rows == 20
    again = bench.subsample(ds, 0.1, seed=0)
    assert np.array_equal(sub.features, again.features)
    with pytest.raises(ValueError):
        bench.subsample(ds, 0.0, seed=0)


def test_protocol_registry_values():
    assert bench.PROTOCOLS["boston"].hidden_units == 50
    assert bench.PROTOCOLS["protein"].hidden_units == 100
    assert bench.PROTOCOLS["protein"].learning_rate == 0.001
    assert bench.PROTOCOLS["protein"].n_splits == 5
    assert bench.PROTOCOLS["year"].learning_rate == 0.0001
    assert bench.PROTOCOLS["year"].n_splits == 1
    assert bench.PROTOCOLS["kin8nm"].n_splits == 20
    assert bench.EPOCHS == 40 and bench.BATCH_SIZE == 32
    assert bench.ENSEMBLE_SIZE == 5


def test_format_summary_row():
    rec = run("blr", n_splits=2)
    row = bench.format_summary_row(rec)
    assert "synthetic" in row and "blr" in row and "+/-" in row
