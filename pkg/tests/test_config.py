import json

import pytest

from driftgate.config import DEFAULTS, ConfigError, RunConfig, load_config, synth_spec


def test_defaults_resolve():
    cfg = RunConfig({})
    assert cfg.resolved["cost_ratios"] == [10.0, 25.0]
    assert [c.ratio for c in cfg.cost_specs] == [10.0, 25.0]
    pc = cfg.protocol_config("rolling")
    assert pc.rolling_window == 10 and pc.min_test_labeled == 50 and pc.split_step == 34
    assert cfg.bootstrap_spec().block_lengths == (3, 5, 7)
    assert cfg.scorer().lam == 1.0
    assert set(cfg.resolved) == set(DEFAULTS)


def test_all_problems_reported_together():
    with pytest.raises(ConfigError) as exc:
        RunConfig({"bogus": 1, "model": {"lambda": -1, "extra": 2}, "protocol": {"train_frac": 2},
                   "output": {"formats": ["xml"]}})
    probs = exc.value.problems
    assert len(probs) == 5
    assert any("bogus" in p for p in probs) and any("model.extra" in p for p in probs)
    assert "model.lambda" in str(exc.value)


def test_data_section_validation():
    with pytest.raises(ConfigError, match="exactly one"):
        RunConfig({"data": {"canonical": "a.csv", "features": "b.csv", "classes": "c.csv"}})
    with pytest.raises(ConfigError, match="data.classes"):
        RunConfig({"data": {"features": "b.csv"}})
    with pytest.raises(ConfigError, match="data.synthetic.foo"):
        RunConfig({"data": {"synthetic": {"n_periods": 2, "records_per_period": 5, "feature_dim": 1, "foo": 1}}})


def test_hash_stable_and_sensitive():
    a, b = RunConfig({"cost_ratios": [10, 25]}), RunConfig({"cost_ratios": [10, 25]})
    assert a.hash == b.hash and len(a.hash) == 16
    assert RunConfig({"cost_ratios": [10]}).hash != a.hash


def test_override_seed_and_out():
    cfg = RunConfig({"data": {"synthetic": {"n_periods": 3, "records_per_period": 5, "feature_dim": 1}}})
    o = cfg.override(seed=7, out="x")
    assert o.resolved["protocol"]["seed"] == 7 and o.resolved["bootstrap"]["seed"] == 7
    assert o.resolved["data"]["synthetic"]["seed"] == 7 and str(o.out_dir) == "x"
    assert cfg.resolved["protocol"]["seed"] == 0


def test_synth_spec_ramps():
    s = synth_spec({"n_periods": 3, "records_per_period": 10, "feature_dim": 2, "prevalence": [0.3, 0.1], "shift": [2, 1]})
    assert s.prevalence_schedule == pytest.approx((0.3, 0.2, 0.1))
    assert s.class_mean_shift == pytest.approx((2.0, 1.5, 1.0))


def test_load_config_paths(tmp_path, monkeypatch):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"cost_ratios": [5]}))
    assert load_config(p).resolved["cost_ratios"] == [5]
    monkeypatch.setenv("DRIFTGATE_CONFIG", str(p))
    assert load_config(None).resolved["cost_ratios"] == [5]
    monkeypatch.delenv("DRIFTGATE_CONFIG")
    assert load_config(None).resolved["cost_ratios"] == [10.0, 25.0]
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "missing.json")
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
