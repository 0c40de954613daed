import json

import pytest

from asym_sim.config import ConfigError, apply_overrides, from_dict, load_config


def test_empty_object_gives_shared_defaults():
    cfg = from_dict({})
    assert cfg.space.dims == 2
    assert [s.opinion for s in cfg.influencers] == [(0.0, 0.0), (1.0, 1.0)]
    assert [s.reference_dir for s in cfg.influencers] == [0, 1]
    assert [s.initial_popularity for s in cfg.influencers] == [100, 100]
    assert [s.post_freq for s in cfg.influencers] == [0.5, 0.5]
    assert cfg.population.n_users == 10000
    assert cfg.population.shape_for_axis(0) == (10.0, 10.0)
    assert cfg.run.n_iter == 100000
    assert (cfg.weights.alpha, cfg.weights.beta) == (0.05, 0.93)
    assert cfg.kernels.feedback == "linear"


def test_frequency_simplex_violation_names_field(tmp_path):
    raw = {"influencers": [{"post_freq": 0.6}, {"post_freq": 0.6}]}
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(raw))
    with pytest.raises(ConfigError, match=r"influencers\[\]\.post_freq"):
        load_config(p)


def test_case_study_file_values():
    cfg = load_config("case_study")
    conte, salvini = cfg.influencers
    assert conte.opinion[0] == 0.76 and salvini.opinion[0] == 0.0
    assert (conte.post_freq, salvini.post_freq) == (0.108, 0.892)
    assert (conte.initial_popularity, salvini.initial_popularity) == (20, 20)
    assert (cfg.weights.alpha, cfg.weights.beta) == (0.3, 0.65)
    assert cfg.kernels.feedback == "gaussian" and cfg.kernels.feedback_scale == 8.25
    assert cfg.kernels.rho == 0.0
    assert cfg.run.n_iter == 15000
    assert cfg.case_study.transient == 10000 and cfg.case_study.crisis_length == 550


@pytest.mark.parametrize("name", ["default", "appendixD", "case_study"])
def test_bundled_round_trip(name):
    cfg = load_config(name)
    again = from_dict(json.loads(cfg.to_json()))
    assert again == cfg


def test_overrides_and_aliases():
    cfg = load_config("appendixD")
    out = apply_overrides(cfg, ["kernels.rho=0.3", "weights.alpha=0.04", "run.seed=9"])
    assert out.kernels.rho == 0.3
    assert out.weights.gamma == pytest.approx(0.03)
    assert out.run.seed == 9
    st = cfg.with_overrides({"weights.stubbornness": 0.5})
    assert st.weights.beta == 0.93 and st.weights.delta == pytest.approx(0.5)


@pytest.mark.parametrize("raw,path", [
    ({"kernels": {"visibility": {"rho": -1}}}, "rho"),
    ({"weights": {"alpha": 0.5, "beta": 0.6}}, "weights"),
    ({"population": {"n_users": 0}}, "population.n_users"),
    ({"space": {"dims": 0}}, "dims"),
])
def test_invalid_configs_rejected(raw, path):
    with pytest.raises(ConfigError, match=path):
        from_dict(raw)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_config("/nonexistent/cfg.json")


def test_bad_override_syntax():
    with pytest.raises(ConfigError):
        apply_overrides(load_config("default"), ["kernels.rho"])
