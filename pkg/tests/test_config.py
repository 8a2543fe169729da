from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from cellval.config import RunConfig, build_config, load_config_file
from cellval.errors import ConfigError


def test_defaults_and_command_ratio():
    assert RunConfig().effective_feature_ratio == 0.5
    assert RunConfig(command="backdoor").effective_feature_ratio == 0.25
    assert RunConfig(command="backdoor", feature_ratio=0.5).effective_feature_ratio == 0.5


@pytest.mark.parametrize("key,value", [("feature_ratio", 1.5), ("trees", 0), ("tail_prob", 0.5),
                                       ("budgets", [0.5, 0.1]), ("score_fn", "f1"),
                                       ("weak_learner", "svm"), ("row_ratio", 1.0),
                                       ("seed", -1), ("budgets", ["x"]), ("trees", 2.5)])
def test_invalid_values_name_the_field(key, value):
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_mapping({key: value})
    assert exc.value.field == key


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_mapping({"tress": 10})
    assert exc.value.field == "tress"


def test_file_then_flags(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("trees: 10\nseed: 3\nbudgets: [0, 0.5, 1]\n")
    cfg = build_config("fix", p, {"seed": 9, "feature_ratio": None})
    assert (cfg.trees, cfg.seed, cfg.budgets) == (10, 9, (0.0, 0.5, 1.0))
    j = tmp_path / "c.json"
    j.write_text(json.dumps({"trees": 7}))
    assert build_config("value", j, {}).trees == 7


def test_file_for_other_command(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("command: fix\n")
    with pytest.raises(ConfigError):
        build_config("value", p, {})


def test_bad_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "missing.yaml")
    (tmp_path / "list.yaml").write_text("- 1\n")
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "list.yaml")


@given(st.integers(1, 5000), st.floats(0.01, 1.0), st.sampled_from(["tree", "logistic"]),
       st.integers(0, 2**63), st.lists(st.floats(0, 1), min_size=1, max_size=5))
def test_round_trip(trees, ratio, learner, seed, budgets):
    cfg = RunConfig(trees=trees, feature_ratio=ratio, weak_learner=learner, seed=seed,
                    budgets=tuple(sorted(budgets)))
    echoed = json.loads(json.dumps(cfg.to_dict()))
    assert RunConfig.from_mapping(echoed) == cfg
