import json

import pytest

from mlgcn.config import DEFAULT_MENU, SCHEDULES, RunConfig, TrainConfig, load_config, parse_menu, table_menu
from mlgcn.errors import ParameterError, UsageError
from mlgcn.graph import LaplacianSpec


def test_benchmark_schedules():
    assert SCHEDULES["ucf"] == {"learning_rate": 0.0006, "decay_factor": 0.1, "decay_epoch": 100, "epochs": 150}
    assert SCHEDULES["sbu"]["learning_rate"] == 0.7 and SCHEDULES["sbu"]["epochs"] == 40
    cfg = TrainConfig()
    assert cfg.batch_size == 30 and cfg.cheb_order == 4


def test_schedule_preset_with_override():
    cfg = TrainConfig.from_dict({"schedule": "ucf", "epochs": 7})
    assert cfg.learning_rate == 0.0006 and cfg.epochs == 7
    assert cfg.learning_rate_at(100) == pytest.approx(0.00006)


def test_unknown_keys_rejected():
    with pytest.raises(ParameterError):
        TrainConfig.from_dict({"learnin_rate": 0.1})
    with pytest.raises(ParameterError):
        RunConfig.from_dict({"trian": {}})


def test_validation():
    with pytest.raises(ParameterError):
        TrainConfig(pooling="max")
    with pytest.raises(ParameterError):
        TrainConfig(learning_rate=0)


def test_round_trip():
    cfg = RunConfig(TrainConfig(epochs=3, conv_filters=(8, 4)), tuple(parse_menu([
        {"family": "random_walk", "kind": "binary_gaussian", "power": 4, "scale_multiplier": 0.01}])))
    again = RunConfig.from_dict(json.loads(cfg.to_json()))
    assert again == cfg


def test_empty_menu():
    with pytest.raises(UsageError):
        parse_menu([])


def test_load_config_errors(tmp_path):
    with pytest.raises(UsageError):
        load_config(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{\n  'x': 1\n}")
    with pytest.raises(UsageError, match="bad.json:2"):
        load_config(tmp_path / "bad.json")


def test_default_menu():
    assert DEFAULT_MENU[2] == LaplacianSpec("normalized", "binary_gaussian", 1, 1.0)


def test_table_grid_size():
    assert len(table_menu()) == 3 * 3 * 14
