#!/usr/bin/env python3
"""
配置加载测试
"""

import pytest

from src.config import (
    Config,
    load_config,
    parse_float_list,
    parse_int_list,
    parse_pairs,
)
from src.exceptions import InvalidArgumentError

ENV_KEYS = ["TGNS_LOG_LEVEL", "TGNS_LOG_FILE", "TGNS_OUTPUT_DIR", "TGNS_NEWTON_TOL",
            "TGNS_NEWTON_MAX_ITER", "TGNS_WORKERS", "TGNS_CACHE_DIR"]


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for key in ENV_KEYS:
        monkeypatch.delenv(key, raising=False)


def test_parse_pairs():
    assert parse_pairs("6:20, 8:26") == [(6, 20), (8, 26)]
    assert parse_pairs([[10, 30]]) == [(10, 30)]
    for bad in ["6-20", "6:20:3", "0:10", ""]:
        with pytest.raises(InvalidArgumentError):
            parse_pairs(bad)


def test_parse_lists():
    assert parse_int_list("8,16,32") == [8, 16, 32]
    assert parse_float_list("1/40,0.0125") == pytest.approx([0.025, 0.0125])
    with pytest.raises(InvalidArgumentError):
        parse_int_list("8,x")
    with pytest.raises(InvalidArgumentError):
        parse_float_list("0.1,-0.2")
    for bad in ["1/0", "1/x", "abc"]:
        with pytest.raises(InvalidArgumentError):
            parse_float_list(bad)


def test_default_config_file():
    config = load_config()
    assert config.experiment1.pairs == [(6, 20), (8, 26), (10, 32), (12, 36)]
    assert config.experiment1.nu == pytest.approx(0.05)
    assert config.experiment2.reference_n_subdiv == 40
    assert config.stokes_mms.levels == [8, 16, 32]
    assert config.temporal.reference_dt == pytest.approx(1 / 320)
    assert config.numerics.assembly_degree == 8


def test_env_overrides(monkeypatch):
    monkeypatch.setenv("TGNS_LOG_LEVEL", "DEBUG")
    monkeypatch.setenv("TGNS_NEWTON_TOL", "1e-8")
    monkeypatch.setenv("TGNS_WORKERS", "3")
    monkeypatch.setenv("TGNS_CACHE_DIR", "/tmp/ref-cache")
    config = Config()
    assert config.logging.level == "DEBUG"
    assert config.numerics.newton_tol == pytest.approx(1e-8)
    assert config.experiment1.workers == 3
    assert config.experiment2.cache_dir == "/tmp/ref-cache"


def test_custom_file(tmp_path):
    path = tmp_path / "custom.yaml"
    path.write_text(
        "experiment1:\n  pairs: [[4, 12], [5, 15]]\n  dt: 0.02\n"
        "temporal:\n  dts: \"1/10,1/20\"\n",
        encoding="utf-8")
    config = Config(str(path))
    assert config.experiment1.pairs == [(4, 12), (5, 15)]
    assert config.experiment1.dt == pytest.approx(0.02)
    assert config.experiment1.t_final == pytest.approx(0.5)
    assert config.temporal.dts == pytest.approx([0.1, 0.05])
    assert config.to_dict()["experiment1"]["pairs"] == [[4, 12], [5, 15]]


def test_bad_files(tmp_path):
    with pytest.raises(InvalidArgumentError):
        Config(str(tmp_path / "missing.yaml"))
    broken = tmp_path / "broken.yaml"
    broken.write_text("numerics: [1, 2\n", encoding="utf-8")
    with pytest.raises(InvalidArgumentError):
        Config(str(broken))
    scalar = tmp_path / "scalar.yaml"
    scalar.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(InvalidArgumentError):
        Config(str(scalar))
