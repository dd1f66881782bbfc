import json
import math

import pytest

from tadpole.config import *
from tadpole.errors import ConfigError

INVALID_OVERRIDES = [
    {"beta": 1.0},
    {"L": -1.0},
    {"alpha": -0.5},
    {"nmax": 0},
    {"kmax": 0},
    {"seed_branch": "up"},
    {"out_dir": ""},
    {"nmax": 2.5},
]


def test_defaults():
    config = load_config()
    assert config == RunConfig()
    assert config.L == pytest.approx(2 * math.pi)
    assert config.kmax is None
    assert config.effective_kmax == config.nmax == 30
    params = config.graph_params()
    assert params.n2 == 400
    assert params.n1 == 6400


def test_none_overrides_are_ignored():
    config = load_config(overrides={"alpha": None, "nmax": 4})
    assert config.alpha == 1.0
    assert config.nmax == 4


def test_kmax_may_be_null():
    config = load_config(overrides={"kmax": None, "nmax": 7})
    assert config.kmax is None
    assert config.effective_kmax == 7
    assert load_config(overrides={"kmax": 3}).effective_kmax == 3
    assert RunConfig(kmax=None, nmax=7).effective_kmax == 7
    assert validate_config({"kmax": None}) == {"kmax": None}


@pytest.mark.parametrize("overrides", INVALID_OVERRIDES)
def test_invalid_overrides(overrides):
    with pytest.raises(ConfigError):
        load_config(overrides=overrides)


def test_config_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"L": 1.0, "alpha": 11.5, "x_max": 8.0, "h1": 0.01, "h2": 0.01}))
    config = load_config(path, overrides={"alpha": 2.0})
    assert (config.L, config.alpha) == (1.0, 2.0)
    assert config.graph_params().n2 == 100


@pytest.mark.parametrize("content", ["{not json", "[1, 2]"])
def test_unreadable_config_file(tmp_path, content):
    path = tmp_path / "run.json"
    path.write_text(content)
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


@pytest.mark.parametrize("overrides", [{"L": 1.0, "h2": 0.3}, {"L": 10.0}])
def test_grid_must_fit_lengths(overrides):
    config = load_config(overrides=overrides)
    with pytest.raises(ConfigError):
        config.graph_params()


def test_schema_is_closed():
    schema = config_schema()
    assert schema["title"] == "RunConfig"
    assert set(schema["properties"]) == set(RunConfig().as_dict())
