from pathlib import Path

import pytest

from app.enums.lab_enums import CommandEnum, ModelKindEnum, RealizationEnum
from app.lab.errors import ConfigError
from app.schemas.config import MAX_SEED, ExperimentConfig, load_config, parse_config

GROWTH_TOML = """
command = "volume-growth"
seed = 7

[model]
kind = "euclidean-plane"

[curvature]
kind = "constant"
value = 0.0

[growth]
eps = 0.5
R_grid = [1.0, 2.0]
"""


def test_defaults():
    config = ExperimentConfig()
    assert config.command == CommandEnum.COMPARE
    assert config.model.kind == ModelKindEnum.HYPERBOLIC_PLANE
    assert config.source.radius == 1.0
    assert config.target.radius == 2.0
    assert config.convexity.realization == RealizationEnum.RADIAL
    assert config.probe.beta_ratio == 0.1


def test_load_config(tmp_path):
    path = tmp_path / "growth.toml"
    path.write_text(GROWTH_TOML)
    config = load_config(path)
    assert config.command == CommandEnum.VOLUME_GROWTH
    assert config.seed == 7
    assert config.model.kind == ModelKindEnum.EUCLIDEAN_PLANE
    assert config.growth.R_grid == [1.0, 2.0]
    assert config.growth.jensen_R is None


def test_toml_syntax_errors_carry_a_position(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("seed = 1\ncommand = \n")
    with pytest.raises(ConfigError) as excinfo:
        load_config(path)
    assert excinfo.value.location.startswith("line 2, column")
    assert str(excinfo.value).startswith("line 2, column")


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(tmp_path / "absent.toml")


@pytest.mark.parametrize("data, location", [
    ({"growth": {"eps": -1.0}}, "field growth.eps"),
    ({"probe": {"beta_ratio": 0.2}}, "field probe.beta_ratio"),
    ({"model": {"kind": "torus"}}, "field model.kind"),
    ({"convexity": {"t_grid": [0.5, 1.5]}}, "field convexity.t_grid"),
    ({"schema_version": 2}, "field schema_version"),
    ({"seed": -1}, "field seed"),
    ({"seed": MAX_SEED + 1}, "field seed"),
    ({"workers": 0}, "field workers"),
    ({"source": {"center": [0.0, 0.0, 0.0]}}, "field source.center"),
])
def test_schema_errors_name_the_field(data, location):
    with pytest.raises(ConfigError) as excinfo:
        parse_config(data)
    assert excinfo.value.location == location


def test_seed_range():
    assert parse_config({"seed": MAX_SEED}).seed == MAX_SEED


def test_missing_table_file(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        parse_config({"source": {"preset": "table", "table": str(tmp_path / "missing.txt")}})
    assert excinfo.value.location == "field source.table"


@pytest.mark.parametrize("path", sorted((Path(__file__).parents[1] / "configs").glob("*.toml")), ids=lambda p: p.stem)
def test_example_configs_load(path):
    config = load_config(path)
    assert config.command != CommandEnum.COMPARE
