import ast
import json
import math
from pathlib import Path

import numpy as np
import pytest

from app.cache import (
    ball_volume_cache,
    cached_ball_volume,
    cached_cost_matrix,
    clear_preset_catalog_cache,
    generate_cache_key,
    get_preset_catalog_from_cache,
    set_preset_catalog_cache,
)
from app.enums.lab_enums import CommandEnum, OutputFormatEnum, RealizationEnum
from app.experiments.reporting import to_plain, write_result
from app.experiments.runners import ExperimentResult


def test_to_plain():
    data = {
        "realization": RealizationEnum.DISCRETE,
        "values": np.array([1.0, math.inf]),
        "flag": np.bool_(True),
        "count": np.int64(3),
        1: (np.float64(0.5), -math.inf, math.nan),
    }
    assert to_plain(data) == {
        "realization": "discrete",
        "values": [1.0, "inf"],
        "flag": True,
        "count": 3,
        "1": [0.5, "-inf", "nan"],
    }
    json.dumps(to_plain(data), allow_nan=False)


def test_write_result(tmp_path):
    result = ExperimentResult(
        CommandEnum.TRANSPORT, True, {"pass": True, "w2": 0.1 + 0.2},
        {"plan": [{"i": 0, "j": 1, "mass": 0.5}], "a_first": [{"x": 1.0}]},
    )
    paths = write_result(result, tmp_path / "out")
    assert [p.name for p in paths] == ["transport.json", "transport_a_first.csv", "transport_plan.csv"]
    # floats keep every digit
    assert "0.30000000000000004" in paths[0].read_text()
    assert paths[2].read_text() == "i,j,mass\n0,1,0.5\n"

    (only,) = write_result(result, tmp_path / "json", OutputFormatEnum.JSON)
    assert json.loads(only.read_text())["tables"]["plan"][0]["j"] == 1


def test_cache_keys_are_order_independent():
    assert generate_cache_key({"a": 1, "b": [1, 2]}) == generate_cache_key({"b": [1, 2], "a": 1})
    assert generate_cache_key({"a": 1}) != generate_cache_key({"a": 2})


def test_ball_volume_cache(euclidean):
    first = cached_ball_volume(euclidean, [0.0, 0.0], 2.0)
    assert first == pytest.approx(4.0 * math.pi)
    assert len(ball_volume_cache) == 1
    assert cached_ball_volume(euclidean, np.array([0.0, 0.0]), 2.0) == first
    assert len(ball_volume_cache) == 1


def test_cost_matrix_cache(euclidean):
    X = np.array([[0.0, 0.0], [1.0, 0.0]])
    Y = np.array([[0.0, 2.0]])
    costs = cached_cost_matrix(euclidean, X, Y)
    np.testing.assert_allclose(costs, [[4.0], [5.0]])
    assert cached_cost_matrix(euclidean, X.copy(), Y.copy()) is costs


def test_protected_preset_catalog():
    set_preset_catalog_cache({"models": [], "measures": []})
    clear_preset_catalog_cache()
    assert get_preset_catalog_from_cache() == {"models": [], "measures": []}
    clear_preset_catalog_cache(preserve_catalog=False)
    assert get_preset_catalog_from_cache() is None


def test_numeric_core_imports_no_service_modules():
    lab = Path(__file__).parents[1] / "app" / "lab"
    service = ("app.cache", "app.database", "app.experiments", "app.models", "app.routers")
    for path in sorted(lab.glob("*.py")):
        tree = ast.parse(path.read_text())
        modules = [node.module for node in ast.walk(tree) if isinstance(node, ast.ImportFrom) and node.module]
        modules += [alias.name for node in ast.walk(tree) if isinstance(node, ast.Import) for alias in node.names]
        assert not [m for m in modules if m.startswith(service)], path.name
