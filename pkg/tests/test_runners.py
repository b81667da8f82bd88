import pytest

from app.cache import ball_volume_cache, cost_matrix_cache
from app.enums.lab_enums import CommandEnum
from app.experiments.runners import run_experiment
from app.experiments.suite import SUITE_CASES, case_config, run_suite
from app.lab.errors import LabInputError
from app.schemas.config import parse_config

EUCLIDEAN = {"kind": "euclidean-plane"}
HYPERBOLIC = {"kind": "hyperbolic-plane"}


def run(**data):
    return run_experiment(parse_config(data))


def test_distortion_closed_form():
    result = run(command="distortion", model=EUCLIDEAN, distortion={"samples": 20})
    assert result.passed
    assert result.report["check"] == "closed-form"
    assert result.report["richardson"]["observed_order"] == float("inf")
    assert len(result.tables["distortion"]) == 20
    assert set(result.report["exponent_chain"]) == {"(n-1)/n", "1-1/n", "1/n"}


def test_distortion_lemma_on_a_variable_warp():
    result = run(command="distortion", model={"preset": "variable-warp-mild"},
                 distortion={"samples": 10, "richardson": False})
    assert result.passed
    assert result.report["check"] == "distortion-lemma"
    assert result.report["min_slack"] >= -1e-8


def test_distortion_is_reproducible():
    config = {"command": "distortion", "model": HYPERBOLIC, "seed": 3, "distortion": {"samples": 5, "richardson": False}}
    assert run(**config).tables == run(**config).tables


def test_distortion_ratio_converges_at_second_order_on_hyperbolic():
    result = run(command="distortion", model=HYPERBOLIC, seed=11, distortion={"samples": 5})
    assert result.passed
    assert result.report["richardson"]["observed_order"] >= 2.0
    assert len(result.report["richardson"]["radii"]) == 4


@pytest.mark.slow
@pytest.mark.parametrize("model", [EUCLIDEAN, HYPERBOLIC, {"kind": "sphere-cap"}], ids=lambda m: m["kind"])
def test_distortion_matches_closed_form_on_500_triples(model):
    result = run(command="distortion", model=model, distortion={"samples": 500})
    assert result.passed
    assert result.report["check"] == "closed-form"
    assert len(result.tables["distortion"]) == 500
    assert result.report["max_rel_err"] < 1e-6


@pytest.mark.slow
def test_distortion_lemma_on_500_triples():
    result = run(command="distortion", model={"preset": "variable-warp-mild"},
                 distortion={"samples": 500, "richardson": False})
    assert result.passed
    assert len(result.tables["distortion"]) == 500
    assert result.report["min_slack"] >= -1e-8


def test_transport_exact_and_radial():
    discs = {"source": {"radius": 1.0}, "target": {"radius": 2.0}}
    result = run(command="transport", model=EUCLIDEAN, grid={"n_r": 64, "n_theta": 8},
                 transport={"n_r": 8, "n_theta": 8, "tolerance": 0.02, "export_plan": True}, **discs)
    assert result.passed
    assert result.report["radial_w2_sq"] == pytest.approx(0.5, rel=1e-8)
    assert result.report["w2_sq"] == pytest.approx(0.5, rel=0.02)
    assert result.tables["plan"]

    radial = run(command="transport", model=EUCLIDEAN, grid={"n_r": 64, "n_theta": 8},
                 transport={"method": "radial"}, **discs)
    assert radial.report["w2"] == pytest.approx(0.5 ** 0.5, rel=1e-8)


def test_radial_transport_needs_symmetric_measures():
    lattices = {"source": {"radius": 0.5, "center": [-1.0, 0.0]}, "target": {"radius": 0.5, "center": [1.0, 0.0]}}
    with pytest.raises(LabInputError):
        run(command="transport", model=EUCLIDEAN, transport={"method": "radial"}, **lattices)


def test_convexity_runner():
    result = run(command="check-entropy-convexity", model=HYPERBOLIC, curvature={"kind": "constant", "value": 1.0},
                 grid={"n_r": 32, "n_theta": 8}, convexity={"t_grid": [0.25, 0.5, 0.75], "refinement": [1, 2]})
    assert result.passed
    assert [run_["refinement"] for run_ in result.report["runs"]] == [1, 2]
    assert result.report["runs"][1]["grid_resolution"] == [64, 16]
    assert len(result.tables["convexity"]) == 6
    assert result.tables["jacobian_concavity"]


def test_discrete_convexity_runner():
    lattices = {"source": {"radius": 0.5, "center": [-1.0, 0.0], "spacing": 0.1},
                "target": {"radius": 0.5, "center": [1.0, 0.0], "spacing": 0.1}}
    result = run(command="check-entropy-convexity", model=EUCLIDEAN, curvature={"kind": "constant", "value": 0.0},
                 convexity={"realization": "discrete", "t_grid": [0.5], "refinement": [1, 2]}, **lattices)
    assert result.passed
    assert len(result.report["runs"]) == 1
    assert "jacobian_concavity" not in result.tables


def test_probe_runner():
    result = run(command="probe-curvature", model=EUCLIDEAN, curvature={"kind": "constant", "value": 0.0},
                 probe={"radii": [0.4, 0.2], "directions": 2})
    assert result.passed
    assert len(result.tables["probe"]) == 4
    assert result.report["intercept"] == pytest.approx(0.0, abs=1e-6)


def test_growth_runner_with_jensen_step():
    result = run(command="volume-growth", model=EUCLIDEAN, curvature={"kind": "constant", "value": 0.0},
                 growth={"eps": 1.0, "R_grid": [2.0, 4.0], "C": 0.5, "jensen_R": 3.0})
    assert result.passed
    assert result.report["jensen"]["min_slack"] >= -1e-6
    assert [row["R"] for row in result.tables["growth"]] == [2.0, 4.0]
    assert len(result.tables["jensen"]) == 5


def test_runners_fill_the_numeric_caches():
    discs = {"source": {"radius": 1.0}, "target": {"radius": 2.0}}
    run(command="transport", model=EUCLIDEAN, grid={"n_r": 16, "n_theta": 8},
        transport={"method": "sinkhorn", "n_r": 4, "n_theta": 4}, **discs)
    assert len(cost_matrix_cache) == 1
    run(command="volume-growth", model=EUCLIDEAN, curvature={"kind": "constant", "value": 0.0},
        growth={"eps": 1.0, "R_grid": [2.0, 4.0]})
    assert len(ball_volume_cache) == 3


def test_suite_cases_parse():
    suite = parse_config({"command": "suite", "seed": 5, "tolerance_scale": 2.0})
    assert len(SUITE_CASES) == 17
    assert [expected for _, _, expected in SUITE_CASES].count(False) == 1
    for _, partial, _ in SUITE_CASES:
        case = case_config(suite, partial)
        assert case.seed == 5
        assert case.tolerance_scale == 2.0
        assert case.command != CommandEnum.SUITE


@pytest.mark.slow
def test_suite_passes(capsys):
    result = run_suite(parse_config({"command": "suite"}))
    assert result.passed, [row for row in result.tables["suite"] if not row["ok"]]
    assert capsys.readouterr().out.count("✅") == len(SUITE_CASES)
