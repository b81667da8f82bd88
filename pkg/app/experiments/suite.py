"""
The built-in acceptance battery run by the `suite` subcommand.

Each case is a partial config; seed, workers and tolerance_scale come from
the suite's own config. A case is ok when its pass flag matches the expected
one: the probe on a false curvature claim is expected to flag a violation.
"""

import logging
from typing import Any, Dict, List, Tuple

from app.enums.lab_enums import CommandEnum
from app.experiments.runners import ExperimentResult, RUNNERS
from app.schemas.config import ExperimentConfig, parse_config

logger = logging.getLogger(__name__)

HYPERBOLIC = {"kind": "hyperbolic-plane"}
EUCLIDEAN = {"kind": "euclidean-plane"}
SPHERE_CAP = {"kind": "sphere-cap"}
MILD = {"preset": "variable-warp-mild"}
STRONG = {"preset": "variable-warp-strong"}

DISC_PAIR = {"source": {"preset": "uniform-ball", "radius": 1.0}, "target": {"preset": "uniform-ball", "radius": 2.0}}
SMALL_DISC_PAIR = {"source": {"preset": "uniform-ball", "radius": 0.5},
                   "target": {"preset": "uniform-ball", "radius": 1.0}}
ANNULUS_PAIR = {"source": {"preset": "annulus", "inner": 0.25, "outer": 0.75},
                "target": {"preset": "radial-profile", "sigma": 0.5, "radius": 1.5}}
TRANSLATES = {"source": {"preset": "uniform-ball", "radius": 0.5, "center": [-1.0, 0.0], "spacing": 0.1},
              "target": {"preset": "uniform-ball", "radius": 0.5, "center": [1.0, 0.0], "spacing": 0.1}}

NEGATIVE_RICCI_MIN = {"kind": "negative-ricci-min"}


def _constant(value: float) -> Dict[str, Any]:
    return {"kind": "constant", "value": value}


# (name, partial config, expected pass flag)
SUITE_CASES: List[Tuple[str, Dict[str, Any], bool]] = [
    ("rs-gap-grid", {"command": "compare"}, True),
    ("distortion-euclidean", {"command": "distortion", "model": EUCLIDEAN}, True),
    ("distortion-hyperbolic", {"command": "distortion", "model": HYPERBOLIC}, True),
    ("distortion-sphere-cap", {"command": "distortion", "model": SPHERE_CAP}, True),
    ("distortion-lemma-variable-warp", {"command": "distortion", "model": MILD,
                                        "distortion": {"richardson": False}}, True),
    ("transport-euclidean-discs-exact", {"command": "transport", "model": EUCLIDEAN, **DISC_PAIR}, True),
    ("transport-euclidean-discs-sinkhorn", {"command": "transport", "model": EUCLIDEAN, **DISC_PAIR,
                                            "transport": {"method": "sinkhorn"}}, True),
    ("convexity-hyperbolic-discs", {"command": "check-entropy-convexity", "model": HYPERBOLIC,
                                    "curvature": _constant(1.0), **DISC_PAIR,
                                    "convexity": {"refinement": [1, 2, 4]}}, True),
    ("convexity-euclidean-translates", {"command": "check-entropy-convexity", "model": EUCLIDEAN,
                                        "curvature": _constant(0.0), **TRANSLATES,
                                        "convexity": {"realization": "discrete", "tolerance": 1e-6}}, True),
    ("convexity-variable-warp-mild", {"command": "check-entropy-convexity", "model": MILD,
                                      "curvature": NEGATIVE_RICCI_MIN, **SMALL_DISC_PAIR,
                                      "convexity": {"refinement": [1, 4]}}, True),
    ("convexity-variable-warp-strong", {"command": "check-entropy-convexity", "model": STRONG,
                                        "curvature": NEGATIVE_RICCI_MIN, **ANNULUS_PAIR,
                                        "convexity": {"refinement": [1, 4]}}, True),
    ("probe-hyperbolic", {"command": "probe-curvature", "model": HYPERBOLIC, "curvature": _constant(1.0)}, True),
    ("probe-false-claim", {"command": "probe-curvature", "model": STRONG, "curvature": _constant(1.0)}, False),
    ("growth-euclidean", {"command": "volume-growth", "model": EUCLIDEAN, "curvature": _constant(0.0)}, True),
    ("growth-hyperbolic-eps-1", {"command": "volume-growth", "model": HYPERBOLIC, "curvature": _constant(1.0),
                                 "growth": {"eps": 1.0, "C": 1.0, "jensen_R": 3.0}}, True),
    ("growth-hyperbolic-eps-half", {"command": "volume-growth", "model": HYPERBOLIC, "curvature": _constant(1.0),
                                    "growth": {"eps": 0.5}}, True),
    ("growth-variable-warp", {"command": "volume-growth", "model": MILD, "curvature": NEGATIVE_RICCI_MIN,
                              "growth": {"eps": 0.25, "R_grid": [0.5, 1.0, 1.5, 2.0], "jensen_R": 1.5}}, True),
]


def case_config(suite_config: ExperimentConfig, partial: Dict[str, Any]) -> ExperimentConfig:
    data = {**partial, "seed": suite_config.seed, "workers": suite_config.workers,
            "tolerance_scale": suite_config.tolerance_scale}
    return parse_config(data)


def run_suite(config: ExperimentConfig) -> ExperimentResult:
    cases, rows = {}, []
    all_ok = True
    for name, partial, expected in SUITE_CASES:
        case = case_config(config, partial)
        result = RUNNERS[case.command](case)
        ok = result.passed == expected
        all_ok = all_ok and ok
        print(f"{'✅' if ok else '❌'} {name}: pass={result.passed} (expected {expected})")
        cases[name] = {"expected_pass": expected, "ok": ok, "report": result.report}
        rows.append({"case": name, "command": case.command.value, "expected_pass": expected,
                     "pass": result.passed, "ok": ok})
    report = {
        "schema_version": config.schema_version,
        "command": CommandEnum.SUITE.value,
        "seed": config.seed,
        "tolerance_scale": config.tolerance_scale,
        "cases": cases,
        "pass": all_ok,
    }
    logger.info(f"Suite finished: {sum(row['ok'] for row in rows)}/{len(rows)} cases ok")
    return ExperimentResult(CommandEnum.SUITE, all_ok, report, {"suite": rows})
