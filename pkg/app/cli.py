"""
Command-line runner: `python -m app.cli <subcommand> [--config file.toml] ...`

Exit codes: 0 every check passed, 1 a check failed, 2 input error, 3 numeric error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from app.enums.lab_enums import CommandEnum, OutputFormatEnum
from app.experiments.reporting import write_result
from app.experiments.runners import run_experiment
from app.lab.errors import LabInputError, LabNumericError, SingularMeasureError
from app.lab.presets import preset_catalog
from app.schemas.config import ExperimentConfig, load_config, parse_config
from app.settings import DEFAULT_OUT_DIR, DEFAULT_SEED, DEFAULT_WORKERS

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_NUMERIC_ERROR = 3

COMMAND_HELP = {
    CommandEnum.COMPARE: "rs_gap grids of the comparison inequality",
    CommandEnum.DISTORTION: "volume distortion against its comparison bound",
    CommandEnum.TRANSPORT: "optimal transport between two measures",
    CommandEnum.CHECK_ENTROPY_CONVEXITY: "entropy convexity inequality along a Wasserstein geodesic",
    CommandEnum.PROBE_CURVATURE: "midpoint-entropy curvature probe",
    CommandEnum.VOLUME_GROWTH: "volume growth bound",
    CommandEnum.SUITE: "the built-in acceptance battery",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML experiment config")
    common.add_argument("--out-dir", type=Path, default=Path(DEFAULT_OUT_DIR), help="Report directory")
    common.add_argument("--seed", type=int, help="Override the config seed")
    common.add_argument("--workers", type=int, help="Override the config worker count")
    common.add_argument("--tolerance-scale", type=float, help="Multiply every pass/fail tolerance")
    common.add_argument("--format", choices=[f.value for f in OutputFormatEnum], default=OutputFormatEnum.CSV.value,
                        help="csv: JSON report plus CSV tables; json: one JSON file")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(prog="ricci-lab", description="Numerical lab for Ricci lower bounds")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command, help_text in COMMAND_HELP.items():
        subparsers.add_parser(command.value, parents=[common], help=help_text)

    presets = subparsers.add_parser("list-presets", help="List model and measure presets")
    presets.add_argument("--json", action="store_true", help="Machine-readable catalog")
    return parser


def configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """
    Flags win over the config file, the config file wins over environment defaults.
    """
    if args.config is not None:
        data = load_config(args.config).dict()
        if data["command"] != args.command:
            logger.warning(f"Config command '{data['command'].value}' ignored; running '{args.command}'")
    else:
        data = {"seed": DEFAULT_SEED, "workers": DEFAULT_WORKERS}
    data["command"] = args.command
    for name in ("seed", "workers", "tolerance_scale"):
        value = getattr(args, name)
        if value is not None:
            data[name] = value
    return parse_config(data)


def print_catalog(as_json: bool) -> None:
    catalog = preset_catalog()
    if as_json:
        print(json.dumps(catalog, sort_keys=True, indent=2))
        return
    print("Models:")
    for model in catalog["models"]:
        print(f"  {model['name']:<24} {model['description']}")
    print("Measures:")
    for measure in catalog["measures"]:
        print(f"  {measure['name']:<24} {measure['description']}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-presets":
        print_catalog(args.json)
        return EXIT_PASS

    configure_logging(args.verbose)
    try:
        config = resolve_config(args)
        result = run_experiment(config)
        paths = write_result(result, args.out_dir, OutputFormatEnum(args.format))
    except (LabInputError, SingularMeasureError) as e:
        print(f"❌ Input error: {str(e)}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except LabNumericError as e:
        print(f"❌ Numeric error: {str(e)}", file=sys.stderr)
        return EXIT_NUMERIC_ERROR

    for path in paths:
        logger.info(f"Wrote {path}")
    if result.passed:
        print(f"✅ {config.command.value} passed ({len(paths)} files in {args.out_dir})")
    else:
        print(f"❌ {config.command.value} failed ({len(paths)} files in {args.out_dir})")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
