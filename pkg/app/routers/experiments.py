"""
Experiment router: every CLI subcommand is also a POST endpoint.

The request body is the TOML config schema as JSON; the command in the path
wins over the one in the body. Reports are cached by config hash and stored
in the experiment_reports table.
"""

import json
import logging
from typing import Any, Dict

from fastapi import APIRouter, Depends, HTTPException
from sqlalchemy.orm import Session

from app.cache import generate_cache_key, get_report_from_cache, set_report_cache
from app.database.connection import get_connection
from app.enums.lab_enums import CommandEnum
from app.experiments.reporting import to_plain
from app.experiments.runners import run_experiment
from app.lab.errors import LabError, LabInputError, LabNumericError, SingularMeasureError
from app.models.experiment_report import ExperimentReport
from app.schemas.config import ExperimentConfig, parse_config

logger = logging.getLogger(__name__)

router = APIRouter(
    prefix="/experiments",
    tags=["experiments"]
)


def config_key(config: ExperimentConfig) -> str:
    return generate_cache_key(to_plain(config.dict()))


def _store_report(db: Session, payload: Dict[str, Any]) -> None:
    row = ExperimentReport(
        id=payload["id"],
        command=payload["command"],
        passed=payload["passed"],
        exit_code=payload["exit_code"],
        report_json=json.dumps(payload["report"], sort_keys=True),
    )
    db.merge(row)
    db.commit()


@router.post("/{command}")
def run_experiment_endpoint(command: CommandEnum, config: ExperimentConfig,
                            db: Session = Depends(get_connection)) -> Dict[str, Any]:
    """
    Run one experiment and return its report and tables.
    """
    try:
        config = parse_config({**config.dict(), "command": command})
        cache_key = config_key(config)

        cached_result = get_report_from_cache(cache_key)
        if cached_result is not None:
            return cached_result

        result = run_experiment(config)
        payload = {
            "id": cache_key,
            "command": command.value,
            "passed": result.passed,
            "exit_code": result.exit_code,
            "report": to_plain(result.report),
            "tables": to_plain(result.tables),
        }
        _store_report(db, payload)
        set_report_cache(cache_key, payload)
        return payload
    except (LabInputError, SingularMeasureError) as e:
        raise HTTPException(status_code=422, detail=str(e))
    except LabNumericError as e:
        detail = {"message": str(e), "residual": e.residual}
        raise HTTPException(status_code=500, detail=detail)
    except LabError as e:
        raise HTTPException(status_code=500, detail=f"Error running {command.value}: {str(e)}")
