import json
from typing import Any, Dict, Optional

from fastapi import APIRouter, Depends, HTTPException, Query
from sqlalchemy.orm import Session

from app.database.connection import get_connection
from app.enums.lab_enums import CommandEnum
from app.models.experiment_report import ExperimentReport

router = APIRouter(
    prefix="/reports",
    tags=["reports"]
)


def _summary(row: ExperimentReport) -> Dict[str, Any]:
    return {
        "id": row.id,
        "command": row.command,
        "passed": row.passed,
        "exit_code": row.exit_code,
        "created_at": row.created_at.isoformat(),
    }


@router.get("")
def list_reports(
    command: Optional[CommandEnum] = None,
    passed: Optional[bool] = None,
    limit: int = Query(50, ge=1, le=500),
    offset: int = Query(0, ge=0),
    db: Session = Depends(get_connection),
) -> Dict[str, Any]:
    """
    Stored reports, newest first.
    """
    try:
        query = db.query(ExperimentReport)
        if command is not None:
            query = query.filter(ExperimentReport.command == command.value)
        if passed is not None:
            query = query.filter(ExperimentReport.passed == passed)
        total = query.count()
        rows = query.order_by(ExperimentReport.created_at.desc()).offset(offset).limit(limit).all()
        return {"count": total, "reports": [_summary(row) for row in rows]}
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Error listing reports: {str(e)}")


@router.get("/{report_id}")
def get_report(report_id: str, db: Session = Depends(get_connection)) -> Dict[str, Any]:
    row = db.query(ExperimentReport).filter(ExperimentReport.id == report_id).first()
    if row is None:
        raise HTTPException(status_code=404, detail=f"No stored report with id {report_id}")
    return {**_summary(row), "report": json.loads(row.report_json)}
