"""
Deterministic report writers: the same result always serialises to the same bytes.
"""

import csv
import json
import math
from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np

from app.enums.lab_enums import OutputFormatEnum
from app.experiments.runners import ExperimentResult


def to_plain(value: Any) -> Any:
    """Recursively convert numpy scalars/arrays, enums and dataclasses to JSON-ready values."""
    if isinstance(value, Enum):
        return value.value
    if is_dataclass(value) and not isinstance(value, type):
        return to_plain(asdict(value))
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def report_json(result: ExperimentResult) -> str:
    return json.dumps(to_plain(result.report), sort_keys=True, indent=2) + "\n"


def _write_table(path: Path, rows: List[Dict[str, Any]]) -> None:
    rows = [to_plain(row) for row in rows]
    fieldnames = []
    for row in rows:
        fieldnames.extend(key for key in row if key not in fieldnames)
    with path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def write_result(result: ExperimentResult, out_dir: Union[str, Path],
                 output_format: OutputFormatEnum = OutputFormatEnum.CSV) -> List[Path]:
    """
    Write <command>.json plus one CSV per table (csv format), or only the JSON
    report with the tables embedded (json format).

    Returns:
        The written paths, in a fixed order
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = result.command.value
    written = []
    output_format = OutputFormatEnum(output_format)
    if output_format == OutputFormatEnum.JSON:
        payload = {**result.report, "tables": result.tables}
        path = out_dir / f"{stem}.json"
        path.write_text(json.dumps(to_plain(payload), sort_keys=True, indent=2) + "\n")
        return [path]

    path = out_dir / f"{stem}.json"
    path.write_text(report_json(result))
    written.append(path)
    for name in sorted(result.tables):
        table_path = out_dir / f"{stem}_{name}.csv"
        _write_table(table_path, result.tables[name])
        written.append(table_path)
    return written
