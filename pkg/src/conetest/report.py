import csv
import io
import json
import logging
import math
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


def to_plain(obj):
    """Convert numpy scalars and arrays to plain Python values, recursively."""
    if obj is None or isinstance(obj, (str, bool, int)):
        return obj
    if isinstance(obj, float):
        return obj
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (list, tuple)):
        return [to_plain(item) for item in obj]
    if isinstance(obj, dict):
        return {k: to_plain(v) for k, v in obj.items()}
    if hasattr(obj, "to_dict"):
        return to_plain(obj.to_dict())
    return obj


def _json_float(value):
    """JSON has no inf/nan; they are written as strings."""
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, list):
        return [_json_float(v) for v in value]
    if isinstance(value, dict):
        return {k: _json_float(v) for k, v in value.items()}
    return value


def _fieldnames(rows):
    names = []
    for row in rows:
        for key in row:
            if key not in names:
                names.append(key)
    return names


def rows_to_csv(rows) -> str:
    """CSV text with the union of row keys as header; nested values are JSON-encoded."""
    rows = [to_plain(r) for r in rows]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=_fieldnames(rows), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in row.items()})
    return buf.getvalue()


def report_to_json(report) -> str:
    payload = {"experiment": report.experiment, "metadata": to_plain(report.metadata),
               "rows": [to_plain(r) for r in report.rows]}
    return json.dumps(_json_float(payload), indent=2)


def render_report(report, fmt: str) -> str:
    if fmt == "json":
        return report_to_json(report)
    if fmt == "csv":
        return rows_to_csv(report.rows)
    raise ValueError(f"unknown format '{fmt}'")


def write_report(report, out, fmt: str) -> Path:
    """Write the report; CSV output gets a sidecar <out>.meta.json with the metadata."""
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_report(report, fmt))
    if fmt == "csv":
        meta = path.with_name(path.name + ".meta.json")
        meta.write_text(json.dumps(_json_float(to_plain(report.metadata)), indent=2))
    logger.info("wrote %d rows to %s", len(report.rows), path)
    return path
