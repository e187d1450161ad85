"""Output formatting helpers: provenance lines, exact-round-trip CSV, JSON."""
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__


def format_float(x):
    """17 significant digits in scientific notation (round-trips a double)."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.16e}"


def config_hash(config) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def provenance_line(config=None, units="natural"):
    return f"qmedia {__version__} config_sha256={config_hash(config or {})} units={units}"


def write_csv(path, columns, rows, provenance=None):
    """Write rows as CSV; floats use :func:`format_float`, strings verbatim."""
    lines = []
    if provenance:
        lines.append(f"# {provenance}")
    lines.append(",".join(columns))
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (float, np.floating)):
                cells.append(format_float(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path):
    """Parse a CSV written by :func:`write_csv` into ``(columns, rows)``."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    columns = lines[0].split(",")
    return columns, [ln.split(",") for ln in lines[1:]]


def _jsonable(obj):
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path, payload, provenance=None):
    data = {"provenance": provenance} if provenance else {}
    data.update(payload)
    Path(path).write_text(json.dumps(_jsonable(data), indent=2, sort_keys=False) + "\n")
