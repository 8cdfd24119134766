"""Report serialization: versioned JSON and kernel CSV files.

Floats are written with Python's shortest round-trip representation, so
reading a report back yields bit-identical values. Non-finite floats, which
JSON cannot carry, are written as the strings ``"inf"``, ``"-inf"`` and
``"nan"`` and restored on reading.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .errors import DomainError
from .spectral import KernelMatrix

SCHEMA_NAME = "heatbesov-report"
SCHEMA_VERSION = 1
_NONFINITE = {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}


def to_jsonable(obj: Any) -> Any:
    """Recursively convert dataclasses, numpy values and non-finite floats."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def from_jsonable(obj: Any) -> Any:
    """Inverse of :func:`to_jsonable` for the non-finite float markers."""
    if isinstance(obj, dict):
        return {k: from_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [from_jsonable(v) for v in obj]
    if isinstance(obj, str) and obj in _NONFINITE:
        return _NONFINITE[obj]
    return obj


def dumps_report(report: dict) -> str:
    """Canonical text of a report: sorted keys, fixed indentation, newline-terminated."""
    body = {"schema": SCHEMA_NAME, "schema_version": SCHEMA_VERSION, **report}
    return json.dumps(to_jsonable(body), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(path: str | Path, report: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_report(report))
    return path


def read_report(path: str | Path) -> dict:
    """Load a report and check its schema tag and version."""
    data = json.loads(Path(path).read_text())
    if data.get("schema") != SCHEMA_NAME:
        raise DomainError(f"{path}: not a {SCHEMA_NAME} file")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise DomainError(f"{path}: unsupported schema version {data.get('schema_version')!r}")
    return from_jsonable(data)


def write_kernels_csv(path: str | Path, kernels: Iterable[KernelMatrix]) -> Path:
    """One row ``tag, t, x, y, value`` per kernel entry."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["tag", "t", "x", "y", "value"])
        for kern in kernels:
            vals = np.asarray(kern.values)
            for x in range(vals.shape[0]):
                for y in range(vals.shape[1]):
                    out.writerow([kern.tag, repr(float(kern.scale)), x, y, repr(float(vals[x, y]))])
    return path


def read_kernels_csv(path: str | Path) -> list[KernelMatrix]:
    """Inverse of :func:`write_kernels_csv`; kernels come back in file order."""
    entries: dict[tuple[str, float], dict[tuple[int, int], float]] = {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["tag"], float(row["t"]))
            entries.setdefault(key, {})[int(row["x"]), int(row["y"])] = float(row["value"])
    kernels = []
    for (tag, t), cells in entries.items():
        size = 1 + max(max(x, y) for x, y in cells)
        vals = np.zeros((size, size))
        for (x, y), v in cells.items():
            vals[x, y] = v
        kernels.append(KernelMatrix(vals, t, tag))
    return kernels
