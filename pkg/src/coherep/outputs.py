"""Stable on-disk formats for time series, ensembles and audit documents.

CSV files carry a header row and end with a newline.  Floats are written with
``repr``, which is the shortest string that round-trips exactly, so ``1e-17``
comes out in scientific notation and reads back to the same double.  JSON
documents are flat key to scalar mappings with sorted keys; non-finite floats
become the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
"""

from __future__ import annotations

import json
import math
from numbers import Integral, Real
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import IoError


def format_number(x) -> str:
    """Text form of a scalar for CSV output."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (Integral, np.integer)):
        return str(int(x))
    if isinstance(x, (Real, np.floating)):
        return repr(float(x) + 0.0)  # + 0.0 maps -0.0 to 0.0
    return str(x)


def _json_scalar(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (Integral, np.integer)):
        return int(x)
    if isinstance(x, (Real, np.floating)):
        x = float(x) + 0.0
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, str):
        return x
    raise TypeError(f"unsupported value {x!r} of type {type(x).__name__}")


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from exc


def csv_text(rows: Iterable[Mapping], schema: Sequence[str]) -> str:
    lines = [",".join(schema)]
    for i, row in enumerate(rows):
        if set(row) != set(schema):
            raise ValueError(f"row {i} has keys {sorted(row)} but the schema is {list(schema)}")
        lines.append(",".join(format_number(row[k]) for k in schema))
    return "\n".join(lines) + "\n"


def write_csv(path, rows: Iterable[Mapping], schema: Sequence[str]) -> None:
    """Write ``rows`` under the column order ``schema``.

    An empty ``rows`` gives a header-only file.
    """
    _write_text(Path(path), csv_text(rows, schema))


def columns_to_rows(columns: Mapping[str, np.ndarray]) -> list[dict]:
    names = list(columns)
    arrays = [np.asarray(columns[k]) for k in names]
    return [{k: a[i].item() for k, a in zip(names, arrays)} for i in range(len(arrays[0]) if arrays else 0)]


def json_text(doc: Mapping) -> str:
    flat = {str(k): _json_scalar(v) for k, v in doc.items()}
    return json.dumps(flat, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, doc: Mapping) -> None:
    """Write a flat key to number/string document with sorted keys."""
    _write_text(Path(path), json_text(doc))


def read_csv(path) -> tuple[list[str], list[list[float]]]:
    """Header and float rows of a CSV written by :func:`write_csv`."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    return header, [[float(x) for x in line.split(",")] for line in lines[1:]]
