"""CSV tables and JSON reports written by the command-line runs."""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Iterable, Mapping, Sequence
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np


class _CsvWriterImpl:
    """Renders rows of scalars, floats in round-trip precision and an empty cell for None."""

    def __init__(self, header: Sequence[str]) -> None:
        self.buffer = io.StringIO()
        self.writer = csv.writer(self.buffer, lineterminator="\n")
        self.width = len(header)
        self.writer.writerow(header)

    def visit_value(self, value: object) -> str:
        if value is None:
            return ""
        if isinstance(value, Enum):
            return self.visit_value(value.value)
        if isinstance(value, (bool, np.bool_)):
            return "1" if value else "0"
        if isinstance(value, (int, np.integer)):
            return str(int(value))
        if isinstance(value, (float, np.floating)):
            return repr(float(value))
        return str(value)

    def visit_row(self, row: Sequence[object]) -> None:
        if len(row) != self.width:
            msg = f"row of {len(row)} cells under a header of {self.width} columns"
            raise ValueError(msg)
        self.writer.writerow([self.visit_value(v) for v in row])

    @property
    def output(self) -> str:
        return self.buffer.getvalue()


def table_to_string(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    writer_impl = _CsvWriterImpl(header)
    for row in rows:
        writer_impl.visit_row(row)
    return writer_impl.output


def _to_builtin(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.ndarray):
        return [_to_builtin(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        return _to_builtin(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Mapping):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, Path):
        return value.as_posix()
    return value


def document_to_string(document: Mapping[str, Any]) -> str:
    """JSON text with sorted keys and a two-space indent.

    Numpy scalars and arrays become plain numbers and lists; non-finite floats are written as null.
    """
    return json.dumps(_to_builtin(document), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(table_to_string(header, rows), encoding="utf-8")
    return path


def write_document(path: Path, document: Mapping[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(document_to_string(document), encoding="utf-8")
    return path
