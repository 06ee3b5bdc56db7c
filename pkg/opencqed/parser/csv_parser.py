"""Readers of the CSV tables the command-line verbs take as input."""

from __future__ import annotations

import csv
import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from opencqed.exceptions import DataError, MissingDataError
from opencqed.readout.telegraph import SpinState, TelegraphTrace
from opencqed.spectra import DEFAULT_EXPOSURE_S, SampledSpectrum

logger = logging.getLogger(__name__)

SPECTRUM_COLUMNS = ("frequency_hz", "counts", "exposure_s")
TRACE_COLUMNS = ("t_s", "counts", "state_true")
LINEWIDTH_COLUMNS = ("detuning_hz", "linewidth_hz", "sigma_hz")


def read_table(path: Path, required: Sequence[str], optional: Sequence[str] = ()) -> dict[str, NDArray[np.float64]]:
    """Numeric columns of a CSV file with a header row.

    Args:
        path: the CSV file.
        required: columns that must be present.
        optional: columns read when present; an empty cell in them becomes NaN.

    Raises:
        MissingDataError: the file does not exist or has no data rows.
        DataError: a required column is absent or a cell is not a number.
    """
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except FileNotFoundError as e:
        msg = f"input file {path} does not exist"
        raise MissingDataError(msg) from e
    except OSError as e:
        msg = f"cannot read {path}: {e.strerror}"
        raise MissingDataError(msg) from e

    rows = [row for row in rows if any(cell.strip() for cell in row)]
    if len(rows) < 2:
        msg = f"{path} holds no data rows"
        raise MissingDataError(msg)

    header = [cell.strip() for cell in rows[0]]
    missing = [name for name in required if name not in header]
    if missing:
        msg = f"{path} lacks the column(s) {', '.join(missing)}"
        raise DataError(msg)

    columns: dict[str, NDArray[np.float64]] = {}
    for name in (*required, *(n for n in optional if n in header)):
        index = header.index(name)
        values = np.empty(len(rows) - 1, dtype=np.float64)
        for line, row in enumerate(rows[1:], start=2):
            cell = row[index].strip() if index < len(row) else ""
            if cell == "" and name not in required:
                values[line - 2] = np.nan
                continue
            try:
                values[line - 2] = float(cell)
            except ValueError as e:
                msg = f"{path}, line {line}: column {name} holds {cell!r}, not a number"
                raise DataError(msg) from e
        columns[name] = values
    logger.debug("read %d rows from %s", len(rows) - 1, path)
    return columns


def _as_counts(values: NDArray[np.float64], path: Path) -> NDArray[np.int64]:
    if np.any(values < 0) or np.any(values != np.round(values)):
        msg = f"{path}: counts must be non-negative integers"
        raise DataError(msg)
    return values.astype(np.int64)


def read_spectrum(path: Path) -> SampledSpectrum:
    """Counts spectrum with columns ``frequency_hz,counts`` and an optional per-point ``exposure_s``."""
    table = read_table(path, SPECTRUM_COLUMNS[:2], SPECTRUM_COLUMNS[2:])
    exposures = table.get("exposure_s")
    exposure = DEFAULT_EXPOSURE_S
    if exposures is not None and np.any(np.isfinite(exposures)):
        exposure = float(np.nanmax(exposures))
        if not np.allclose(exposures[np.isfinite(exposures)], exposure):
            msg = f"{path}: points with different exposures are not supported"
            raise DataError(msg)
    return SampledSpectrum(table["frequency_hz"], _as_counts(table["counts"], path), exposure, {"source": str(path)})


def read_trace(path: Path) -> TelegraphTrace:
    """Binned count trace with columns ``t_s,counts`` at uniform bin starts.

    An optional ``state_true`` column is turned into jumps at the bin starts where it changes.
    """
    table = read_table(path, TRACE_COLUMNS[:2], TRACE_COLUMNS[2:])
    t = table["t_s"]
    if t.size < 2:
        msg = f"{path}: a trace needs at least two bins"
        raise DataError(msg)
    steps = np.diff(t)
    bin_width = float(steps.mean())
    if not bin_width > 0 or not np.allclose(steps, bin_width, rtol=1e-6, atol=0.0):
        msg = f"{path}: bin starts must be uniformly spaced and increasing"
        raise DataError(msg)

    states = table.get("state_true")
    if states is None or not np.all(np.isfinite(states)):
        initial, jumps = SpinState.DOWN, np.empty(0, dtype=np.float64)
    else:
        initial = SpinState(int(states[0]))
        jumps = (np.flatnonzero(np.diff(states)) + 1) * bin_width
    return TelegraphTrace(initial, jumps, _as_counts(table["counts"], path), bin_width)


def read_linewidths(path: Path) -> list[tuple[float, float, float]]:
    """``(Delta, gamma_eff, sigma)`` triples in Hz for a lineshape fit."""
    table = read_table(path, LINEWIDTH_COLUMNS)
    return [
        (float(d), float(w), float(s))
        for d, w, s in zip(table["detuning_hz"], table["linewidth_hz"], table["sigma_hz"])
    ]
