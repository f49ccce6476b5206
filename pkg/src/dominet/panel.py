"""Panel ingestion and standardization.

A Panel is a T x N matrix of incidence values (rows = time, columns = units).
The estimation pipeline consumes the first-differenced, column-standardized
version produced by :func:`standardize`.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError, ParseError, ValidationError


class MissingPolicy(enum.Enum):
    """What to do with unit columns that contain empty cells."""

    DROP_UNIT = "drop_unit"
    FAIL = "fail"


@dataclass(frozen=True)
class Panel:
    unit_ids: tuple[str, ...]
    time_index: tuple[str, ...]
    values: np.ndarray  # T x N

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 2 or vals.shape != (len(self.time_index), len(self.unit_ids)):
            raise ValidationError(
                f"values shape {vals.shape} does not match "
                f"T={len(self.time_index)}, N={len(self.unit_ids)}"
            )
        if len(set(self.unit_ids)) != len(self.unit_ids):
            dupes = sorted({u for u in self.unit_ids if self.unit_ids.count(u) > 1})
            raise ValidationError(f"duplicate unit ids: {dupes}")
        for a, b in zip(self.time_index, self.time_index[1:]):
            if not a < b:
                raise ValidationError(f"time index not strictly increasing at {a!r} -> {b!r}")
        if np.isnan(vals).any():
            raise ValidationError("validated Panel must contain no missing cells")

    @property
    def n_units(self) -> int:
        return len(self.unit_ids)

    @property
    def n_periods(self) -> int:
        return len(self.time_index)


@dataclass(frozen=True)
class StandardizedPanel:
    unit_ids: tuple[str, ...]
    values: np.ndarray  # (T-1) x N, each column mean 0 / sd 1
    column_means: np.ndarray
    column_sds: np.ndarray

    @property
    def n_units(self) -> int:
        return len(self.unit_ids)


@dataclass
class LoadReport:
    dropped_units: list[str] = field(default_factory=list)


def load_panel_csv(path, policy: MissingPolicy = MissingPolicy.DROP_UNIT) -> tuple[Panel, LoadReport]:
    """Read a panel CSV (header ``date,<unit>,...``; empty cell = missing).

    Returns the validated Panel plus a report of any units dropped under
    :attr:`MissingPolicy.DROP_UNIT`.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if not header or header[0].strip() != "date":
            raise ParseError(f"{path}: first column header must be 'date', got {header[:1]}")
        unit_ids = [h.strip() for h in header[1:]]
        if len(set(unit_ids)) != len(unit_ids):
            dupes = sorted({u for u in unit_ids if unit_ids.count(u) > 1})
            raise ValidationError(f"{path}: duplicate unit ids {dupes}")
        dates: list[str] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
            dates.append(row[0].strip())
            vals = []
            for col, cell in enumerate(row[1:], start=2):
                cell = cell.strip()
                if cell == "":
                    vals.append(np.nan)
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"{path}: row {lineno}, column {col}: non-numeric cell {cell!r}"
                    ) from None
            rows.append(vals)

    if not rows:
        raise ParseError(f"{path}: no data rows")
    values = np.asarray(rows, dtype=float)
    for a, b in zip(dates, dates[1:]):
        if not a < b:
            raise ValidationError(f"{path}: dates not strictly increasing at {a!r} -> {b!r}")

    report = LoadReport()
    has_gap = np.isnan(values).any(axis=0)
    if has_gap.any():
        gap_units = [u for u, g in zip(unit_ids, has_gap) if g]
        if policy is MissingPolicy.FAIL:
            raise ValidationError(f"{path}: missing cells in units {gap_units}")
        report.dropped_units = gap_units
        keep = ~has_gap
        unit_ids = [u for u, k in zip(unit_ids, keep) if k]
        values = values[:, keep]
    return Panel(tuple(unit_ids), tuple(dates), values), report


def first_difference(p: Panel) -> Panel:
    """Consecutive differences along time; drops the first date."""
    if p.n_periods < 2:
        raise ValidationError(f"need at least 2 periods to difference, have {p.n_periods}")
    return Panel(p.unit_ids, p.time_index[1:], np.diff(p.values, axis=0))


def scale_columns(p: Panel) -> StandardizedPanel:
    """Center and scale each column to mean 0, sample (T-1 divisor) sd 1."""
    means = p.values.mean(axis=0)
    sds = p.values.std(axis=0, ddof=1)
    bad = np.flatnonzero(sds == 0.0)
    if bad.size:
        names = [p.unit_ids[i] for i in bad]
        raise DegenerateDataError(f"zero-variance column(s): {names}")
    return StandardizedPanel(
        unit_ids=p.unit_ids,
        values=(p.values - means) / sds,
        column_means=means,
        column_sds=sds,
    )


def standardize(p: Panel) -> StandardizedPanel:
    """First-difference then scale, the transform feeding nodewise regressions."""
    return scale_columns(first_difference(p))


def exclude_units(p: Panel, excluded: list[str]) -> Panel:
    """Drop a user-supplied exclusion list of unit ids (unknown ids rejected)."""
    unknown = [u for u in excluded
               if u not in p.unit_ids]
    if unknown:
        raise ValidationError(f"exclusion list names unknown units: {unknown}")
    keep = [i for i, u in enumerate(p.unit_ids) if u not in set(excluded)]
    return Panel(tuple(p.unit_ids[i] for i in keep), p.time_index, p.values[:, keep])
