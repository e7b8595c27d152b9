"""Logical column types, blocks and size accounting."""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from typing import Sequence

import numpy as np

BLOCK_CAPACITY = 1_000_000

_EPOCH_ORDINAL = _dt.date(1970, 1, 1).toordinal()


class LogicalType(IntEnum):
    """Logical column type; the value doubles as the on-disk type tag."""

    DATE = 0  # days since 1970-01-01, int32 range
    TIMESTAMP = 1  # seconds since epoch
    INTEGER = 2
    MONEY = 3  # integer cents
    STRING = 4

    @property
    def is_integer(self) -> bool:
        return self is not LogicalType.STRING

    @classmethod
    def parse(cls, name: str) -> "LogicalType":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown logical type {name!r}") from None


INT32_MIN, INT32_MAX = -(2**31), 2**31 - 1


def units_compatible(a: LogicalType, b: LogicalType) -> bool:
    """Two integer columns can be diffed only if they count the same unit."""
    if a is LogicalType.STRING or b is LogicalType.STRING:
        return False
    return a is b


def days_since_epoch(date: _dt.date | str) -> int:
    if isinstance(date, str):
        try:
            date = _dt.date.fromisoformat(date)
        except ValueError as exc:
            raise ValueError(f"unparseable date {date!r}") from exc
    return date.toordinal() - _EPOCH_ORDINAL


def to_civil_date(days: int) -> _dt.date:
    ordinal = int(days) + _EPOCH_ORDINAL
    if not 1 <= ordinal <= _dt.date.max.toordinal():
        raise ValueError(f"day count {days} outside the supported calendar range")
    return _dt.date.fromordinal(ordinal)


def exact_saving_rate(baseline_bytes: int | float, encoded_bytes: int | float) -> Fraction:
    if baseline_bytes <= 0:
        raise ValueError("baseline size must be positive")
    return 1 - Fraction(encoded_bytes) / Fraction(baseline_bytes)


def saving_rate(baseline_bytes: int | float, encoded_bytes: int | float) -> float:
    """Fraction of ``baseline_bytes`` saved; negative when the encoding is larger."""
    return float(exact_saving_rate(baseline_bytes, encoded_bytes))


@dataclass(frozen=True)
class SizeReport:
    column: str
    baseline_bytes: int
    encoded_bytes: int
    encoding: str = ""

    @property
    def saving_rate(self) -> float:
        return saving_rate(self.baseline_bytes, self.encoded_bytes)


def _freeze(values, ltype: LogicalType) -> np.ndarray:
    if ltype is LogicalType.STRING:
        arr = np.empty(len(values), dtype=object)
        arr[:] = list(values)
        for v in arr:
            if not isinstance(v, str):
                raise TypeError(f"string column holds non-string value {v!r}")
    else:
        arr = np.asarray(values)
        if arr.size and not np.issubdtype(arr.dtype, np.integer):
            raise TypeError(f"{ltype.name.lower()} column needs integer physical values")
        arr = arr.astype(np.int64, copy=True)
        if ltype is LogicalType.DATE and arr.size:
            if arr.min() < INT32_MIN or arr.max() > INT32_MAX:
                raise ValueError("date day counts must fit a signed 32-bit integer")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ColumnVector:
    name: str
    ltype: LogicalType
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _freeze(self.values, self.ltype))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ColumnVector):
            return NotImplemented
        return (
            self.name == other.name
            and self.ltype == other.ltype
            and len(self.values) == len(other.values)
            and bool(np.all(self.values == other.values))
        )

    __hash__ = None  # type: ignore[assignment]

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Block:
    columns: tuple[ColumnVector, ...]
    row_count: int = field(default=-1)

    def __post_init__(self) -> None:
        cols = tuple(self.columns)
        object.__setattr__(self, "columns", cols)
        n = self.row_count if self.row_count >= 0 else (len(cols[0]) if cols else 0)
        object.__setattr__(self, "row_count", n)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate column names in block: {names}")
        for c in cols:
            if len(c) != n:
                raise ValueError(f"column {c.name!r} has {len(c)} rows, block has {n}")
        if n > BLOCK_CAPACITY:
            raise ValueError(f"block of {n} rows exceeds capacity {BLOCK_CAPACITY}")

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> ColumnVector:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def __getitem__(self, name: str) -> ColumnVector:
        return self.column(name)

    def take(self, rows: Sequence[int] | np.ndarray) -> "Block":
        rows = np.asarray(rows, dtype=np.int64)
        return Block(
            tuple(ColumnVector(c.name, c.ltype, c.values[rows]) for c in self.columns),
            row_count=len(rows),
        )

    def select(self, names: Sequence[str]) -> "Block":
        return Block(tuple(self.column(n) for n in names), row_count=self.row_count)
