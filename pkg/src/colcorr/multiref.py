"""Multi-reference codec: per-row formula codes plus an outlier store.

Reference columns are partitioned into groups; a group's value at a row is
the sum of its columns. A formula is a subset of groups (a bitmask) and
claims ``target == sum of the selected group values``. Each row stores the
code of the first kept formula that reproduces it. Rows no formula explains
keep their original value in the outlier store; their code is 0 and is never
consulted, so every code point stays available for formulas.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import bitpack
from .bitpack import PackedBuffer, packed_nbytes
from .model import ColumnVector, LogicalType
from .wire import FormatError, Reader, Writer, resolve_ref

TAG_MULTIREF = 4
MAX_GROUPS = 8
MAX_FORMULAS = 4


@dataclass(frozen=True)
class FormulaSet:
    groups: tuple[tuple[str, ...], ...]
    formulas: tuple[int, ...]  # bitmask over groups; bit g selects groups[g]

    def __post_init__(self) -> None:
        groups = tuple(tuple(g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "formulas", tuple(int(f) for f in self.formulas))
        if not groups or any(not g for g in groups):
            raise ValueError("every reference group needs at least one column")
        if len(groups) > MAX_GROUPS:
            raise ValueError(f"at most {MAX_GROUPS} groups are supported")
        if not 1 <= len(self.formulas) <= MAX_FORMULAS:
            raise ValueError(f"need between 1 and {MAX_FORMULAS} formulas")
        if len(set(self.formulas)) != len(self.formulas):
            raise ValueError("formulas must be pairwise distinct")
        for f in self.formulas:
            if not 0 < f < (1 << len(groups)):
                raise ValueError(f"formula mask {f} does not select a valid group subset")

    @property
    def code_width(self) -> int:
        return bitpack.min_width([len(self.formulas) - 1])

    @property
    def columns(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for g in self.groups:
            for c in g:
                seen.setdefault(c)
        return tuple(seen)

    def label(self, mask: int) -> str:
        return "+".join(string.ascii_uppercase[g] for g in range(len(self.groups)) if mask >> g & 1)

    @property
    def labels(self) -> list[str]:
        return [self.label(f) for f in self.formulas]

    @property
    def nbytes(self) -> int:
        return 1 + sum(1 + 2 * len(g) for g in self.groups) + 1 + len(self.formulas)

    def write(self, w: Writer, column_ids: dict[str, int]) -> None:
        w.u8(len(self.groups))
        for g in self.groups:
            w.u8(len(g))
            for c in g:
                w.u16(column_ids[c])
        w.u8(len(self.formulas))
        for f in self.formulas:
            w.u8(f)

    @classmethod
    def read(cls, r: Reader, names: list[str]) -> "FormulaSet":
        groups = []
        for _ in range(r.u8()):
            groups.append(tuple(resolve_ref(names, r.u16()) for _ in range(r.u8())))
        formulas = tuple(r.u8() for _ in range(r.u8()))
        try:
            return cls(tuple(groups), formulas)
        except ValueError as exc:
            raise FormatError(str(exc)) from exc


@dataclass(frozen=True)
class OutlierStore:
    indices: np.ndarray  # strictly increasing row ids, stored as u32
    values: np.ndarray  # original int64 values

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.int64)
        if idx.shape != vals.shape:
            raise ValueError("outlier indices and values must be parallel")
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise ValueError("outlier indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def nbytes(self) -> int:
        return 4 + 12 * len(self.indices)

    def lookup(self, index: int) -> int | None:
        pos = int(np.searchsorted(self.indices, index))
        if pos < len(self.indices) and self.indices[pos] == index:
            return int(self.values[pos])
        return None


def group_sums(columns: Mapping[str, np.ndarray], groups: Sequence[Sequence[str]]) -> np.ndarray:
    """Row-wise group values, shape (len(groups), n)."""
    rows = []
    for g in groups:
        total = None
        for c in g:
            v = np.asarray(columns[c], dtype=np.int64)
            total = v.copy() if total is None else total + v
        rows.append(total)
    return np.vstack(rows) if rows else np.zeros((0, 0), dtype=np.int64)


def formula_values(sums: np.ndarray, mask: int) -> np.ndarray:
    out = np.zeros(sums.shape[1], dtype=np.int64)
    for g in range(sums.shape[0]):
        if mask >> g & 1:
            out += sums[g]
    return out


def _columns_of(cols) -> dict[str, np.ndarray]:
    if isinstance(cols, Mapping):
        return {k: v.values if isinstance(v, ColumnVector) else np.asarray(v) for k, v in cols.items()}
    return {c.name: c.values for c in cols}


def _target_values(target) -> np.ndarray:
    if isinstance(target, ColumnVector):
        if target.ltype is LogicalType.STRING:
            raise TypeError("multi-reference encoding needs an integer target")
        return target.values
    return np.asarray(target, dtype=np.int64)


def select_formulas(
    target,
    groups: Sequence[Sequence[str]],
    columns,
    max_formulas: int = MAX_FORMULAS,
) -> tuple[FormulaSet, float]:
    """Pick the ``max_formulas`` group subsets that reproduce the most rows.

    Every non-empty subset is a candidate. Kept formulas are listed in
    ascending bitmask order, so with groups (A, B, C) the codes follow
    A, A+B, A+C, A+B+C. Returns the set and the fraction of rows that none of
    the kept formulas reproduces.
    """
    if not groups or any(not g for g in groups):
        raise ValueError("need at least one non-empty reference group")
    if len(groups) > MAX_GROUPS:
        raise ValueError(f"subset enumeration is capped at {MAX_GROUPS} groups")
    if not 1 <= max_formulas <= MAX_FORMULAS:
        raise ValueError(f"max_formulas must be in [1, {MAX_FORMULAS}]")
    t = _target_values(target)
    sums = group_sums(_columns_of(columns), groups)
    if sums.shape[1] != len(t):
        raise ValueError("reference columns and target differ in length")
    masks = range(1, 1 << len(groups))
    hits = {m: formula_values(sums, m) == t for m in masks}
    counts = {m: int(h.sum()) for m, h in hits.items()}
    # most matches first; ties go to the smaller mask
    ranked = sorted(masks, key=lambda m: (-counts[m], m))
    # formulas that reproduce no row would only widen the codes
    best = [m for m in ranked[:max_formulas] if counts[m] > 0] or ranked[:1]
    kept = tuple(sorted(best))
    matched = np.zeros(len(t), dtype=bool)
    for m in kept:
        matched |= hits[m]
    rate = int((~matched).sum()) / len(t) if len(t) else 0.0
    return FormulaSet(tuple(tuple(g) for g in groups), kept), rate


@dataclass(frozen=True)
class MultiRefEncoded:
    formula_set: FormulaSet
    codes: PackedBuffer
    outliers: OutlierStore

    tag = TAG_MULTIREF

    @property
    def references(self) -> tuple[str, ...]:
        return self.formula_set.columns

    def __len__(self) -> int:
        return self.codes.count

    @property
    def outlier_rate(self) -> float:
        return len(self.outliers) / len(self) if len(self) else 0.0

    @property
    def nbytes(self) -> int:
        return self.formula_set.nbytes + self.outliers.nbytes + self.codes.serialized_size

    def write(self, w: Writer, column_ids: dict[str, int]) -> None:
        self.formula_set.write(w, column_ids)
        w.u32(len(self.outliers))
        w.array(self.outliers.indices, "<u4")
        w.array(self.outliers.values, "<i8")
        self.codes.write(w)

    @classmethod
    def read(cls, r: Reader, names: list[str]) -> "MultiRefEncoded":
        fs = FormulaSet.read(r, names)
        k = r.u32()
        idx = r.array(k, "<u4").astype(np.int64)
        vals = r.array(k, "<i8")
        try:
            outliers = OutlierStore(idx, vals)
        except ValueError as exc:
            raise FormatError(str(exc)) from exc
        return cls(fs, PackedBuffer.read(r), outliers)

    def take(self, sums: np.ndarray, indices) -> np.ndarray:
        """Decode rows ``indices`` given ``sums`` = group values at those rows, shape (groups, k)."""
        idx = np.asarray(indices, dtype=np.int64)
        codes = bitpack.unpack_many(self.codes, idx).astype(np.int64)
        out = np.zeros(len(idx), dtype=np.int64)
        for code, mask in enumerate(self.formula_set.formulas):
            rows = codes == code
            if rows.any():
                out[rows] = formula_values(sums[:, rows], mask)
        if len(self.outliers) and len(idx):
            # binary search of every requested row in the sorted outlier ids
            pos = np.searchsorted(self.outliers.indices, idx)
            pos_c = np.minimum(pos, len(self.outliers) - 1)
            hit = self.outliers.indices[pos_c] == idx
            out[hit] = self.outliers.values[pos_c[hit]]
        return out

    def decode_all(self, sums: np.ndarray) -> np.ndarray:
        return self.take(sums, np.arange(len(self)))


def multiref_encode(target, columns, formula_set: FormulaSet) -> MultiRefEncoded:
    t = _target_values(target)
    sums = group_sums(_columns_of(columns), formula_set.groups)
    if sums.shape[1] != len(t):
        raise ValueError("reference columns and target differ in length")
    codes = np.zeros(len(t), dtype=np.int64)
    assigned = np.zeros(len(t), dtype=bool)
    for code, mask in enumerate(formula_set.formulas):
        hit = (formula_values(sums, mask) == t) & ~assigned
        codes[hit] = code
        assigned |= hit
    out_idx = np.flatnonzero(~assigned)
    if len(t) > 0xFFFF_FFFF:
        raise ValueError("outlier row ids must fit in 32 bits")
    return MultiRefEncoded(
        formula_set,
        bitpack.pack(codes, formula_set.code_width),
        OutlierStore(out_idx, t[out_idx]),
    )


def multiref_decode_at(enc: MultiRefEncoded, group_sums_at_row: Sequence[int], index: int) -> int:
    if not 0 <= index < len(enc):
        raise IndexError(f"row {index} out of range for {len(enc)} rows")
    stored = enc.outliers.lookup(index)
    if stored is not None:
        return stored
    mask = enc.formula_set.formulas[bitpack.unpack_at(enc.codes, index)]
    return sum(int(s) for g, s in enumerate(group_sums_at_row) if mask >> g & 1)


def estimate_multiref_size(target, columns, formula_set: FormulaSet) -> tuple[int, float]:
    """Exact encoded size and outlier rate, without packing."""
    t = _target_values(target)
    sums = group_sums(_columns_of(columns), formula_set.groups)
    matched = np.zeros(len(t), dtype=bool)
    for mask in formula_set.formulas:
        matched |= formula_values(sums, mask) == t
    k = int((~matched).sum())
    size = formula_set.nbytes + 4 + 12 * k + 5 + packed_nbytes(formula_set.code_width, len(t))
    return size, (k / len(t) if len(t) else 0.0)
