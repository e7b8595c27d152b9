"""Hierarchical horizontal codec.

Each reference dictionary code owns a contiguous slice of ``group_values``
(delimited by ``offsets``); a row stores only its index inside that slice.
String targets keep one shared heap of distinct strings and ``group_values``
holds heap indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bitpack
from .bitpack import PackedBuffer, packed_nbytes
from .model import ColumnVector, LogicalType
from .vertical import (
    DictEncoded,
    ForEncoded,
    _for_pack,
    dict_encode,
    first_occurrence_codes,
    for_nbytes,
    read_strings,
    strings_nbytes,
    write_strings,
)
from .wire import FormatError, Reader, Writer, resolve_ref

TAG_HIER = 3


@dataclass(frozen=True)
class HierEncoded:
    reference_column: str
    group_values: np.ndarray
    offsets: np.ndarray  # one start per reference code plus a terminal entry
    codes: PackedBuffer
    heap: np.ndarray | None = None  # distinct strings when the target is a string column

    tag = TAG_HIER

    @property
    def is_string(self) -> bool:
        return self.heap is not None

    @property
    def references(self) -> tuple[str, ...]:
        return (self.reference_column,)

    @property
    def group_count(self) -> int:
        return len(self.offsets) - 1

    def __len__(self) -> int:
        return self.codes.count

    @property
    def nbytes(self) -> int:
        return _nbytes(self.group_values, self.offsets, self.codes.width, self.codes.count, self.heap)

    def write(self, w: Writer, column_ids: dict[str, int]) -> None:
        w.u16(column_ids[self.reference_column])
        w.u8(1 if self.is_string else 0)
        w.u32(self.group_count)
        offsets = np.asarray(self.offsets, dtype=np.int64)
        bitpack.pack(offsets, bitpack.min_width(offsets)).write(w)
        gv = np.asarray(self.group_values, dtype=np.int64)
        if self.is_string:
            w.u32(len(self.heap))
            write_strings(w, self.heap)
            bitpack.pack(gv, bitpack.min_width(gv)).write(w)
        else:
            _for_pack(gv).write(w)
        self.codes.write(w)

    @classmethod
    def read(cls, r: Reader, names: list[str]) -> "HierEncoded":
        ref = resolve_ref(names, r.u16())
        is_string = bool(r.u8())
        groups = r.u32()
        offsets = bitpack.unpack_all(PackedBuffer.read(r)).astype(np.int64)
        if len(offsets) != groups + 1:
            raise FormatError("offsets array length does not match group count")
        heap = None
        if is_string:
            heap = read_strings(r, r.u32())
            group_values = bitpack.unpack_all(PackedBuffer.read(r)).astype(np.int64)
        else:
            group_values = ForEncoded.read(r).decode_all()
        if groups and (offsets[0] != 0 or offsets[-1] != len(group_values) or np.any(np.diff(offsets) < 0)):
            raise FormatError("malformed hierarchical offsets")
        return cls(ref, group_values, offsets, PackedBuffer.read(r), heap)

    def take(self, ref_codes, indices) -> np.ndarray:
        slots = self.offsets[np.asarray(ref_codes, dtype=np.int64)] + bitpack.unpack_many(self.codes, indices).astype(np.int64)
        vals = self.group_values[slots]
        return self.heap[vals] if self.is_string else vals

    def decode_all(self, ref_codes) -> np.ndarray:
        return self.take(ref_codes, np.arange(len(self)))


def _nbytes(group_values, offsets, code_width: int, count: int, heap) -> int:
    offsets = np.asarray(offsets)
    n_off = len(offsets)
    off_width = int(offsets.max()).bit_length() if n_off else 0
    size = 2 + 1 + 4 + 5 + packed_nbytes(off_width, n_off)
    gv = np.asarray(group_values)
    if heap is not None:
        gv_width = int(gv.max()).bit_length() if gv.size else 0
        size += 4 + strings_nbytes(heap) + 5 + packed_nbytes(gv_width, gv.size)
    else:
        size += for_nbytes(gv.size, int(gv.min()), int(gv.max())) if gv.size else 13
    return size + 5 + packed_nbytes(code_width, count)


def _ref_codes(reference) -> tuple[np.ndarray, int, str | None]:
    if isinstance(reference, ColumnVector):
        enc = dict_encode(reference)
        return enc.codes_at(np.arange(len(enc))), len(enc.distinct_values), reference.name
    if isinstance(reference, DictEncoded):
        return reference.codes_at(np.arange(len(reference))), len(reference.distinct_values), None
    raise TypeError("reference must be a ColumnVector or a DictEncoded column")


def _build_groups(target: ColumnVector, ref_codes: np.ndarray, n_groups: int):
    """Group the distinct (reference code, target) pairs by reference code.

    Returns (group_values, offsets, row_codes, heap). Within a group, values keep
    first-occurrence order.
    """
    if len(target) != len(ref_codes):
        raise ValueError(f"length mismatch: target {len(target)} rows, reference {len(ref_codes)}")
    is_string = target.ltype is LogicalType.STRING
    distinct_t, tcode = first_occurrence_codes(target.values)
    key = ref_codes * max(len(distinct_t), 1) + tcode
    pair_keys, pair_of_row = first_occurrence_codes(key)
    pair_group = pair_keys // max(len(distinct_t), 1)
    pair_tcode = pair_keys % max(len(distinct_t), 1)
    order = np.argsort(pair_group, kind="stable")
    counts = np.bincount(pair_group, minlength=n_groups) if len(pair_group) else np.zeros(n_groups, dtype=np.int64)
    offsets = np.zeros(n_groups + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    slot_of_pair = np.empty(len(order), dtype=np.int64)
    slot_of_pair[order] = np.arange(len(order))
    within = slot_of_pair - offsets[pair_group]
    row_codes = within[pair_of_row] if len(target) else np.zeros(0, dtype=np.int64)
    sorted_tcodes = pair_tcode[order]
    if is_string:
        return sorted_tcodes, offsets, row_codes, distinct_t
    return distinct_t[sorted_tcodes].astype(np.int64), offsets, row_codes, None


def hier_encode(target: ColumnVector, reference, reference_column: str | None = None) -> HierEncoded:
    """Encode ``target`` against a dictionary-encoded ``reference``.

    ``reference`` is either the raw reference ColumnVector (dictionary-encoded
    here) or its DictEncoded form, in which case ``reference_column`` names it.
    """
    ref_codes, n_groups, name = _ref_codes(reference)
    name = reference_column or name
    if name is None:
        raise ValueError("reference_column is required when passing an encoded reference")
    group_values, offsets, row_codes, heap = _build_groups(target, ref_codes, n_groups)
    max_group = int(np.diff(offsets).max()) if n_groups else 0
    width = bitpack.min_width([max(max_group - 1, 0)])
    return HierEncoded(name, group_values, offsets, bitpack.pack(row_codes, width), heap)


def hier_decode_at(enc: HierEncoded, ref_code: int, index: int):
    slot = enc.offsets[ref_code] + bitpack.unpack_at(enc.codes, index)
    value = enc.group_values[slot]
    return enc.heap[value] if enc.is_string else int(value)


def estimate_hier_size(target: ColumnVector, reference) -> int:
    ref_codes, n_groups, _ = _ref_codes(reference)
    return hier_size_from_codes(target, ref_codes, n_groups)


def hier_size_from_codes(target: ColumnVector, ref_codes: np.ndarray, n_groups: int) -> int:
    group_values, offsets, _, heap = _build_groups(target, ref_codes, n_groups)
    max_group = int(np.diff(offsets).max()) if n_groups else 0
    return _nbytes(group_values, offsets, bitpack.min_width([max(max_group - 1, 0)]), len(target), heap)
