"""Non-hierarchical horizontal codec: per-row difference to a reference column.

Differences are re-centred on their minimum (frame of reference) and
bit-packed, so negative differences cost no sign bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bitpack
from .bitpack import PackedBuffer, packed_nbytes
from .model import ColumnVector, units_compatible
from .wire import Reader, Writer, resolve_ref

TAG_NONHIER = 2

_MASK64 = 0xFFFF_FFFF_FFFF_FFFF


def _check_pair(target: ColumnVector, reference: ColumnVector) -> None:
    if len(target) != len(reference):
        raise ValueError(f"length mismatch: {target.name} has {len(target)} rows, {reference.name} has {len(reference)}")
    if not units_compatible(target.ltype, reference.ltype):
        raise TypeError(
            f"cannot diff {target.name} ({target.ltype.name}) against {reference.name} ({reference.ltype.name})"
        )


def raw_diffs(target: ColumnVector, reference: ColumnVector) -> np.ndarray:
    _check_pair(target, reference)
    return target.values - reference.values


@dataclass(frozen=True)
class NonHierEncoded:
    reference_column: str
    diff_base: int
    diffs: PackedBuffer

    tag = TAG_NONHIER

    @property
    def width(self) -> int:
        return self.diffs.width

    @property
    def references(self) -> tuple[str, ...]:
        return (self.reference_column,)

    def __len__(self) -> int:
        return self.diffs.count

    @property
    def nbytes(self) -> int:
        return 2 + 8 + self.diffs.serialized_size

    def write(self, w: Writer, column_ids: dict[str, int]) -> None:
        w.u16(column_ids[self.reference_column])
        w.i64(self.diff_base)
        self.diffs.write(w)

    @classmethod
    def read(cls, r: Reader, names: list[str]) -> "NonHierEncoded":
        ref = resolve_ref(names, r.u16())
        return cls(ref, r.i64(), PackedBuffer.read(r))

    def take(self, reference_values: np.ndarray, indices) -> np.ndarray:
        offs = bitpack.unpack_many(self.diffs, indices) + np.uint64(self.diff_base & _MASK64)
        return (np.asarray(reference_values, dtype=np.int64).view(np.uint64) + offs).view(np.int64)

    def decode_all(self, reference_values: np.ndarray) -> np.ndarray:
        offs = bitpack.unpack_all(self.diffs) + np.uint64(self.diff_base & _MASK64)
        return (np.asarray(reference_values, dtype=np.int64).view(np.uint64) + offs).view(np.int64)


def diff_encode(target: ColumnVector, reference: ColumnVector) -> NonHierEncoded:
    diffs = raw_diffs(target, reference)
    if diffs.size == 0:
        return NonHierEncoded(reference.name, 0, bitpack.pack([], 0))
    lo, hi = int(diffs.min()), int(diffs.max())
    offsets = diffs.astype(np.uint64) - np.uint64(lo & _MASK64)
    return NonHierEncoded(reference.name, lo, bitpack.pack(offsets, (hi - lo).bit_length()))


def diff_decode_at(enc: NonHierEncoded, reference_value: int, index: int) -> int:
    v = (int(reference_value) + enc.diff_base + bitpack.unpack_at(enc.diffs, index)) & _MASK64
    return v - (1 << 64) if v >> 63 else v


def estimate_diff_size(target: ColumnVector, reference: ColumnVector) -> int:
    diffs = raw_diffs(target, reference)
    width = (int(diffs.max()) - int(diffs.min())).bit_length() if diffs.size else 0
    return 2 + 8 + 5 + packed_nbytes(width, diffs.size)
