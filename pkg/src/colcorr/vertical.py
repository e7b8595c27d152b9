"""Single-column baseline codecs: FOR and dictionary, both bit-packed."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bitpack
from .bitpack import PackedBuffer, packed_nbytes
from .model import ColumnVector, LogicalType, SizeReport
from .wire import FormatError, Reader, Writer

TAG_FOR = 0
TAG_DICT = 1

_U64 = np.uint64


def _values_of(col) -> tuple[np.ndarray, bool]:
    if isinstance(col, ColumnVector):
        return col.values, col.ltype is LogicalType.STRING
    arr = np.asarray(col)
    is_str = arr.dtype == object or arr.dtype.kind in "US"
    if is_str:
        out = np.empty(len(arr), dtype=object)
        out[:] = [str(v) for v in arr]
        return out, True
    return arr.astype(np.int64, copy=False), False


def _range_width(lo: int, hi: int) -> int:
    return (hi - lo).bit_length()


@dataclass(frozen=True)
class ForEncoded:
    base: int
    codes: PackedBuffer

    tag = TAG_FOR

    @property
    def width(self) -> int:
        return self.codes.width

    def __len__(self) -> int:
        return self.codes.count

    @property
    def nbytes(self) -> int:
        return 8 + self.codes.serialized_size

    def write(self, w: Writer) -> None:
        w.i64(self.base)
        self.codes.write(w)

    @classmethod
    def read(cls, r: Reader) -> "ForEncoded":
        return cls(r.i64(), PackedBuffer.read(r))

    def get(self, index: int) -> int:
        return self.base + bitpack.unpack_at(self.codes, index)

    def take(self, indices) -> np.ndarray:
        return _rebase(bitpack.unpack_many(self.codes, indices), self.base)

    def decode_all(self) -> np.ndarray:
        return _rebase(bitpack.unpack_all(self.codes), self.base)


def _rebase(offsets: np.ndarray, base: int) -> np.ndarray:
    # modular uint64 arithmetic keeps full-range int64 columns exact
    return (offsets + _U64(base & 0xFFFF_FFFF_FFFF_FFFF)).view(np.int64)


def for_nbytes(count: int, lo: int, hi: int) -> int:
    return 8 + 5 + packed_nbytes(_range_width(lo, hi), count)


def _for_pack(values: np.ndarray) -> ForEncoded:
    values = np.asarray(values, dtype=np.int64)
    if values.size == 0:
        return ForEncoded(0, bitpack.pack([], 0))
    lo, hi = int(values.min()), int(values.max())
    offsets = values.astype(_U64) - _U64(lo & 0xFFFF_FFFF_FFFF_FFFF)
    return ForEncoded(lo, bitpack.pack(offsets, _range_width(lo, hi)))


def for_encode(col) -> ForEncoded:
    values, is_str = _values_of(col)
    if is_str:
        raise TypeError("FOR encoding needs an integer column")
    if values.size == 0:
        raise ValueError("cannot FOR-encode an empty column")
    return _for_pack(values)


def for_decode_at(enc: ForEncoded, index: int) -> int:
    return enc.get(index)


# -- string heap: u32 start offsets (n + 1 entries) followed by UTF-8 bytes


def strings_nbytes(strings) -> int:
    return 4 * (len(strings) + 1) + sum(len(s.encode("utf-8")) for s in strings)


def write_strings(w: Writer, strings) -> None:
    encoded = [s.encode("utf-8") for s in strings]
    offsets = np.zeros(len(encoded) + 1, dtype=np.uint64)
    offsets[1:] = np.cumsum([len(b) for b in encoded], dtype=np.uint64)
    if offsets[-1] > 0xFFFF_FFFF:
        raise ValueError("string heap exceeds 4 GiB")
    w.array(offsets, "<u4")
    w.raw(b"".join(encoded))


def read_strings(r: Reader, n: int) -> np.ndarray:
    offsets = r.array(n + 1, "<u4").astype(np.int64)
    if n and (offsets[0] != 0 or np.any(np.diff(offsets) < 0)):
        raise FormatError("string heap offsets are not monotone")
    heap = r.raw(int(offsets[-1]))
    out = np.empty(n, dtype=object)
    out[:] = [heap[offsets[i] : offsets[i + 1]].decode("utf-8") for i in range(n)]
    return out


def first_occurrence_codes(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct values in first-occurrence order and the per-row codes into them."""
    if values.size == 0:
        return values[:0], np.zeros(0, dtype=np.int64)
    uniq, first, inverse = np.unique(values, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(len(order))
    return uniq[order], rank[inverse.ravel()]


@dataclass(frozen=True)
class DictEncoded:
    distinct_values: np.ndarray
    codes: PackedBuffer
    is_string: bool

    tag = TAG_DICT

    def __len__(self) -> int:
        return self.codes.count

    def _values_nbytes(self) -> int:
        if self.is_string:
            return strings_nbytes(self.distinct_values)
        if not len(self.distinct_values):
            return 13
        return for_nbytes(len(self.distinct_values), int(self.distinct_values.min()), int(self.distinct_values.max()))

    @property
    def nbytes(self) -> int:
        return 1 + 4 + self._values_nbytes() + self.codes.serialized_size

    def write(self, w: Writer) -> None:
        w.u8(1 if self.is_string else 0)
        w.u32(len(self.distinct_values))
        if self.is_string:
            write_strings(w, self.distinct_values)
        else:
            _for_pack(self.distinct_values).write(w)
        self.codes.write(w)

    @classmethod
    def read(cls, r: Reader) -> "DictEncoded":
        is_string = bool(r.u8())
        n = r.u32()
        if is_string:
            distinct = read_strings(r, n)
        else:
            packed = ForEncoded.read(r)
            if len(packed) != n:
                raise FormatError("dictionary value count mismatch")
            distinct = packed.decode_all()
        codes = PackedBuffer.read(r)
        return cls(distinct, codes, is_string)

    def code_at(self, index: int) -> int:
        return bitpack.unpack_at(self.codes, index)

    def codes_at(self, indices) -> np.ndarray:
        return bitpack.unpack_many(self.codes, indices).astype(np.int64)

    def get(self, index: int):
        v = self.distinct_values[self.code_at(index)]
        return v if self.is_string else int(v)

    def take(self, indices) -> np.ndarray:
        return self.distinct_values[self.codes_at(indices)]

    def decode_all(self) -> np.ndarray:
        return self.distinct_values[bitpack.unpack_all(self.codes).astype(np.int64)]


def dict_nbytes(distinct: np.ndarray, count: int, is_string: bool) -> int:
    probe = DictEncoded(distinct, PackedBuffer(0, 0, b""), is_string)
    return 1 + 4 + probe._values_nbytes() + 5 + packed_nbytes(bitpack.min_width([max(len(distinct) - 1, 0)]), count)


def dict_encode(col) -> DictEncoded:
    values, is_str = _values_of(col)
    distinct, codes = first_occurrence_codes(values)
    width = bitpack.min_width([max(len(distinct) - 1, 0)])
    return DictEncoded(distinct, bitpack.pack(codes, width), is_str)


def dict_decode_at(enc: DictEncoded, index: int):
    return enc.get(index)


def vertical_sizes(col) -> dict[str, int]:
    """Exact serialized size of every applicable vertical codec, without packing."""
    values, is_str = _values_of(col)
    distinct = np.unique(values) if values.size else values[:0]
    sizes = {"dict": dict_nbytes(distinct, len(values), is_str)}
    if not is_str and values.size:
        sizes["for"] = for_nbytes(len(values), int(values.min()), int(values.max()))
    return sizes


def best_vertical(col) -> tuple[ForEncoded | DictEncoded, SizeReport]:
    values, is_str = _values_of(col)
    sizes = vertical_sizes(col)
    if "for" in sizes and sizes["for"] <= sizes["dict"]:
        enc: ForEncoded | DictEncoded = _for_pack(values)
        kind = "for"
    else:
        enc = dict_encode(col)
        kind = "dict"
    name = col.name if isinstance(col, ColumnVector) else ""
    return enc, SizeReport(name, enc.nbytes, enc.nbytes, kind)
