"""Fixed-width bit-packing with O(1) random access.

Layout: value ``i`` occupies stream bits ``[i*width, (i+1)*width)``, LSB-first
inside little-endian 64-bit words. A value may straddle two words. The buffer
is padded with zero bits to a whole number of words.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .wire import FormatError, Reader, Writer

MAX_WIDTH = 64
_ALL_ONES = (1 << 64) - 1


class EncodeError(ValueError):
    pass


def packed_nbytes(width: int, count: int) -> int:
    """Buffer size in bytes: ceil(width*count / 8) rounded up to 8 bytes."""
    return ((width * count + 63) // 64) * 8


def _as_unsigned(values) -> np.ndarray:
    if isinstance(values, np.ndarray):
        arr = values
    else:
        # numpy would turn a list mixing >= 2**63 and small ints into float64
        arr = np.asarray(values, dtype=object)
        if arr.size and all(isinstance(v, (int, np.integer)) and -(2**63) <= v < 2**63 for v in arr.ravel()):
            arr = arr.astype(np.int64)
    if arr.size == 0:
        return np.zeros(0, dtype=np.uint64)
    if arr.dtype == object or not np.issubdtype(arr.dtype, np.integer):
        py = [int(v) for v in arr.ravel()]
        for i, v in enumerate(py):
            if v < 0 or v > _ALL_ONES:
                raise EncodeError(f"value {v} at index {i} is not a 64-bit unsigned integer")
        return np.array(py, dtype=np.uint64)
    if np.issubdtype(arr.dtype, np.signedinteger):
        neg = np.flatnonzero(arr < 0)
        if neg.size:
            raise EncodeError(f"negative value {arr[neg[0]]} at index {neg[0]}")
    return arr.astype(np.uint64, copy=False).ravel()


def min_width(values) -> int:
    arr = _as_unsigned(values)
    if arr.size == 0:
        return 0
    return int(arr.max()).bit_length()


@dataclass(frozen=True)
class PackedBuffer:
    width: int
    count: int
    bits: bytes

    @cached_property
    def _words(self) -> np.ndarray:
        # one trailing zero word so straddling reads never go out of range
        words = np.frombuffer(self.bits, dtype="<u8").astype(np.uint64)
        return np.append(words, np.uint64(0))

    @property
    def nbytes(self) -> int:
        return len(self.bits)

    def __len__(self) -> int:
        return self.count

    # serialized as: width u8, count u32, words
    @property
    def serialized_size(self) -> int:
        return 5 + len(self.bits)

    def write(self, w: Writer) -> None:
        w.u8(self.width)
        w.u32(self.count)
        w.raw(self.bits)

    @classmethod
    def read(cls, r: Reader) -> "PackedBuffer":
        width = r.u8()
        count = r.u32()
        if width > MAX_WIDTH:
            raise FormatError(f"bit width {width} exceeds {MAX_WIDTH}")
        return cls(width, count, r.raw(packed_nbytes(width, count)))


def pack(values: Sequence[int] | np.ndarray, width: int) -> PackedBuffer:
    if not 0 <= width <= MAX_WIDTH:
        raise EncodeError(f"width must be in [0, 64], got {width}")
    arr = _as_unsigned(values)
    n = arr.size
    if width < MAX_WIDTH and n:
        bad = np.flatnonzero(arr >> np.uint64(width))
        if bad.size:
            i = int(bad[0])
            raise EncodeError(f"value {int(arr[i])} at index {i} does not fit in {width} bits")
    if width == 0 or n == 0:
        return PackedBuffer(width, n, b"")
    shifts = np.arange(width, dtype=np.uint64)
    bitmatrix = ((arr[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    stream = np.packbits(bitmatrix.ravel(), bitorder="little").tobytes()
    return PackedBuffer(width, n, stream + b"\0" * (packed_nbytes(width, n) - len(stream)))


def _read_word(buf: PackedBuffer, word_index: int) -> int:
    return int(buf._words[word_index])


def unpack_at(buf: PackedBuffer, index: int) -> int:
    if not 0 <= index < buf.count:
        raise IndexError(f"index {index} out of range for {buf.count} packed values")
    width = buf.width
    if width == 0:
        return 0
    pos = index * width
    word, shift = divmod(pos, 64)
    value = _read_word(buf, word) >> shift
    if shift + width > 64:
        value |= _read_word(buf, word + 1) << (64 - shift)
    return value & ((1 << width) - 1)


def unpack_many(buf: PackedBuffer, indices) -> np.ndarray:
    """Vectorized gather of the values at ``indices`` as uint64."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= buf.count):
        raise IndexError(f"selection outside [0, {buf.count})")
    width = buf.width
    if width == 0 or idx.size == 0:
        return np.zeros(idx.size, dtype=np.uint64)
    words = buf._words
    pos = idx.astype(np.uint64) * np.uint64(width)
    wi = (pos >> np.uint64(6)).astype(np.int64)
    sh = pos & np.uint64(63)
    lo = words[wi] >> sh
    hi = words[wi + 1] << ((np.uint64(64) - sh) & np.uint64(63))
    hi[sh == 0] = 0
    mask = np.uint64(_ALL_ONES if width == 64 else (1 << width) - 1)
    return (lo | hi) & mask


def unpack_all(buf: PackedBuffer) -> np.ndarray:
    if buf.width == 0 or buf.count == 0:
        return np.zeros(buf.count, dtype=np.uint64)
    bits = np.unpackbits(np.frombuffer(buf.bits, dtype=np.uint8), bitorder="little")
    bits = bits[: buf.count * buf.width].reshape(buf.count, buf.width).astype(np.uint64)
    return (bits << np.arange(buf.width, dtype=np.uint64)).sum(axis=1, dtype=np.uint64)
