"""Little-endian byte writer/reader shared by codec payloads and block files."""

from __future__ import annotations

import struct

import numpy as np


class FormatError(ValueError):
    """Malformed serialized data."""


class TruncatedError(FormatError):
    pass


class Writer:
    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def u8(self, v: int) -> None:
        self._parts.append(struct.pack("<B", v))

    def u16(self, v: int) -> None:
        self._parts.append(struct.pack("<H", v))

    def u32(self, v: int) -> None:
        self._parts.append(struct.pack("<I", v))

    def u64(self, v: int) -> None:
        self._parts.append(struct.pack("<Q", v))

    def i64(self, v: int) -> None:
        self._parts.append(struct.pack("<q", v))

    def raw(self, b: bytes) -> None:
        self._parts.append(bytes(b))

    def array(self, arr: np.ndarray, dtype: str) -> None:
        self._parts.append(np.ascontiguousarray(arr, dtype=dtype).tobytes())

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    def __init__(self, data: bytes | memoryview, pos: int = 0) -> None:
        self._data = memoryview(data)
        self.pos = pos

    def _take(self, n: int) -> memoryview:
        end = self.pos + n
        if end > len(self._data):
            raise TruncatedError(f"need {n} bytes at offset {self.pos}, only {len(self._data) - self.pos} left")
        out = self._data[self.pos : end]
        self.pos = end
        return out

    def _unpack(self, fmt: str, n: int) -> int:
        return struct.unpack(fmt, self._take(n))[0]

    def u8(self) -> int:
        return self._unpack("<B", 1)

    def u16(self) -> int:
        return self._unpack("<H", 2)

    def u32(self) -> int:
        return self._unpack("<I", 4)

    def u64(self) -> int:
        return self._unpack("<Q", 8)

    def i64(self) -> int:
        return self._unpack("<q", 8)

    def raw(self, n: int) -> bytes:
        return bytes(self._take(n))

    def array(self, count: int, dtype: str) -> np.ndarray:
        width = np.dtype(dtype).itemsize
        return np.frombuffer(self._take(count * width), dtype=dtype).copy()

    @property
    def remaining(self) -> int:
        return len(self._data) - self.pos


class BadMagicError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


class DanglingReferenceError(FormatError):
    """A payload names a column id that does not exist in its block."""


def resolve_ref(names: list[str], column_id: int) -> str:
    if column_id >= len(names):
        raise DanglingReferenceError(f"reference to column id {column_id}, block has {len(names)} columns")
    return names[column_id]
