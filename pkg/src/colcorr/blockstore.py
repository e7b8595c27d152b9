"""Self-contained block files.

Layout (all integers little-endian)::

    header   magic "CORRABLK" | version u16 | row_count u32 | column_count u16
    section  column_id u16 | logical_type u8 | encoding u8 | payload_len u64 | payload
    payload  name_len u16 | name (UTF-8) | codec body

Column ids are positions in the file; references inside codec bodies use them,
so a block can be decoded with nothing but its own bytes. A table is a
directory of numbered block files plus ``manifest.txt``.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .hier import HierEncoded, hier_encode
from .model import Block, ColumnVector, LogicalType, SizeReport
from .multiref import MultiRefEncoded, group_sums, multiref_encode
from .nonhier import NonHierEncoded, diff_encode
from .planner import EncodingPlan
from .vertical import DictEncoded, ForEncoded, best_vertical, dict_encode, for_encode
from .wire import (
    BadMagicError,
    DanglingReferenceError,
    FormatError,
    Reader,
    TruncatedError,
    VersionMismatchError,
    Writer,
)

MAGIC = b"CORRABLK"
FORMAT_VERSION = 1
HEADER_SIZE = 8 + 2 + 4 + 2
SECTION_HEADER_SIZE = 2 + 1 + 1 + 8

CODECS = {c.tag: c for c in (ForEncoded, DictEncoded, NonHierEncoded, HierEncoded, MultiRefEncoded)}
HORIZONTAL = (NonHierEncoded, HierEncoded, MultiRefEncoded)

__all__ = [
    "BadMagicError",
    "BlockHandle",
    "DanglingReferenceError",
    "FormatError",
    "PlanMismatchError",
    "TruncatedError",
    "VersionMismatchError",
    "block_stats",
    "encode_block",
    "read_block",
    "read_table",
    "write_block",
    "write_table",
]


class PlanMismatchError(ValueError):
    pass


def _name_prefix_size(name: str) -> int:
    return 2 + len(name.encode("utf-8"))


def encode_block(block: Block, plan: EncodingPlan | None = None) -> dict[str, object]:
    """Encode every column of ``block`` as ``plan`` says (all vertical if None)."""
    plan = plan or EncodingPlan.all_vertical(block.names)
    if set(plan.columns) != set(block.names):
        missing = set(block.names) - set(plan.columns)
        extra = set(plan.columns) - set(block.names)
        raise PlanMismatchError(f"plan does not match block columns (missing {sorted(missing)}, unknown {sorted(extra)})")
    try:
        plan.validate()
    except ValueError as exc:
        raise PlanMismatchError(str(exc)) from exc
    hier_refs = {p.reference for p in plan.columns.values() if p.kind == "hier"}
    out: dict[str, object] = {}
    for col in block.columns:
        p = plan[col.name]
        if p.kind == "for" or (p.kind == "vertical" and col.name not in hier_refs):
            out[col.name] = for_encode(col) if p.kind == "for" else best_vertical(col)[0]
        elif p.kind in ("dict", "vertical"):
            out[col.name] = dict_encode(col)
    for col in block.columns:
        p = plan[col.name]
        if p.kind == "nonhier":
            out[col.name] = diff_encode(col, block[p.reference])
        elif p.kind == "hier":
            out[col.name] = hier_encode(col, out[p.reference], p.reference)
        elif p.kind == "multiref":
            out[col.name] = multiref_encode(col, block.columns, p.formula_set)
    return {name: out[name] for name in block.names}


def serialize_block(block: Block, encoded: dict[str, object]) -> bytes:
    ids = {name: i for i, name in enumerate(block.names)}
    w = Writer()
    w.raw(MAGIC)
    w.u16(FORMAT_VERSION)
    w.u32(block.row_count)
    w.u16(len(block.columns))
    for col in block.columns:
        enc = encoded[col.name]
        body = Writer()
        name = col.name.encode("utf-8")
        body.u16(len(name))
        body.raw(name)
        if isinstance(enc, HORIZONTAL):
            enc.write(body, ids)
        else:
            enc.write(body)
        payload = body.getvalue()
        w.u16(ids[col.name])
        w.u8(int(col.ltype))
        w.u8(enc.tag)
        w.u64(len(payload))
        w.raw(payload)
    return w.getvalue()


def write_block(block: Block, plan: EncodingPlan | None, sink: BinaryIO | str | os.PathLike) -> int:
    data = serialize_block(block, encode_block(block, plan))
    if isinstance(sink, (str, os.PathLike)):
        Path(sink).write_bytes(data)
    else:
        sink.write(data)
    return len(data)


@dataclass(frozen=True)
class _Section:
    name: str
    ltype: LogicalType
    encoded: object
    payload_bytes: int


class BlockHandle:
    """Decoder over one block. Values are decoded on demand; nothing is cached."""

    def __init__(self, row_count: int, sections: Sequence[_Section]) -> None:
        self.row_count = row_count
        self._sections = {s.name: s for s in sections}
        self.names = [s.name for s in sections]

    def __contains__(self, name: str) -> bool:
        return name in self._sections

    def _section(self, name: str) -> _Section:
        try:
            return self._sections[name]
        except KeyError:
            raise KeyError(f"unknown column {name!r}; block has {self.names}") from None

    def encoded(self, name: str):
        return self._section(name).encoded

    def ltype(self, name: str) -> LogicalType:
        return self._section(name).ltype

    def encoding(self, name: str) -> str:
        return type(self._section(name).encoded).__name__.replace("Encoded", "").lower()

    def references(self, name: str) -> tuple[str, ...]:
        enc = self.encoded(name)
        return enc.references if isinstance(enc, HORIZONTAL) else ()

    def payload_bytes(self, name: str) -> int:
        return self._section(name).payload_bytes

    def _check(self, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.row_count):
            raise IndexError(f"row index outside [0, {self.row_count})")
        return idx

    def materialize(self, names: Sequence[str], indices) -> dict[str, np.ndarray]:
        """Decode ``names`` at ``indices``.

        References of diff-encoded columns are decoded once at the same
        positions and reused, whether or not they were requested.
        """
        idx = self._check(indices)
        cache: dict[str, np.ndarray] = {}

        def values(name: str) -> np.ndarray:
            if name not in cache:
                enc = self.encoded(name)
                if isinstance(enc, NonHierEncoded):
                    cache[name] = enc.take(values(enc.reference_column), idx)
                elif isinstance(enc, HierEncoded):
                    ref = self.encoded(enc.reference_column)
                    cache[name] = enc.take(ref.codes_at(idx), idx)
                elif isinstance(enc, MultiRefEncoded):
                    cols = {c: values(c) for c in enc.references}
                    sums = group_sums(cols, enc.formula_set.groups)
                    cache[name] = enc.take(sums, idx)
                else:
                    cache[name] = enc.take(idx)
            return cache[name]

        return {name: values(name) for name in names}

    def take(self, name: str, indices) -> np.ndarray:
        return self.materialize([name], indices)[name]

    def get(self, name: str, index: int):
        v = self.take(name, [index])[0]
        return v if self.ltype(name) is LogicalType.STRING else int(v)

    def column(self, name: str) -> np.ndarray:
        return self.take(name, np.arange(self.row_count))

    def to_block(self) -> Block:
        full = self.materialize(self.names, np.arange(self.row_count))
        return Block(
            tuple(ColumnVector(n, self.ltype(n), full[n]) for n in self.names),
            row_count=self.row_count,
        )


def _parse(data: bytes) -> BlockHandle:
    r = Reader(data)
    if len(data) < len(MAGIC) and MAGIC.startswith(data):
        raise TruncatedError(f"file ends after {len(data)} bytes, inside the magic")
    if len(data) < len(MAGIC) or r.raw(len(MAGIC)) != MAGIC:
        raise BadMagicError("not a block file (bad magic)")
    version = r.u16()
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"block format version {version}, expected {FORMAT_VERSION}")
    row_count = r.u32()
    ncols = r.u16()
    raw_sections = []
    for i in range(ncols):
        cid, ltag, etag, plen = r.u16(), r.u8(), r.u8(), r.u64()
        if cid != i:
            raise FormatError(f"section {i} carries column id {cid}")
        try:
            ltype = LogicalType(ltag)
        except ValueError:
            raise FormatError(f"unknown logical type tag {ltag}") from None
        if etag not in CODECS:
            raise FormatError(f"unknown encoding tag {etag}")
        payload = r.raw(plen)
        pr = Reader(payload)
        name = pr.raw(pr.u16()).decode("utf-8")
        raw_sections.append((name, ltype, etag, pr, plen))
    if r.remaining:
        raise FormatError(f"{r.remaining} trailing bytes after last section")
    names = [s[0] for s in raw_sections]
    sections = []
    for name, ltype, etag, pr, plen in raw_sections:
        codec = CODECS[etag]
        enc = codec.read(pr, names) if codec in HORIZONTAL else codec.read(pr)
        if pr.remaining:
            raise FormatError(f"column {name!r}: {pr.remaining} unread payload bytes")
        if len(enc) != row_count:
            raise FormatError(f"column {name!r} holds {len(enc)} rows, block has {row_count}")
        sections.append(_Section(name, ltype, enc, plen))
    by_name = {s.name: s for s in sections}
    for s in sections:
        if isinstance(s.encoded, HORIZONTAL):
            for ref in s.encoded.references:
                if isinstance(by_name[ref].encoded, HORIZONTAL):
                    raise DanglingReferenceError(f"column {s.name!r} references diff-encoded column {ref!r}")
        if isinstance(s.encoded, HierEncoded):
            ref = by_name[s.encoded.reference_column].encoded
            if not isinstance(ref, DictEncoded) or len(ref.distinct_values) != s.encoded.group_count:
                raise DanglingReferenceError(f"column {s.name!r}: hierarchical reference is not a matching dictionary")
    return BlockHandle(row_count, sections)


def read_block(source: bytes | BinaryIO | str | os.PathLike) -> BlockHandle:
    if isinstance(source, (bytes, bytearray, memoryview)):
        data = bytes(source)
    elif isinstance(source, (str, os.PathLike)):
        data = Path(source).read_bytes()
    else:
        data = source.read()
    return _parse(data)


def block_stats(source) -> list[SizeReport]:
    """Per-column encoded size (section header included) against the best vertical codec."""
    handle = source if isinstance(source, BlockHandle) else read_block(source)
    reports = []
    for name in handle.names:
        overhead = SECTION_HEADER_SIZE + _name_prefix_size(name)
        encoded = SECTION_HEADER_SIZE + handle.payload_bytes(name)
        col = ColumnVector(name, handle.ltype(name), handle.column(name))
        baseline = overhead + best_vertical(col)[0].nbytes
        reports.append(SizeReport(name, baseline, encoded, handle.encoding(name)))
    return reports


MANIFEST = "manifest.txt"


def block_filename(i: int) -> str:
    return f"block_{i:05d}.blk"


def write_table(blocks: Iterable[Block], plans, directory: str | os.PathLike) -> list[Path]:
    """Write numbered block files and a manifest.

    ``plans`` is one EncodingPlan applied to every block, a callable
    ``block -> plan``, or None for all-vertical encoding.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths, lines = [], []
    for i, block in enumerate(blocks):
        p = plans(block) if callable(plans) else plans
        path = directory / block_filename(i)
        size = write_block(block, p, path)
        paths.append(path)
        lines.append(f"{path.name} rows={block.row_count} bytes={size}")
    (directory / MANIFEST).write_text("\n".join(lines) + ("\n" if lines else ""))
    return paths


def read_table(directory: str | os.PathLike) -> list[BlockHandle]:
    directory = Path(directory)
    manifest = directory / MANIFEST
    if not manifest.exists():
        raise FileNotFoundError(f"no {MANIFEST} in {directory}")
    handles = []
    for line in manifest.read_text().splitlines():
        if line.strip():
            handles.append(read_block(directory / line.split()[0]))
    return handles


def roundtrip_bytes(block: Block, plan: EncodingPlan | None = None) -> bytes:
    buf = io.BytesIO()
    write_block(block, plan, buf)
    return buf.getvalue()
