"""CSV ingestion, taxi cleaning rules and synthetic correlated-data generators."""

from __future__ import annotations

import csv
import datetime as _dt
import io
import logging
import os
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .model import BLOCK_CAPACITY, Block, ColumnVector, LogicalType, days_since_epoch, to_civil_date

log = logging.getLogger(__name__)

DEFAULT_DATE_FORMAT = "%Y-%m-%d"
DEFAULT_TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"
DEFAULT_MONEY_SCALE = 100
_EPOCH = _dt.datetime(1970, 1, 1)


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    ltype: LogicalType
    fmt: str | None = None  # strptime pattern for dates/timestamps
    scale: int = DEFAULT_MONEY_SCALE  # money: physical units per currency unit


@dataclass(frozen=True)
class TableSchema:
    columns: tuple[ColumnSpec, ...]

    def __post_init__(self) -> None:
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate column names in schema: {names}")

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @classmethod
    def parse(cls, text: str) -> "TableSchema":
        """Parse ``name = type [format-or-scale]`` lines; '#' starts a comment."""
        cols = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            name, sep, rhs = line.partition("=")
            if not sep or not rhs.strip():
                raise ValueError(f"schema line {lineno}: expected 'name = type [option]'")
            tname, _, option = rhs.strip().partition(" ")
            ltype = LogicalType.parse(tname)
            option = option.strip() or None
            if ltype is LogicalType.MONEY:
                cols.append(ColumnSpec(name.strip(), ltype, scale=int(option) if option else DEFAULT_MONEY_SCALE))
            elif ltype in (LogicalType.DATE, LogicalType.TIMESTAMP):
                default = DEFAULT_DATE_FORMAT if ltype is LogicalType.DATE else DEFAULT_TIMESTAMP_FORMAT
                cols.append(ColumnSpec(name.strip(), ltype, fmt=option or default))
            else:
                cols.append(ColumnSpec(name.strip(), ltype))
        return cls(tuple(cols))

    @classmethod
    def load(cls, path: str | os.PathLike) -> "TableSchema":
        return cls.parse(Path(path).read_text())

    def to_text(self) -> str:
        lines = []
        for c in self.columns:
            opt = ""
            if c.ltype is LogicalType.MONEY:
                opt = f" {c.scale}"
            elif c.fmt:
                opt = f" {c.fmt}"
            lines.append(f"{c.name} = {c.ltype.name.lower()}{opt}")
        return "\n".join(lines) + "\n"


def parse_money(text: str, scale: int = DEFAULT_MONEY_SCALE) -> int:
    try:
        scaled = Decimal(text.strip()) * scale
    except InvalidOperation:
        raise ValueError(f"not a decimal amount: {text!r}") from None
    if scaled != scaled.to_integral_value():
        raise ValueError(f"{text!r} has finer precision than 1/{scale}")
    return int(scaled)


def format_money(value: int, scale: int = DEFAULT_MONEY_SCALE) -> str:
    digits = len(str(scale)) - 1
    if scale != 10**digits:
        return str(Decimal(value) / scale)
    sign = "-" if value < 0 else ""
    whole, frac = divmod(abs(value), scale)
    return f"{sign}{whole}.{frac:0{digits}d}" if digits else f"{sign}{whole}"


def parse_value(text: str, spec: ColumnSpec):
    if spec.ltype is LogicalType.STRING:
        return text
    if spec.ltype is LogicalType.INTEGER:
        return int(text)
    if spec.ltype is LogicalType.MONEY:
        return parse_money(text, spec.scale)
    if spec.ltype is LogicalType.DATE:
        return days_since_epoch(_dt.datetime.strptime(text.strip(), spec.fmt).date())
    ts = _dt.datetime.strptime(text.strip(), spec.fmt)
    return int((ts - _EPOCH).total_seconds())


def format_value(value, spec: ColumnSpec) -> str:
    if spec.ltype is LogicalType.STRING:
        return value
    if spec.ltype is LogicalType.MONEY:
        return format_money(int(value), spec.scale)
    if spec.ltype is LogicalType.DATE:
        return to_civil_date(int(value)).strftime(spec.fmt)
    if spec.ltype is LogicalType.TIMESTAMP:
        return (_EPOCH + _dt.timedelta(seconds=int(value))).strftime(spec.fmt)
    return str(int(value))


@dataclass
class Rejection:
    line: int
    reason: str


@dataclass
class ParseResult:
    blocks: list[Block]
    rejected: list[Rejection] = field(default_factory=list)

    @property
    def row_count(self) -> int:
        return sum(b.row_count for b in self.blocks)


def _make_block(schema: TableSchema, columns: list[list]) -> Block:
    return Block(tuple(ColumnVector(s.name, s.ltype, vals) for s, vals in zip(schema.columns, columns)))


def parse_csv(
    source: str | os.PathLike | TextIO,
    schema: TableSchema,
    block_size: int = BLOCK_CAPACITY,
) -> ParseResult:
    """Split a CSV into blocks of at most ``block_size`` rows, in input order.

    Rows that fail to parse are skipped and reported with their line number.
    """
    if not 1 <= block_size <= BLOCK_CAPACITY:
        raise ValueError(f"block size must be in [1, {BLOCK_CAPACITY}]")
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            return parse_csv(fh, schema, block_size)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("CSV is empty (no header row)") from None
    if [h.strip() for h in header] != schema.names:
        raise ValueError(f"CSV header {header} does not match schema columns {schema.names}")
    result = ParseResult([])
    buffers: list[list] = [[] for _ in schema.columns]
    pending = 0
    for row in reader:
        lineno = reader.line_num
        if not row:
            continue
        if len(row) != len(schema.columns):
            result.rejected.append(Rejection(lineno, f"expected {len(schema.columns)} fields, got {len(row)}"))
            continue
        try:
            parsed = [parse_value(text, spec) for text, spec in zip(row, schema.columns)]
        except (ValueError, OverflowError) as exc:
            result.rejected.append(Rejection(lineno, str(exc)))
            continue
        for buf, v in zip(buffers, parsed):
            buf.append(v)
        pending += 1
        if pending == block_size:
            result.blocks.append(_make_block(schema, buffers))
            buffers = [[] for _ in schema.columns]
            pending = 0
    if pending:
        result.blocks.append(_make_block(schema, buffers))
    for rej in result.rejected:
        log.warning("line %d rejected: %s", rej.line, rej.reason)
    return result


def write_csv(blocks: Iterable[Block], schema: TableSchema, sink: TextIO) -> int:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(schema.names)
    rows = 0
    for block in blocks:
        cols = [block[s.name].values for s in schema.columns]
        for i in range(block.row_count):
            writer.writerow([format_value(c[i], s) for c, s in zip(cols, schema.columns)])
        rows += block.row_count
    return rows


def csv_text(blocks: Iterable[Block], schema: TableSchema) -> str:
    buf = io.StringIO()
    write_csv(blocks, schema, buf)
    return buf.getvalue()


# -- taxi cleaning

MONEY_CAP_CENTS = 10_000


def clean_taxi(block: Block, pickup: str = "pickup", dropoff: str = "dropoff", cap: int = MONEY_CAP_CENTS) -> Block:
    """Drop rows whose dropoff precedes pickup or whose amounts leave [0, cap].

    The cap is applied to every money column.
    """
    for name in (pickup, dropoff):
        if name not in block.names:
            raise KeyError(f"taxi cleaning needs column {name!r}")
    money = [c for c in block.columns if c.ltype is LogicalType.MONEY]
    if not money:
        raise KeyError("taxi cleaning needs at least one money column")
    keep = block[dropoff].values >= block[pickup].values
    for c in money:
        keep &= (c.values >= 0) & (c.values <= cap)
    return block.take(np.flatnonzero(keep))


# -- generators

LINEITEM_START = days_since_epoch(_dt.date(1992, 1, 1))
LINEITEM_END = days_since_epoch(_dt.date(1998, 8, 2))


def gen_lineitem_dates(
    n: int,
    seed: int = 0,
    ship_gap: tuple[int, int] = (1, 121),
    commit_gap: tuple[int, int] = (30, 90),
    receipt_gap: tuple[int, int] = (1, 30),
    include_orderdate: bool = False,
) -> Block:
    """Ship/commit/receipt date columns following the TPC-H dbgen rules.

    ship = order + U[1,121], commit = order + U[30,90], receipt = ship + U[1,30]
    with order uniform over [1992-01-01, 1998-08-02].
    """
    if n < 1:
        raise ValueError("need at least one row")
    rng = np.random.default_rng(seed)
    order = rng.integers(LINEITEM_START, LINEITEM_END, n, endpoint=True)
    ship = order + rng.integers(ship_gap[0], ship_gap[1], n, endpoint=True)
    commit = order + rng.integers(commit_gap[0], commit_gap[1], n, endpoint=True)
    receipt = ship + rng.integers(receipt_gap[0], receipt_gap[1], n, endpoint=True)
    cols = [
        ColumnVector("shipdate", LogicalType.DATE, ship),
        ColumnVector("commitdate", LogicalType.DATE, commit),
        ColumnVector("receiptdate", LogicalType.DATE, receipt),
    ]
    if include_orderdate:
        cols.insert(0, ColumnVector("orderdate", LogicalType.DATE, order))
    return Block(tuple(cols))


LINEITEM_SCHEMA = TableSchema(
    tuple(ColumnSpec(n, LogicalType.DATE, DEFAULT_DATE_FORMAT) for n in ("shipdate", "commitdate", "receiptdate"))
)


def gen_city_zip(
    n: int,
    seed: int = 0,
    cities: int = 1000,
    zips_per_city: int | Sequence[int] = 64,
    zip_space: int = 100_000,
) -> Block:
    """(city, zip) rows where each city owns a small private list of zip codes.

    ``zips_per_city`` is either a fixed count per city or one count per city.
    The first ``cities`` rows visit every city in id order, so dictionary
    codes follow city ids; later cities are drawn uniformly.
    """
    if cities < 1:
        raise ValueError("need at least one city")
    rng = np.random.default_rng(seed)
    if np.isscalar(zips_per_city):
        sizes = np.full(cities, int(zips_per_city))
    else:
        sizes = np.asarray(zips_per_city, dtype=np.int64)
        if len(sizes) != cities:
            raise ValueError("need one zip count per city")
    if sizes.min() < 1:
        raise ValueError("every city needs at least one zip code")
    total = int(sizes.sum())
    if total > zip_space:
        raise ValueError("zip space too small for the requested zip lists")
    pool = rng.choice(zip_space, size=total, replace=False)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    city_of_row = rng.integers(0, cities, n)
    head = min(n, cities)
    city_of_row[:head] = np.arange(head)
    zip_slot = starts[city_of_row] + (rng.random(n) * sizes[city_of_row]).astype(np.int64)
    names = np.array([f"city_{i:05d}" for i in range(cities)], dtype=object)
    return Block(
        (
            ColumnVector("city", LogicalType.STRING, names[city_of_row]),
            ColumnVector("zip", LogicalType.INTEGER, pool[zip_slot]),
        )
    )


CITY_ZIP_SCHEMA = TableSchema((ColumnSpec("city", LogicalType.STRING), ColumnSpec("zip", LogicalType.INTEGER)))

# group A / B / C reference columns of the taxi total
TAXI_GROUPS: tuple[tuple[str, ...], ...] = (
    ("mta_tax", "fare_amount", "improvement_surcharge", "extra", "tip_amount", "tolls_amount"),
    ("congestion_surcharge",),
    ("airport_fee",),
)
TAXI_TARGET = "total_amount"
# published percentages of A, A+B, A+C, A+B+C and of an unexplained total;
# they are rounded (sum 99.97) so the generator mix is their normalization
TAXI_PERCENT = (31.19, 62.44, 2.69, 3.33, 0.32)
TAXI_MIX = tuple(p / sum(TAXI_PERCENT) for p in TAXI_PERCENT)
_TAXI_FORMULAS = (0b001, 0b011, 0b101, 0b111)

# inclusive cent ranges per reference column
_TAXI_RANGES = {
    "mta_tax": (0, 50),
    "fare_amount": (250, 6000),
    "improvement_surcharge": (0, 100),
    "extra": (0, 450),
    "tip_amount": (0, 1500),
    "tolls_amount": (0, 700),
    "congestion_surcharge": (100, 275),
    "airport_fee": (125, 175),
}

TAXI_SCHEMA = TableSchema(
    tuple(ColumnSpec(c, LogicalType.MONEY) for g in TAXI_GROUPS for c in g) + (ColumnSpec(TAXI_TARGET, LogicalType.MONEY),)
)


def gen_taxi_amounts(n: int, seed: int = 0, mix: Sequence[float] = TAXI_MIX) -> Block:
    """Monetary reference columns plus a total built from a subset-sum of groups.

    ``mix`` holds the probabilities of the four formulas A, A+B, A+C, A+B+C and
    of an outlier row whose total matches no subset sum.
    """
    mix = np.asarray(mix, dtype=float)
    if mix.shape != (5,) or np.any(mix < 0) or abs(mix.sum() - 1) > 1e-9:
        raise ValueError("mix needs five non-negative probabilities summing to 1")
    rng = np.random.default_rng(seed)
    cols = {}
    for g in TAXI_GROUPS:
        for c in g:
            lo, hi = _TAXI_RANGES[c]
            cols[c] = rng.integers(lo, hi, n, endpoint=True)
    sums = np.vstack([sum(cols[c] for c in g) for g in TAXI_GROUPS])
    choice = rng.choice(5, size=n, p=mix)
    total = np.zeros(n, dtype=np.int64)
    for k, mask in enumerate(_TAXI_FORMULAS):
        rows = choice == k
        for gi in range(len(TAXI_GROUPS)):
            if mask >> gi & 1:
                total[rows] += sums[gi, rows]
    out_rows = np.flatnonzero(choice == 4)
    subset_sums = np.vstack(
        [sum(sums[gi] for gi in range(len(TAXI_GROUPS)) if m >> gi & 1) for m in range(1, 1 << len(TAXI_GROUPS))]
    )
    for i in out_rows:
        candidates = set(int(v) for v in subset_sums[:, i])
        v = int(sums[0, i]) + int(rng.integers(1, 500))
        while v in candidates:
            v = int(sums[0, i]) + int(rng.integers(1, 500))
        total[i] = v
    vectors = [ColumnVector(c, LogicalType.MONEY, cols[c]) for g in TAXI_GROUPS for c in g]
    vectors.append(ColumnVector(TAXI_TARGET, LogicalType.MONEY, total))
    return Block(tuple(vectors))


GENERATORS = {
    "lineitem-dates": (gen_lineitem_dates, LINEITEM_SCHEMA),
    "city-zip": (gen_city_zip, CITY_ZIP_SCHEMA),
    "taxi-amounts": (gen_taxi_amounts, TAXI_SCHEMA),
}


def generate(kind: str, rows: int, seed: int, block_size: int = BLOCK_CAPACITY, **params) -> tuple[list[Block], TableSchema]:
    """Generate ``rows`` rows split into blocks; block ``b`` is seeded with ``seed + b * 1_000_003``."""
    if kind not in GENERATORS:
        raise ValueError(f"unknown generator {kind!r}; choose from {sorted(GENERATORS)}")
    fn, schema = GENERATORS[kind]
    blocks = []
    for b, start in enumerate(range(0, rows, block_size)):
        n = min(block_size, rows - start)
        blocks.append(fn(n, seed=seed + b * 1_000_003, **params))
    return blocks, schema
