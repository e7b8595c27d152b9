import datetime as dt
import io
from decimal import Decimal
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from colcorr.ingest import (
    TAXI_GROUPS,
    TAXI_MIX,
    TAXI_PERCENT,
    ColumnSpec,
    TableSchema,
    clean_taxi,
    csv_text,
    format_money,
    format_value,
    gen_city_zip,
    gen_lineitem_dates,
    gen_taxi_amounts,
    generate,
    parse_csv,
    parse_money,
    parse_value,
)
from colcorr.hier import hier_encode
from colcorr.model import Block, ColumnVector, LogicalType, days_since_epoch
from colcorr.multiref import group_sums, multiref_encode, select_formulas
from colcorr.nonhier import diff_encode
from colcorr.vertical import best_vertical, dict_encode
from oracles import bits_needed

FIXTURES = Path(__file__).parent / "fixtures"
INT_SCHEMA = TableSchema((ColumnSpec("a", LogicalType.INTEGER),))


def test_money_scaling():
    assert parse_money("12.34") == 1234
    assert parse_money("12.34") == int(Decimal("12.34") * 100)
    assert parse_money("-0.05") == -5
    with pytest.raises(ValueError):
        parse_money("1.234")
    with pytest.raises(ValueError):
        parse_money("abc")


@given(st.integers(-(10**12), 10**12))
def test_money_format_roundtrip(cents):
    assert parse_money(format_money(cents)) == cents


def test_block_split_arithmetic():
    n = 2_500
    text = "a\n" + "".join(f"{i}\n" for i in range(n))
    res = parse_csv(io.StringIO(text), INT_SCHEMA, block_size=1000)
    assert [b.row_count for b in res.blocks] == [1000, 1000, 500]
    assert np.array_equal(np.concatenate([b["a"].values for b in res.blocks]), np.arange(n))


def test_bad_date_rejected_others_kept():
    schema = TableSchema((ColumnSpec("d", LogicalType.DATE, "%Y-%m-%d"), ColumnSpec("n", LogicalType.INTEGER)))
    res = parse_csv(io.StringIO("d,n\n1992-01-02,1\n1992-02-30,2\n1998-12-01,3\n"), schema)
    assert len(res.rejected) == 1 and res.rejected[0].line == 3
    assert list(res.blocks[0]["d"].values) == [8036, 10561]
    assert list(res.blocks[0]["n"].values) == [1, 3]


def test_wrong_field_count_rejected():
    res = parse_csv(io.StringIO("a\n1\n2,3\n4\n"), INT_SCHEMA)
    assert [r.line for r in res.rejected] == [3]
    assert list(res.blocks[0]["a"].values) == [1, 4]


def test_header_mismatch():
    with pytest.raises(ValueError):
        parse_csv(io.StringIO("b\n1\n"), INT_SCHEMA)


def test_schema_text_roundtrip():
    schema = TableSchema.load(FIXTURES / "taxi_dirty.schema")
    assert TableSchema.parse(schema.to_text()) == schema


def _taxi_fixture():
    schema = TableSchema.load(FIXTURES / "taxi_dirty.schema")
    res = parse_csv(FIXTURES / "taxi_dirty.csv", schema)
    assert not res.rejected
    return res.blocks[0]


def test_clean_taxi_rules():
    blk = _taxi_fixture()
    out = clean_taxi(blk)
    assert out.row_count == blk.row_count - 2
    totals = list(out["total_amount"].values)
    assert 15000 not in totals and 800 not in totals
    # dropoff equal to pickup and an amount of exactly 100.00 are kept
    assert 350 in totals and 10000 in totals


def test_clean_taxi_idempotent():
    once = clean_taxi(_taxi_fixture())
    assert clean_taxi(once) == once


def test_clean_taxi_negative_amount():
    blk = Block((
        ColumnVector("pickup", LogicalType.TIMESTAMP, [0, 0]),
        ColumnVector("dropoff", LogicalType.TIMESTAMP, [5, 5]),
        ColumnVector("total_amount", LogicalType.MONEY, [-100, 100]),
    ))
    assert list(clean_taxi(blk)["total_amount"].values) == [100]


def test_lineitem_construction_rules():
    blk = gen_lineitem_dates(50_000, seed=1, include_orderdate=True)
    o, s, c, r = (blk[n].values for n in ("orderdate", "shipdate", "commitdate", "receiptdate"))
    assert np.all(o <= c) and np.all(o < s) and np.all(s < r)
    assert o.min() >= days_since_epoch("1992-01-01") and o.max() <= days_since_epoch("1998-08-02")
    d_r, d_c = r - s, c - s
    assert d_r.min() >= 1 and d_r.max() <= 30
    assert d_c.min() >= -91 and d_c.max() <= 89


def test_lineitem_diff_widths():
    blk = gen_lineitem_dates(200_000, seed=2)
    assert diff_encode(blk["receiptdate"], blk["shipdate"]).width == bits_needed(30 - 1) == 5
    assert diff_encode(blk["commitdate"], blk["shipdate"]).width == bits_needed(89 + 91) == 8


def test_lineitem_single_row():
    blk = gen_lineitem_dates(1, seed=0)
    s, c, r = (int(blk[n].values[0]) for n in ("shipdate", "commitdate", "receiptdate"))
    assert 1 <= r - s <= 30 and -91 <= c - s <= 89


def test_generators_deterministic():
    assert gen_lineitem_dates(1000, seed=4) == gen_lineitem_dates(1000, seed=4)
    assert gen_city_zip(1000, seed=4) == gen_city_zip(1000, seed=4)
    assert gen_taxi_amounts(1000, seed=4) == gen_taxi_amounts(1000, seed=4)
    assert gen_taxi_amounts(1000, seed=4) != gen_taxi_amounts(1000, seed=5)


def test_generate_splits_blocks():
    blocks, schema = generate("lineitem-dates", 2500, seed=1, block_size=1000)
    assert [b.row_count for b in blocks] == [1000, 1000, 500]
    text = csv_text(blocks, schema)
    back = parse_csv(io.StringIO(text), schema, block_size=1000)
    assert back.blocks == blocks


def test_city_zip_figure_three_shape():
    blk = gen_city_zip(500, seed=3, cities=3, zips_per_city=[1, 2, 2])
    enc = hier_encode(blk["zip"], blk["city"])
    assert list(enc.offsets[:3]) == [0, 1, 3]


def test_city_zip_one_zip_per_city():
    blk = gen_city_zip(5000, seed=3, cities=40, zips_per_city=1)
    assert hier_encode(blk["zip"], blk["city"]).codes.width == 0


def test_city_zip_hier_beats_dict():
    blk = gen_city_zip(1_000_000, seed=8)
    assert len(np.unique(blk["zip"].values)) > 40_000
    hier = hier_encode(blk["zip"], blk["city"])
    assert hier.nbytes < dict_encode(blk["zip"]).nbytes
    assert hier.nbytes < best_vertical(blk["zip"])[1].encoded_bytes


def test_taxi_mix_normalized():
    assert abs(sum(TAXI_MIX) - 1) < 1e-9
    assert [round(p * sum(TAXI_PERCENT), 9) for p in TAXI_MIX] == list(TAXI_PERCENT)
    with pytest.raises(ValueError):
        gen_taxi_amounts(10, mix=(0.5, 0.5, 0.1, 0, 0))


def test_taxi_formula_frequencies():
    n = 1_000_000
    blk = gen_taxi_amounts(n, seed=11)
    cols = {c.name: c.values for c in blk.columns}
    sums = group_sums(cols, TAXI_GROUPS)
    t = blk["total_amount"].values
    a, b, c = sums
    hit = {
        "A": t == a, "A+B": t == a + b, "A+C": t == a + c, "A+B+C": t == a + b + c,
    }
    any_hit = np.zeros(n, dtype=bool)
    for k, p in zip(hit, TAXI_MIX[:4]):
        # first-match frequency, the same precedence the encoder uses
        first = hit[k] & ~any_hit
        assert abs(first.mean() - p) < 0.005
        any_hit |= hit[k]
    assert abs((~any_hit).mean() - TAXI_MIX[4]) < 0.005


def test_taxi_outliers_match_no_subset_sum():
    blk = gen_taxi_amounts(20_000, seed=12)
    cols = {c.name: c.values for c in blk.columns}
    sums = group_sums(cols, TAXI_GROUPS)
    t = blk["total_amount"].values
    matched = np.zeros(len(t), dtype=bool)
    for mask in range(1, 8):
        matched |= t == sum(sums[g] for g in range(3) if mask >> g & 1)
    fs, rate = select_formulas(t, TAXI_GROUPS, cols)
    assert rate == (~matched).mean()


def test_taxi_zero_outlier_rate():
    blk = gen_taxi_amounts(5000, seed=1, mix=(0.25, 0.25, 0.25, 0.25, 0.0))
    cols = {c.name: c.values for c in blk.columns}
    fs, rate = select_formulas(blk["total_amount"], TAXI_GROUPS, cols)
    assert rate == 0.0
    assert len(multiref_encode(blk["total_amount"], cols, fs).outliers) == 0


def test_timestamp_parse():
    spec = ColumnSpec("t", LogicalType.TIMESTAMP, "%Y-%m-%d %H:%M:%S")
    v = parse_value("2023-01-05 09:09:59", spec)
    assert v == int((dt.datetime(2023, 1, 5, 9, 9, 59) - dt.datetime(1970, 1, 1)).total_seconds())
    assert format_value(v, spec) == "2023-01-05 09:09:59"
