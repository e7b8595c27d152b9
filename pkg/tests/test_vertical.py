import numpy as np
import pytest
from hypothesis import given, strategies as st

from colcorr.model import ColumnVector, LogicalType, days_since_epoch
from colcorr.vertical import (
    DictEncoded,
    ForEncoded,
    best_vertical,
    dict_decode_at,
    dict_encode,
    for_decode_at,
    for_encode,
    vertical_sizes,
)
from colcorr.wire import Reader, Writer
from oracles import bits_needed

SHIP = [days_since_epoch(d) for d in ("1992-01-02", "1998-12-01", "2024-06-08")]
CITIES = ["Cortland", "Naples", "Naples", "Naples", "NYC", "NYC"]


def _ints(name, values, ltype=LogicalType.INTEGER):
    return ColumnVector(name, ltype, np.asarray(values, dtype=np.int64))


def _serialized(enc):
    w = Writer()
    enc.write(w)
    return w.getvalue()


def test_figure_one_shipdates_for():
    assert SHIP == [8036, 10561, 19882]
    enc = for_encode(_ints("ship", SHIP, LogicalType.DATE))
    assert enc.base == 8036
    assert enc.width == 14 == bits_needed(19882 - 8036)
    assert [int(x) for x in enc.decode_all() - enc.base] == [0, 2525, 11846]
    assert for_decode_at(enc, 0) == 8036
    assert for_decode_at(enc, 2) == 19882


def test_constant_column_for():
    enc = for_encode(_ints("c", [7, 7, 7]))
    assert enc.base == 7 and enc.width == 0
    assert all(for_decode_at(enc, i) == 7 for i in range(3))


def test_twelve_bit_date_span():
    rng = np.random.default_rng(3)
    vals = 8036 + rng.integers(0, 4096, 10_000)
    vals[0], vals[1] = 8036, 8036 + 4095
    assert for_encode(_ints("d", vals, LogicalType.DATE)).width == 12


def test_for_rejects_strings_and_empty():
    with pytest.raises(TypeError):
        for_encode(ColumnVector("s", LogicalType.STRING, ["a"]))
    with pytest.raises(ValueError):
        for_encode(_ints("e", []))


def test_city_dictionary():
    enc = dict_encode(ColumnVector("city", LogicalType.STRING, CITIES))
    assert dict(enumerate(enc.distinct_values)) == {0: "Cortland", 1: "Naples", 2: "NYC"}
    assert [enc.code_at(i) for i in range(6)] == [0, 1, 1, 1, 2, 2]
    assert dict_decode_at(enc, 4) == "NYC"
    assert dict_decode_at(enc, 0) == "Cortland"
    assert dict_decode_at(enc, 2) == "Naples"


def test_single_value_dictionary():
    enc = dict_encode(ColumnVector("s", LogicalType.STRING, ["x"]))
    assert list(enc.distinct_values) == ["x"] and enc.codes.width == 0


def test_thousand_distinct_width():
    enc = dict_encode(_ints("v", np.arange(1000) * 7919))
    assert enc.codes.width == bits_needed(999) == 10


def test_best_vertical_low_cardinality_picks_dict():
    vals = np.tile([0, 5_000_000, 9_999_999], 333_334)[:1_000_000]
    enc, rep = best_vertical(_ints("v", vals))
    assert isinstance(enc, DictEncoded) and rep.encoding == "dict"
    assert enc.codes.width == 2


def test_best_vertical_dense_range_picks_for():
    enc, rep = best_vertical(_ints("v", np.arange(100_000)))
    assert isinstance(enc, ForEncoded) and rep.encoding == "for"


def test_best_vertical_string_is_dict():
    enc, rep = best_vertical(ColumnVector("s", LogicalType.STRING, CITIES))
    assert isinstance(enc, DictEncoded) and rep.encoding == "dict"


def _candidate_sizes(col):
    """Measure every codec by actually encoding and serializing it."""
    sizes = {"dict": len(_serialized(dict_encode(col)))}
    if col.ltype is not LogicalType.STRING:
        sizes["for"] = len(_serialized(for_encode(col)))
    return sizes


@given(st.lists(st.integers(-(2**40), 2**40), min_size=1, max_size=300), st.integers(1, 50))
def test_best_vertical_matches_measured_candidates(vals, card):
    vals = [v % (card * 1009) - card for v in vals]
    col = _ints("v", vals)
    measured = _candidate_sizes(col)
    assert vertical_sizes(col) == measured
    enc, rep = best_vertical(col)
    assert rep.encoded_bytes == len(_serialized(enc)) == min(measured.values())


@given(st.lists(st.integers(-(2**63), 2**63 - 1), min_size=1, max_size=200))
def test_for_roundtrip_full_int64_range(vals):
    enc = for_encode(_ints("v", vals))
    assert [int(x) for x in enc.decode_all()] == vals
    assert [for_decode_at(enc, i) for i in range(len(vals))] == vals
    back = ForEncoded.read(Reader(_serialized(enc)))
    assert [int(x) for x in back.take(np.arange(len(vals)))] == vals


@given(st.lists(st.text(max_size=6), min_size=1, max_size=100))
def test_dict_string_roundtrip_and_dense_codes(vals):
    enc = dict_encode(ColumnVector("s", LogicalType.STRING, vals))
    assert list(enc.decode_all()) == vals
    codes = {enc.code_at(i) for i in range(len(vals))}
    assert codes == set(range(len(enc.distinct_values)))
    back = DictEncoded.read(Reader(_serialized(enc)))
    assert list(back.decode_all()) == vals


@given(st.lists(st.integers(-(2**63), 2**63 - 1), min_size=1, max_size=200))
def test_dict_int_roundtrip_and_size(vals):
    enc = dict_encode(_ints("v", vals))
    assert [dict_decode_at(enc, i) for i in range(len(vals))] == vals
    assert len(set(enc.distinct_values.tolist())) == len(enc.distinct_values)
    assert enc.nbytes == len(_serialized(enc))
