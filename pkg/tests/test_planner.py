import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from colcorr.ingest import TAXI_GROUPS, TAXI_TARGET, gen_city_zip, gen_lineitem_dates, gen_taxi_amounts
from colcorr.model import ColumnVector, LogicalType
from colcorr.nonhier import diff_encode
from colcorr.planner import (
    EncodingPlan,
    MultiRefConfig,
    brute_force_plan,
    build_candidate_graph,
    plan,
    plan_block,
)
from colcorr.wire import Writer
from oracles import exhaustive_two_level

log = logging.getLogger(__name__)


def _ints(name, values):
    return ColumnVector(name, LogicalType.INTEGER, np.asarray(values, dtype=np.int64))


def _nonhier_bytes(t, r):
    w = Writer()
    diff_encode(t, r).write(w, {r.name: 0})
    return len(w.getvalue())


def test_three_dates_six_edges():
    blk = gen_lineitem_dates(2000, seed=1)
    g = build_candidate_graph(blk.columns)
    pairs = {(e.source, e.references[0]) for e in g.edges}
    assert len(g.edges) == 6 and len(pairs) == 6
    assert all(s != r for s, r in pairs)
    assert all(e.kind == "nonhier" and e.weight >= 0 for e in g.edges)


def test_single_column_no_edges():
    g = build_candidate_graph([_ints("a", [1, 2, 3])])
    assert g.edges == []
    assert plan(g)["a"].kind == "vertical"


def test_identical_columns_weight():
    a, b = _ints("a", np.arange(100) * 3), _ints("b", np.arange(100) * 3)
    g = build_candidate_graph([a, b])
    assert {e.weight for e in g.edges} == {_nonhier_bytes(a, b)} == {2 + 8 + 5}


def test_lineitem_reference_is_shipdate():
    blk = gen_lineitem_dates(100_000, seed=7)
    p, g = plan_block(blk.columns)
    p.validate()
    assert p["receiptdate"].kind == "nonhier" and p["receiptdate"].reference == "shipdate"
    assert p["commitdate"].kind == "nonhier" and p["commitdate"].reference == "shipdate"
    assert p["shipdate"].kind == "vertical"
    assert p.predicted_bytes <= p.vertical_bytes


def test_uncorrelated_columns_stay_vertical():
    rng = np.random.default_rng(0)
    cols = [_ints(n, rng.integers(0, 2**40, 5000)) for n in "abc"]
    p = plan(build_candidate_graph(cols))
    assert all(c.kind == "vertical" for c in p.columns.values())
    assert p.predicted_bytes == p.vertical_bytes


def _chain_columns():
    rng = np.random.default_rng(5)
    base = rng.integers(0, 2**20, 20_000)
    middle = base + rng.integers(0, 2, 20_000)
    last = middle + rng.integers(0, 4, 20_000)
    # "m" sorts before "p", so m -> p wins the tie with p -> m and m gets diff-encoded first
    return [_ints("p", base), _ints("m", middle), _ints("z", last)]


def test_chain_falls_back_to_next_reference():
    cols = _chain_columns()
    g = build_candidate_graph(cols)
    p = plan(g)
    p.validate()
    assert p["m"].reference == "p"
    assert p["z"].kind == "nonhier" and p["z"].reference == "p"

    by = {c.name: c for c in cols}
    vsz = {n: v.vertical_bytes for n, v in g.vertices.items()}
    weights = {(a, b): _nonhier_bytes(by[a], by[b]) for a in by for b in by if a != b}
    best, assign = exhaustive_two_level(vsz, weights)
    assert brute_force_plan(g).predicted_bytes == best
    assert assign == {"p": "m", "z": "m"}
    assert p.predicted_bytes >= best
    log.info("chain instance: greedy %d, optimal %d, gap %d bytes", p.predicted_bytes, best, p.predicted_bytes - best)


def test_plan_is_deterministic():
    blk = gen_lineitem_dates(20_000, seed=3)
    texts = {plan_block(blk.columns)[0].to_text() for _ in range(3)}
    assert len(texts) == 1


def test_plan_text_roundtrip():
    blk = gen_taxi_amounts(5000, seed=2)
    p, _ = plan_block(blk.columns, [MultiRefConfig(TAXI_TARGET, TAXI_GROUPS)])
    assert p[TAXI_TARGET].kind == "multiref"
    back = EncodingPlan.from_text(p.to_text())
    assert back.columns == p.columns
    assert back.to_text() == p.to_text()


def test_multiref_rejected_above_threshold():
    blk = gen_taxi_amounts(5000, seed=2, mix=(0.2, 0.2, 0.1, 0.1, 0.4))
    p, g = plan_block(blk.columns, [MultiRefConfig(TAXI_TARGET, TAXI_GROUPS)])
    assert not any(e.kind == "multiref" for e in g.edges)
    assert p[TAXI_TARGET].kind != "multiref"


def test_hier_reference_becomes_dict():
    blk = gen_city_zip(50_000, seed=4, cities=100, zips_per_city=16)
    p, _ = plan_block(blk.columns)
    p.validate()
    assert p["zip"].kind == "hier" and p["zip"].reference == "city"
    assert p["city"].kind == "dict"


def test_validate_rejects_chains():
    with pytest.raises(ValueError, match="itself diff-encoded"):
        EncodingPlan.from_text("a = vertical\nb = nonhier a\nc = nonhier b\n").validate()


@st.composite
def small_instance(draw):
    k = draw(st.integers(2, 5))
    n = draw(st.integers(50, 400))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    cols = [rng.integers(0, 2 ** draw(st.integers(1, 30)), n)]
    for _ in range(k - 1):
        src = cols[draw(st.integers(0, len(cols) - 1))]
        noise = rng.integers(0, 2 ** draw(st.integers(0, 12)), n)
        cols.append(src + noise if draw(st.booleans()) else rng.integers(0, 2**24, n))
    return [_ints(f"c{i}", c) for i, c in enumerate(cols)]


@settings(max_examples=60)
@given(small_instance())
def test_greedy_against_exhaustive(cols):
    g = build_candidate_graph(cols)
    p = plan(g)
    p.validate()
    by = {c.name: c for c in cols}
    vsz = {n: v.vertical_bytes for n, v in g.vertices.items()}
    weights = {(a, b): _nonhier_bytes(by[a], by[b]) for a in by for b in by if a != b}
    best, _ = exhaustive_two_level(vsz, weights)
    assert brute_force_plan(g).predicted_bytes == best
    assert best <= p.predicted_bytes <= p.vertical_bytes
    log.info("%d columns: greedy gap %d bytes", len(cols), p.predicted_bytes - best)
