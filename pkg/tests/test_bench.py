import csv
import io

import numpy as np
import pytest
from scipy.stats import chisquare

from colcorr.bench import (
    DEFAULT_GRID,
    LatencyReport,
    SelectionVector,
    VerificationError,
    gen_selection_vector,
    materialize,
    parse_grid,
    run_latency_suite,
    selection_size,
)
from colcorr.blockstore import read_block, roundtrip_bytes
from colcorr.ingest import TAXI_GROUPS, TAXI_TARGET, gen_city_zip, gen_lineitem_dates, gen_taxi_amounts
from colcorr.model import Block, ColumnVector, LogicalType, days_since_epoch
from colcorr.planner import EncodingPlan, MultiRefConfig, plan_block

CSV_COLUMNS = [
    "codec", "query_shape", "selectivity", "seed", "rows_selected",
    "mean_ns", "min_ns", "max_ns", "slowdown_vs_baseline",
]


def test_full_selectivity_is_every_row():
    sel = gen_selection_vector(1234, 1.0, seed=9)
    assert np.array_equal(sel.indices, np.arange(1234))


def test_selection_count_arithmetic():
    assert len(gen_selection_vector(1_000_000, 0.001, seed=1)) == 1000
    for s in DEFAULT_GRID:
        sel = gen_selection_vector(10_007, s, seed=3)
        assert len(sel) == selection_size(10_007, s) == round(s * 10_007)
        idx = sel.indices
        assert np.all(np.diff(idx) > 0) and idx[0] >= 0 and idx[-1] < 10_007


def test_selection_deterministic_per_seed():
    a = gen_selection_vector(50_000, 0.1, seed=4)
    b = gen_selection_vector(50_000, 0.1, seed=4)
    c = gen_selection_vector(50_000, 0.1, seed=5)
    assert np.array_equal(a.indices, b.indices)
    assert not np.array_equal(a.indices, c.indices)


def test_selection_uniformity():
    sel = gen_selection_vector(1_000_000, 0.1, seed=0)
    counts = np.bincount(sel.indices // 10_000, minlength=100)
    assert chisquare(counts).pvalue > 0.001


@pytest.mark.parametrize("bad", [0.0, -0.1, 1.5])
def test_selectivity_bounds(bad):
    with pytest.raises(ValueError):
        gen_selection_vector(10, bad, seed=0)


def test_grid_parsing():
    assert parse_grid("0.01,0.1,1.0") == (0.01, 0.1, 1.0)
    with pytest.raises(ValueError):
        parse_grid("0.5,2")
    assert DEFAULT_GRID[:2] == (0.001, 0.002) and DEFAULT_GRID[-1] == 1.0


def _figure_one_handle():
    ship = [days_since_epoch(d) for d in ("1992-01-02", "1998-12-01", "2024-06-08")]
    commit = [days_since_epoch(d) for d in ("1992-03-10", "1998-09-04", "2024-06-16")]
    blk = Block((ColumnVector("shipdate", LogicalType.DATE, ship), ColumnVector("commitdate", LogicalType.DATE, commit)))
    return read_block(roundtrip_bytes(blk, EncodingPlan.from_text("shipdate = vertical\ncommitdate = nonhier shipdate\n")))


def test_figure_one_selection():
    h = _figure_one_handle()
    got = materialize(h, ["commitdate"], SelectionVector(np.array([0, 2]), 2 / 3, 0))
    assert list(got["commitdate"]) == [days_since_epoch("1992-03-10"), days_since_epoch("2024-06-16")]


def test_full_materialize_is_full_decode():
    blk = gen_lineitem_dates(3000, seed=1)
    p, _ = plan_block(blk.columns)
    h = read_block(roundtrip_bytes(blk, p))
    got = materialize(h, blk.names, gen_selection_vector(3000, 1.0, 0))
    for c in blk.columns:
        assert np.array_equal(got[c.name], c.values)


def _all_codec_blocks(n=4000):
    date = gen_lineitem_dates(n, seed=2)
    cz = gen_city_zip(n, seed=2, cities=20, zips_per_city=4)
    taxi = gen_taxi_amounts(n, seed=2)
    return [
        (date, plan_block(date.columns)[0]),
        (cz, EncodingPlan.from_text("city = dict\nzip = hier city\n")),
        (taxi, plan_block(taxi.columns, [MultiRefConfig(TAXI_TARGET, TAXI_GROUPS)])[0]),
    ]


def test_correctness_gate_every_codec():
    kinds = set()
    for blk, p in _all_codec_blocks():
        run_latency_suite([blk], [p], grid=DEFAULT_GRID, repetitions=3, seed=0, verify_only=True)
        kinds |= {c.kind for c in p.columns.values()}
    assert {"nonhier", "hier", "multiref"} <= kinds


def test_verification_catches_corruption(monkeypatch):
    blk, p = _all_codec_blocks(500)[0]
    h = read_block(roundtrip_bytes(blk, p))
    real = type(h).materialize

    def broken(self, names, indices):
        out = real(self, names, indices)
        return {k: v + 1 if k == "receiptdate" else v for k, v in out.items()}

    monkeypatch.setattr(type(h), "materialize", broken)
    with pytest.raises(VerificationError):
        run_latency_suite([h], grid=(0.5,), repetitions=1, verify_only=True)


def test_report_csv_schema():
    blk, p = _all_codec_blocks(2000)[0]
    rep = run_latency_suite([blk], [p], grid=(0.01, 1.0), repetitions=2, seed=3)
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows[0] == CSV_COLUMNS == list(LatencyReport.COLUMNS)
    body = rows[1:]
    # two targets x two selectivities x five rows
    assert len(body) == 2 * 2 * 5
    for r in body:
        assert r[1] in ("diff-column-only", "both-columns", "uncompressed")
        float(r[2]), int(r[3]), int(r[4]), float(r[5]), int(r[6]), int(r[7]), float(r[8])
    assert "slowdown" in rep.to_table()


def test_baseline_against_itself_is_one():
    blk, p = _all_codec_blocks(2000)[0]
    rep = run_latency_suite([blk], [p], grid=(0.1,), repetitions=2)
    assert all(r.slowdown_vs_baseline == 1.0 for r in rep.rows if r.codec.startswith("vertical:"))


def test_both_columns_cheaper_than_diff_only_at_full_scan():
    blk = gen_lineitem_dates(1_000_000, seed=7)
    p, _ = plan_block(blk.columns)
    rep = run_latency_suite([blk], [p], grid=(1.0,), repetitions=3, seed=0)
    for target in ("receiptdate", "commitdate"):
        rows = {r.query_shape: r for r in rep.rows if r.codec == f"nonhier:{target}"}
        assert rows["both-columns"].slowdown_vs_baseline <= rows["diff-column-only"].slowdown_vs_baseline
