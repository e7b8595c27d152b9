"""Command-line front end: generate, plan, compress, stats, query, bench."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import bench, blockstore, ingest
from .model import BLOCK_CAPACITY, Block, LogicalType, SizeReport
from .planner import DEFAULT_OUTLIER_THRESHOLD, EncodingPlan, MultiRefConfig, plan_block
from .wire import FormatError

log = logging.getLogger("colcorr")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_VERIFY = 4


class InputError(Exception):
    pass


def parse_multiref_config(text: str) -> list[MultiRefConfig]:
    """``target = col`` starts a section; following ``LABEL = c1,c2`` lines declare its groups."""
    configs: list[MultiRefConfig] = []
    target, groups = None, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        if not sep:
            raise InputError(f"multiref config line {lineno}: expected 'key = value'")
        if key == "target":
            if target is not None:
                configs.append(MultiRefConfig(target, tuple(groups)))
            target, groups = value, []
        else:
            if target is None:
                raise InputError(f"multiref config line {lineno}: group before any 'target ='")
            groups.append(tuple(c.strip() for c in value.split(",") if c.strip()))
    if target is not None:
        configs.append(MultiRefConfig(target, tuple(groups)))
    return configs


def multiref_config_text(target: str, groups) -> str:
    lines = [f"target = {target}"]
    lines += [f"{chr(65 + i)} = {','.join(g)}" for i, g in enumerate(groups)]
    return "\n".join(lines) + "\n"


def _load_multiref(path: str | None) -> list[MultiRefConfig]:
    return parse_multiref_config(Path(path).read_text()) if path else []


def _load_blocks(args) -> tuple[list[Block], ingest.TableSchema | None]:
    src = Path(args.input)
    if src.is_dir():
        return [h.to_block() for h in blockstore.read_table(src)], None
    if not args.schema:
        raise InputError("--schema is required for CSV input")
    schema = ingest.TableSchema.load(args.schema)
    result = ingest.parse_csv(src, schema, args.block_size)
    for rej in result.rejected:
        print(f"rejected line {rej.line}: {rej.reason}", file=sys.stderr)
    return result.blocks, schema


def _emit(rows: list[list], header: list[str], as_csv: bool, out) -> None:
    if as_csv:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)] if rows else [len(h) for h in header]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    print(fmt.format(*header), file=out)
    for r in rows:
        print(fmt.format(*[str(x) for x in r]), file=out)


def cmd_generate(args) -> int:
    params = {}
    if args.kind == "city-zip":
        params = {"cities": args.cities, "zips_per_city": args.zips_per_city}
    blocks, schema = ingest.generate(args.kind, args.rows, args.seed, args.block_size, **params)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        ingest.write_csv(blocks, schema, fh)
    out.with_suffix(".schema").write_text(schema.to_text())
    written = [str(out), str(out.with_suffix(".schema"))]
    if args.kind == "taxi-amounts":
        cfg = out.with_suffix(".multiref")
        cfg.write_text(multiref_config_text(ingest.TAXI_TARGET, ingest.TAXI_GROUPS))
        written.append(str(cfg))
    print(f"generated {sum(b.row_count for b in blocks)} rows in {len(blocks)} block(s): {', '.join(written)}")
    return EXIT_OK


def cmd_plan(args) -> int:
    blocks, _ = _load_blocks(args)
    if not blocks:
        raise InputError("input holds no rows")
    p, graph = plan_block(blocks[0].columns, _load_multiref(args.multiref), args.outlier_threshold)
    text = p.to_text()
    if args.out:
        Path(args.out).write_text(text)
    if args.graph:
        Path(args.graph).write_text(graph.dump())
    sys.stdout.write(text)
    return EXIT_OK


def cmd_compress(args) -> int:
    blocks, _ = _load_blocks(args)
    if args.clean_taxi:
        blocks = [ingest.clean_taxi(b, args.pickup, args.dropoff) for b in blocks]
    multiref = _load_multiref(args.multiref)
    if args.plan:
        fixed = EncodingPlan.from_text(Path(args.plan).read_text())
        plans = fixed
    else:
        def plans(block: Block) -> EncodingPlan:
            return plan_block(block.columns, multiref, args.outlier_threshold)[0]

    paths = blockstore.write_table(blocks, plans, args.out)
    total = sum(p.stat().st_size for p in paths)
    print(f"wrote {len(paths)} block(s), {total} bytes to {args.out}")
    return EXIT_OK


def _stats_rows(handles) -> list[SizeReport]:
    agg: dict[str, list] = {}
    for h in handles:
        for r in blockstore.block_stats(h):
            entry = agg.setdefault(r.column, [0, 0, set()])
            entry[0] += r.baseline_bytes
            entry[1] += r.encoded_bytes
            entry[2].add(r.encoding)
    return [SizeReport(c, b, e, "/".join(sorted(k))) for c, (b, e, k) in agg.items()]


def cmd_stats(args) -> int:
    reports = _stats_rows(blockstore.read_table(args.input))
    rows = [[r.column, r.encoding, r.baseline_bytes, r.encoded_bytes, f"{r.saving_rate:.4f}"] for r in reports]
    _emit(rows, ["column", "encoding", "baseline_bytes", "encoded_bytes", "saving_rate"], args.csv, sys.stdout)
    return EXIT_OK


def cmd_query(args) -> int:
    handles = blockstore.read_table(args.input)
    columns = [c for c in args.columns.split(",") if c.strip()] if args.columns else None
    specs = {}
    if args.schema:
        specs = {c.name: c for c in ingest.TableSchema.load(args.schema).columns}
    out = sys.stdout
    w = csv.writer(out, lineterminator="\n")
    total = 0
    for i, h in enumerate(handles):
        cols = columns or h.names
        for c in cols:
            if c not in h:
                raise InputError(f"unknown column {c!r}")
        sel = bench.gen_selection_vector(h.row_count, args.selectivity, args.seed + i)
        total += len(sel)
        if args.count:
            continue
        values = bench.materialize(h, cols, sel)
        if i == 0:
            w.writerow(cols)
        fmt = [specs.get(c) or ingest.ColumnSpec(c, h.ltype(c), _default_fmt(h.ltype(c))) for c in cols]
        for j in range(len(sel)):
            w.writerow([ingest.format_value(values[c][j], s) for c, s in zip(cols, fmt)])
    if args.count:
        print(total)
    return EXIT_OK


def _default_fmt(ltype: LogicalType) -> str | None:
    if ltype is LogicalType.DATE:
        return ingest.DEFAULT_DATE_FORMAT
    if ltype is LogicalType.TIMESTAMP:
        return ingest.DEFAULT_TIMESTAMP_FORMAT
    return None


def cmd_bench(args) -> int:
    handles = blockstore.read_table(args.input)
    grid = bench.parse_grid(args.grid) if args.grid else bench.DEFAULT_GRID
    report = bench.run_latency_suite(handles, None, grid, args.repetitions, args.seed)
    if args.out:
        Path(args.out).write_text(report.to_csv())
    sys.stdout.write(report.to_csv() if args.csv else report.to_table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    grid_help = "comma-separated selectivities in (0, 1]; default " + ",".join(f"{s:g}" for s in bench.DEFAULT_GRID)
    p = argparse.ArgumentParser(prog="colcorr", description="Correlation-aware column compression.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def input_opts(sp) -> None:
        sp.add_argument("input", help="CSV file or block directory")
        sp.add_argument("--schema", help="schema file (required for CSV input)")
        sp.add_argument("--block-size", type=int, default=BLOCK_CAPACITY)
        sp.add_argument("--multiref", help="multi-reference group config")
        sp.add_argument("--outlier-threshold", type=float, default=DEFAULT_OUTLIER_THRESHOLD)

    g = sub.add_parser("generate", help="write a synthetic correlated dataset as CSV")
    g.add_argument("kind", choices=sorted(ingest.GENERATORS))
    g.add_argument("--rows", type=int, default=BLOCK_CAPACITY)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="CSV path; schema is written next to it")
    g.add_argument("--block-size", type=int, default=BLOCK_CAPACITY)
    g.add_argument("--cities", type=int, default=1000)
    g.add_argument("--zips-per-city", type=int, default=64)
    g.set_defaults(func=cmd_generate)

    pl = sub.add_parser("plan", help="choose reference and diff-encoded columns")
    input_opts(pl)
    pl.add_argument("--out", help="write the plan file here")
    pl.add_argument("--graph", help="write the candidate graph here")
    pl.set_defaults(func=cmd_plan)

    c = sub.add_parser("compress", help="encode a CSV into a block directory")
    input_opts(c)
    c.add_argument("--out", required=True, help="output block directory")
    c.add_argument("--plan", help="apply this plan to every block instead of planning per block")
    c.add_argument("--clean-taxi", action="store_true", help="drop dropoff<pickup rows and out-of-range amounts")
    c.add_argument("--pickup", default="pickup")
    c.add_argument("--dropoff", default="dropoff")
    c.set_defaults(func=cmd_compress)

    s = sub.add_parser("stats", help="per-column sizes and saving rates")
    s.add_argument("input", help="block directory")
    s.add_argument("--csv", action="store_true")
    s.set_defaults(func=cmd_stats)

    q = sub.add_parser("query", help="materialize a random selection")
    q.add_argument("input", help="block directory")
    q.add_argument("--columns", help="comma-separated columns (default: all)")
    q.add_argument("--selectivity", type=float, default=1.0)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--schema", help="schema file used to format output values")
    q.add_argument("--count", action="store_true", help="print only the number of selected rows")
    q.set_defaults(func=cmd_query)

    b = sub.add_parser("bench", help="selection-vector latency suite")
    b.add_argument("input", help="block directory")
    b.add_argument("--grid", help=grid_help)
    b.add_argument("--repetitions", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", help="write the report CSV here")
    b.add_argument("--csv", action="store_true", help="print CSV instead of a table")
    b.set_defaults(func=cmd_bench)
    return p


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except bench.VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (InputError, FormatError, blockstore.PlanMismatchError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
