"""Selection-vector materialization benchmark.

For every horizontally encoded column the suite times three query shapes at
each selectivity: the diff-encoded column alone, the column together with its
references, and the same columns read from uncompressed arrays. Each run is
checked against the uncompressed values before it is timed, and the same
selection vectors are used for the compressed and baseline blocks.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from .blockstore import BlockHandle, read_block, roundtrip_bytes
from .model import Block
from .planner import EncodingPlan

log = logging.getLogger(__name__)

DEFAULT_GRID = (0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 0.9, 1.0)
SHAPES = ("diff-column-only", "both-columns", "uncompressed")


class VerificationError(AssertionError):
    """Materialized output differs from the uncompressed values."""


@dataclass(frozen=True)
class SelectionVector:
    indices: np.ndarray
    selectivity: float
    seed: int

    def __len__(self) -> int:
        return len(self.indices)


def selection_size(row_count: int, selectivity: float) -> int:
    return int(round(selectivity * row_count))


def gen_selection_vector(row_count: int, selectivity: float, seed: int) -> SelectionVector:
    """Uniform sample of round(selectivity * row_count) distinct rows, sorted."""
    if not 0 < selectivity <= 1:
        raise ValueError(f"selectivity must be in (0, 1], got {selectivity}")
    k = selection_size(row_count, selectivity)
    if k == row_count:
        idx = np.arange(row_count, dtype=np.int64)
    else:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(row_count, size=k, replace=False)).astype(np.int64)
    idx.setflags(write=False)
    return SelectionVector(idx, selectivity, seed)


def parse_grid(text: str) -> tuple[float, ...]:
    grid = tuple(float(x) for x in text.split(",") if x.strip())
    for s in grid:
        if not 0 < s <= 1:
            raise ValueError(f"selectivity {s} outside (0, 1]")
    return grid


def materialize(handle: BlockHandle, columns: Sequence[str], sel: SelectionVector | np.ndarray) -> dict[str, np.ndarray]:
    indices = sel.indices if isinstance(sel, SelectionVector) else np.asarray(sel, dtype=np.int64)
    return handle.materialize(list(columns), indices)


@dataclass(frozen=True)
class LatencyRow:
    codec: str
    query_shape: str
    selectivity: float
    seed: int
    rows_selected: int
    mean_ns: float
    min_ns: int
    max_ns: int
    slowdown_vs_baseline: float


@dataclass
class LatencyReport:
    rows: list[LatencyRow] = field(default_factory=list)

    COLUMNS = tuple(f.name for f in fields(LatencyRow))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for r in self.rows:
            w.writerow(
                [r.codec, r.query_shape, repr(r.selectivity), r.seed, r.rows_selected,
                 f"{r.mean_ns:.1f}", r.min_ns, r.max_ns, f"{r.slowdown_vs_baseline:.4f}"]
            )
        return buf.getvalue()

    def to_table(self) -> str:
        head = f"{'codec':<28} {'shape':<17} {'sel':>6} {'rows':>9} {'mean_us':>10} {'slowdown':>9}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(
                f"{r.codec:<28} {r.query_shape:<17} {r.selectivity:>6g} {r.rows_selected:>9} "
                f"{r.mean_ns / 1e3:>10.1f} {r.slowdown_vs_baseline:>9.3f}"
            )
        return "\n".join(lines) + "\n"


def _equal(a: np.ndarray, b: np.ndarray) -> bool:
    return len(a) == len(b) and bool(np.all(a == b))


def _timed(fn) -> tuple[int, object]:
    t0 = time.perf_counter_ns()
    out = fn()
    return time.perf_counter_ns() - t0, out


def _targets(handle: BlockHandle) -> list[tuple[str, str, tuple[str, ...]]]:
    out = []
    for name in handle.names:
        refs = handle.references(name)
        if refs:
            out.append((handle.encoding(name), name, refs))
    return out


def _as_handles(blocks, plans) -> list[BlockHandle]:
    handles = []
    for i, b in enumerate(blocks):
        if isinstance(b, BlockHandle):
            handles.append(b)
            continue
        p = plans[i] if isinstance(plans, (list, tuple)) else plans
        handles.append(read_block(roundtrip_bytes(b, p)))
    return handles


def run_latency_suite(
    blocks: Sequence[Block | BlockHandle],
    plans: EncodingPlan | Sequence[EncodingPlan] | None = None,
    grid: Sequence[float] = DEFAULT_GRID,
    repetitions: int = 10,
    seed: int = 0,
    verify_only: bool = False,
) -> LatencyReport:
    """Time materialization for every horizontally encoded column.

    Repetition ``r`` uses selection vectors seeded with ``seed + r``. Any
    mismatch against the uncompressed values raises VerificationError before
    the run is timed.
    """
    if not blocks:
        raise ValueError("need at least one block")
    corra = _as_handles(blocks, plans)
    # original blocks are the oracle; handles can only offer their full decode
    raw = [b if isinstance(b, Block) else h.to_block() for b, h in zip(blocks, corra)]
    baseline = [read_block(roundtrip_bytes(b, EncodingPlan.all_vertical(b.names))) for b in raw]
    targets = _targets(corra[0])
    report = LatencyReport()
    for kind, target, refs in targets:
        label = f"{kind}:{target}"
        shape_cols = {"diff-column-only": [target], "both-columns": [target, *refs]}
        for s in grid:
            times = {key: [] for key in ("corra-diff", "corra-both", "base-diff", "base-both", "raw")}
            selected = sum(selection_size(b.row_count, s) for b in raw)
            for rep in range(repetitions):
                for h, bh, blk in zip(corra, baseline, raw):
                    sel = gen_selection_vector(blk.row_count, s, seed + rep)
                    both = shape_cols["both-columns"]
                    truth = {c: blk[c].values[sel.indices] for c in both}
                    for handle, who in ((h, "corra"), (bh, "baseline")):
                        for cols in shape_cols.values():
                            got = materialize(handle, cols, sel)
                            for c in cols:
                                if not _equal(got[c], truth[c]):
                                    raise VerificationError(
                                        f"{who} {label}: column {c} differs at selectivity {s}, seed {seed + rep}"
                                    )
                    if verify_only:
                        continue
                    for handle, prefix in ((h, "corra"), (bh, "base")):
                        times[f"{prefix}-diff"].append(_timed(lambda: materialize(handle, [target], sel))[0])
                        times[f"{prefix}-both"].append(_timed(lambda: materialize(handle, both, sel))[0])
                    arrays = {c: blk[c].values for c in both}
                    times["raw"].append(_timed(lambda: {c: a[sel.indices] for c, a in arrays.items()})[0])
            if verify_only:
                continue
            stats = {k: (float(np.mean(v)), int(np.min(v)), int(np.max(v))) for k, v in times.items()}

            def row(codec: str, shape: str, key: str, base_key: str) -> LatencyRow:
                mean, lo, hi = stats[key]
                return LatencyRow(codec, shape, s, seed, selected, mean, lo, hi, mean / max(stats[base_key][0], 1.0))

            report.rows += [
                row(label, "diff-column-only", "corra-diff", "base-diff"),
                row(label, "both-columns", "corra-both", "base-both"),
                row(label, "uncompressed", "raw", "base-both"),
                row(f"vertical:{target}", "diff-column-only", "base-diff", "base-diff"),
                row(f"vertical:{target}", "both-columns", "base-both", "base-both"),
            ]
            log.info("%s selectivity %g done", label, s)
    return report
