"""Greedy choice of reference and diff-encoded columns.

Every candidate edge ``a -> b`` carries the exact size of ``a`` encoded
against reference ``b``. Edges are accepted by decreasing saving over the
vertical size of ``a`` while keeping the configuration two-level: a
reference column is never itself diff-encoded.
"""

from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence


from .hier import hier_size_from_codes
from .model import ColumnVector, LogicalType, units_compatible
from .multiref import FormulaSet, estimate_multiref_size, select_formulas
from .nonhier import estimate_diff_size
from .vertical import first_occurrence_codes, vertical_sizes

log = logging.getLogger(__name__)

DEFAULT_OUTLIER_THRESHOLD = 0.05

_TOTAL_LINE = re.compile(r"^#\s*(\w+)\s*=\s*(\d+)\s*$")

VERTICAL_KINDS = ("vertical", "for", "dict")
HORIZONTAL_KINDS = ("nonhier", "hier", "multiref")


@dataclass(frozen=True)
class MultiRefConfig:
    """User-declared reference groups for one target column."""

    target: str
    groups: tuple[tuple[str, ...], ...]


@dataclass(frozen=True)
class Vertex:
    name: str
    vertical_bytes: int
    vertical_kind: str
    dict_bytes: int


@dataclass(frozen=True)
class Edge:
    source: str  # column that gets diff-encoded
    references: tuple[str, ...]
    kind: str
    weight: int  # encoded size of ``source`` w.r.t. ``references``
    penalty: int = 0  # extra bytes for switching a hier reference to its dictionary form
    formula_set: FormulaSet | None = None
    outlier_rate: float = 0.0


@dataclass
class CandidateGraph:
    vertices: dict[str, Vertex]
    edges: list[Edge]

    def saving(self, e: Edge) -> int:
        return self.vertices[e.source].vertical_bytes - e.weight - e.penalty

    def dump(self) -> str:
        lines = ["# vertices: column vertical_bytes kind"]
        for v in self.vertices.values():
            lines.append(f"{v.name} {v.vertical_bytes} {v.vertical_kind}")
        lines.append("# edges: source -> reference kind weight saving")
        for e in sorted(self.edges, key=lambda e: (e.source, e.references, e.kind)):
            lines.append(f"{e.source} -> {'+'.join(e.references)} {e.kind} {e.weight} {self.saving(e)}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ColumnPlan:
    kind: str
    reference: str | None = None
    formula_set: FormulaSet | None = None

    @property
    def references(self) -> tuple[str, ...]:
        if self.kind == "multiref":
            return self.formula_set.columns
        return (self.reference,) if self.reference else ()


@dataclass
class EncodingPlan:
    columns: dict[str, ColumnPlan]
    predicted_bytes: int = 0
    vertical_bytes: int = 0
    notes: list[str] = field(default_factory=list)

    def __getitem__(self, name: str) -> ColumnPlan:
        return self.columns[name]

    def references_of(self, name: str) -> tuple[str, ...]:
        return self.columns[name].references

    @classmethod
    def all_vertical(cls, names: Iterable[str]) -> "EncodingPlan":
        return cls({n: ColumnPlan("vertical") for n in names})

    def validate(self) -> None:
        """Raise ValueError unless the plan is two-level and self-consistent."""
        encoded = {n for n, p in self.columns.items() if p.kind in HORIZONTAL_KINDS}
        for name, p in self.columns.items():
            if p.kind not in VERTICAL_KINDS + HORIZONTAL_KINDS:
                raise ValueError(f"{name}: unknown encoding {p.kind!r}")
            for ref in p.references:
                if ref not in self.columns:
                    raise ValueError(f"{name}: reference {ref!r} is not a column of the plan")
                if ref == name:
                    raise ValueError(f"{name}: a column cannot reference itself")
                if ref in encoded:
                    raise ValueError(f"{name}: reference {ref!r} is itself diff-encoded")
                if p.kind == "hier" and self.columns[ref].kind == "for":
                    raise ValueError(f"{name}: hierarchical reference {ref!r} must be dictionary-encoded")

    def to_text(self) -> str:
        lines = ["# column = encoding [reference | groups | formulas]"]
        for name, p in self.columns.items():
            if p.kind in ("nonhier", "hier"):
                lines.append(f"{name} = {p.kind} {p.reference}")
            elif p.kind == "multiref":
                fs = p.formula_set
                groups = " ".join(f"{chr(65 + i)}:{'+'.join(g)}" for i, g in enumerate(fs.groups))
                lines.append(f"{name} = multiref {groups} | {' '.join(fs.labels)}")
            else:
                lines.append(f"{name} = {p.kind}")
        lines.append(f"# predicted_bytes = {self.predicted_bytes}")
        lines.append(f"# vertical_bytes = {self.vertical_bytes}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EncodingPlan":
        cols: dict[str, ColumnPlan] = {}
        totals = {"predicted_bytes": 0, "vertical_bytes": 0}
        for lineno, raw in enumerate(text.splitlines(), 1):
            m = _TOTAL_LINE.match(raw)
            if m and m.group(1) in totals:
                totals[m.group(1)] = int(m.group(2))
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            name, sep, rhs = line.partition("=")
            if not sep:
                raise ValueError(f"plan line {lineno}: expected 'column = encoding'")
            name, parts = name.strip(), rhs.split()
            if not parts:
                raise ValueError(f"plan line {lineno}: missing encoding")
            kind = parts[0]
            if kind in VERTICAL_KINDS and len(parts) == 1:
                cols[name] = ColumnPlan(kind)
            elif kind in ("nonhier", "hier") and len(parts) == 2:
                cols[name] = ColumnPlan(kind, parts[1])
            elif kind == "multiref":
                cols[name] = ColumnPlan(kind, formula_set=_parse_formula_set(rhs.split(None, 1)[1], lineno))
            else:
                raise ValueError(f"plan line {lineno}: cannot parse {raw.strip()!r}")
        plan = cls(cols, totals["predicted_bytes"], totals["vertical_bytes"])
        plan.validate()
        return plan


def _parse_formula_set(text: str, lineno: int) -> FormulaSet:
    groups_txt, sep, formulas_txt = text.partition("|")
    if not sep:
        raise ValueError(f"plan line {lineno}: multiref needs 'groups | formulas'")
    labels: dict[str, int] = {}
    groups = []
    for i, item in enumerate(groups_txt.split()):
        label, _, cols = item.partition(":")
        labels[label] = i
        groups.append(tuple(cols.split("+")))
    formulas = []
    for f in formulas_txt.split():
        mask = 0
        for label in f.split("+"):
            if label not in labels:
                raise ValueError(f"plan line {lineno}: unknown group {label!r}")
            mask |= 1 << labels[label]
        formulas.append(mask)
    return FormulaSet(tuple(groups), tuple(formulas))


def build_candidate_graph(
    columns: Sequence[ColumnVector],
    multiref: Sequence[MultiRefConfig] = (),
    outlier_threshold: float = DEFAULT_OUTLIER_THRESHOLD,
    hierarchical: bool = True,
) -> CandidateGraph:
    if not columns:
        raise ValueError("need at least one column")
    by_name = {c.name: c for c in columns}
    vertices = {}
    for c in columns:
        sizes = vertical_sizes(c)
        kind = "for" if "for" in sizes and sizes["for"] <= sizes["dict"] else "dict"
        vertices[c.name] = Vertex(c.name, sizes[kind], kind, sizes["dict"])

    # one edge per ordered pair: numeric pairs in the same unit get a diff
    # edge, every other pair a hierarchical one
    edges: list[Edge] = []
    ref_codes: dict[str, tuple] = {}
    for a, b in itertools.permutations(columns, 2):
        if units_compatible(a.ltype, b.ltype):
            edges.append(Edge(a.name, (b.name,), "nonhier", estimate_diff_size(a, b)))
        elif hierarchical:
            if b.name not in ref_codes:
                distinct, codes = first_occurrence_codes(b.values)
                ref_codes[b.name] = (codes, len(distinct))
            codes, n_groups = ref_codes[b.name]
            vb = vertices[b.name]
            edges.append(Edge(a.name, (b.name,), "hier", hier_size_from_codes(a, codes, n_groups), vb.dict_bytes - vb.vertical_bytes))

    for cfg in multiref:
        target = by_name[cfg.target]
        if target.ltype is LogicalType.STRING:
            raise ValueError(f"multi-reference target {cfg.target!r} must be an integer column")
        fs, rate = select_formulas(target, cfg.groups, by_name)
        size, rate = estimate_multiref_size(target, by_name, fs)
        if rate > outlier_threshold:
            log.info("multiref for %s rejected: outlier rate %.4f > %.4f", cfg.target, rate, outlier_threshold)
            continue
        edges.append(Edge(cfg.target, fs.columns, "multiref", size, formula_set=fs, outlier_rate=rate))
    return CandidateGraph(vertices, edges)


def _plan_size(graph: CandidateGraph, chosen: dict[str, Edge]) -> int:
    forced_dict = {e.references[0] for e in chosen.values() if e.kind == "hier"}
    total = 0
    for name, v in graph.vertices.items():
        if name in chosen:
            total += chosen[name].weight
        elif name in forced_dict:
            total += v.dict_bytes
        else:
            total += v.vertical_bytes
    return total


def _to_plan(graph: CandidateGraph, chosen: dict[str, Edge]) -> EncodingPlan:
    forced_dict = {e.references[0] for e in chosen.values() if e.kind == "hier"}
    cols = {}
    for name in graph.vertices:
        e = chosen.get(name)
        if e is None:
            cols[name] = ColumnPlan("dict" if name in forced_dict else "vertical")
        elif e.kind == "multiref":
            cols[name] = ColumnPlan("multiref", formula_set=e.formula_set)
        else:
            cols[name] = ColumnPlan(e.kind, e.references[0])
    vertical = sum(v.vertical_bytes for v in graph.vertices.values())
    return EncodingPlan(cols, _plan_size(graph, chosen), vertical)


def plan(graph: CandidateGraph) -> EncodingPlan:
    candidates = [e for e in graph.edges if graph.saving(e) > 0]
    candidates.sort(key=lambda e: (-graph.saving(e), e.source, e.references, e.kind))
    chosen: dict[str, Edge] = {}
    references: set[str] = set()
    for e in candidates:
        if e.source in chosen or e.source in references:
            continue
        if any(r in chosen for r in e.references):
            continue
        chosen[e.source] = e
        references.update(e.references)
    return _to_plan(graph, chosen)


def brute_force_plan(graph: CandidateGraph) -> EncodingPlan:
    """Exhaustively search all two-level configurations. Exponential; small graphs only."""
    names = list(graph.vertices)
    options: list[list[Edge | None]] = [[None] + [e for e in graph.edges if e.source == n] for n in names]
    best: dict[str, Edge] = {}
    best_size = _plan_size(graph, best)
    for combo in itertools.product(*options):
        chosen = {n: e for n, e in zip(names, combo) if e is not None}
        if any(r in chosen for e in chosen.values() for r in e.references):
            continue
        size = _plan_size(graph, chosen)
        if size < best_size:
            best, best_size = chosen, size
    return _to_plan(graph, best)


def plan_block(
    columns: Sequence[ColumnVector],
    multiref: Sequence[MultiRefConfig] = (),
    outlier_threshold: float = DEFAULT_OUTLIER_THRESHOLD,
) -> tuple[EncodingPlan, CandidateGraph]:
    graph = build_candidate_graph(columns, multiref, outlier_threshold)
    return plan(graph), graph
