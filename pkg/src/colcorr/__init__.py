"""Correlation-aware (horizontal) column compression."""

from .bitpack import PackedBuffer, min_width, pack, unpack_at
from .blockstore import BlockHandle, block_stats, read_block, write_block
from .hier import HierEncoded, hier_decode_at, hier_encode
from .model import Block, ColumnVector, LogicalType, SizeReport, days_since_epoch, saving_rate, to_civil_date
from .multiref import FormulaSet, MultiRefEncoded, OutlierStore, multiref_decode_at, multiref_encode, select_formulas
from .nonhier import NonHierEncoded, diff_decode_at, diff_encode, estimate_diff_size
from .planner import EncodingPlan, MultiRefConfig, build_candidate_graph, plan
from .vertical import DictEncoded, ForEncoded, best_vertical, dict_encode, for_encode

__version__ = "0.1.0"

__all__ = [
    "Block",
    "BlockHandle",
    "ColumnVector",
    "DictEncoded",
    "EncodingPlan",
    "ForEncoded",
    "FormulaSet",
    "HierEncoded",
    "LogicalType",
    "MultiRefConfig",
    "MultiRefEncoded",
    "NonHierEncoded",
    "OutlierStore",
    "PackedBuffer",
    "SizeReport",
    "best_vertical",
    "block_stats",
    "build_candidate_graph",
    "days_since_epoch",
    "dict_encode",
    "diff_decode_at",
    "diff_encode",
    "estimate_diff_size",
    "for_encode",
    "hier_decode_at",
    "hier_encode",
    "min_width",
    "multiref_decode_at",
    "multiref_encode",
    "pack",
    "plan",
    "read_block",
    "saving_rate",
    "select_formulas",
    "to_civil_date",
    "unpack_at",
    "write_block",
]
