from .asim import AsimParams, AsimTrace, asim_join
from .common import RunContext, Segment
from .nested import co_join, nested_loop_join
from .osim import OsimParams, hp_repetitions, osim_join, osim_join_hp, sample_filter
from .partition import Buckets, match_buckets, partition_by_hash

__all__ = [
    "AsimParams", "AsimTrace", "asim_join", "RunContext", "Segment", "co_join",
    "nested_loop_join", "OsimParams", "hp_repetitions", "osim_join", "osim_join_hp",
    "sample_filter", "Buckets", "match_buckets", "partition_by_hash",
]
