"""LSH similarity joins on a simulated external-memory machine."""
from .em import BlockStore, EmConfig, IoStats, sort_external
from .joins import (AsimParams, AsimTrace, OsimParams, asim_join, nested_loop_join, osim_join,
                    osim_join_hp)
from .lsh import ConcatFamily, LshFamily, sensitize
from .oracle import JoinParams, brute_force_join, classify_counts, compute_cdf
from .points import Point, PointError, Relation, distance, pairwise_distances
from .sink import CollisionStats, EmissionSink, dedupe_decision, dedupe_probability

__version__ = "0.1.0"

__all__ = [
    "BlockStore", "EmConfig", "IoStats", "sort_external", "AsimParams", "AsimTrace",
    "OsimParams", "asim_join", "nested_loop_join", "osim_join", "osim_join_hp",
    "ConcatFamily", "LshFamily", "sensitize", "JoinParams", "brute_force_join",
    "classify_counts", "compute_cdf", "Point", "PointError", "Relation", "distance",
    "pairwise_distances", "CollisionStats", "EmissionSink", "dedupe_decision",
    "dedupe_probability",
]
