"""Trajectory similarity search under discrete Fréchet distance.

Trajectories are sketched with grid LSH, sketches are split into blocks,
each block is indexed by a node-reduced trie encoded as a succinct
trit-array trie (STAT), and candidates are verified by Hamming and then
Fréchet distance.
"""

from .geometry import Trajectory, frechet_distance, frechet_leq
from .io import load_index, load_trajectories, save_index, save_trajectories
from .sketch import (
    LshParams,
    VerticalStore,
    encode_query,
    encode_vertical,
    hamming_vertical,
    make_hashers,
    sketch,
    sketch_many,
    snap_curve,
)
from .stat import (
    QueryResult,
    StatIndex,
    StatTrie,
    assign_thresholds,
    child,
    encode_stat,
    index_stats,
    leaf_ids,
    trie_search,
)
from .succinct import BitVector, TritArray, TritRank
from .trie import BlockConfig, TrieNode, bfs_layout, build_trie, layout_from_block, reduce

__version__ = "0.1.0"
