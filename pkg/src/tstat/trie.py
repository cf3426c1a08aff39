"""Per-block tries over sub-sketches, node reduction and breadth-first layout.

Two builders produce the same :class:`TrieLayout`:

* :func:`build_trie` / :func:`reduce` / :func:`bfs_layout` work on an
  explicit pointer tree and serve as the reference.
* :func:`layout_from_block` derives the layout straight from the
  lexicographically sorted sub-sketches, one vectorised pass per level.

Within a level, nodes are ordered by parent then by edge label; internal
nodes and leaves are numbered independently from zero.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BlockConfig",
    "TrieNode",
    "TrieStats",
    "LevelLayout",
    "TrieLayout",
    "build_trie",
    "reduce",
    "bfs_layout",
    "layout_from_block",
    "pointer_search",
]


@dataclass(frozen=True)
class BlockConfig:
    L: int
    B: int

    def __post_init__(self):
        if self.B < 1 or self.L < 1 or self.L % self.B:
            raise ValueError(f"B={self.B} must divide L={self.L}")

    @property
    def block_len(self) -> int:
        return self.L // self.B

    def split(self, sketches) -> list:
        """Column blocks ``S^1 .. S^B`` of an ``(n, L)`` sketch matrix."""
        S = np.asarray(sketches)
        if S.ndim == 1:
            S = S[None, :]
        if S.shape[1] != self.L:
            raise ValueError(f"sketch length {S.shape[1]} does not match L={self.L}")
        w = self.block_len
        return [S[:, j * w:(j + 1) * w] for j in range(self.B)]


class TrieNode:
    """Node of a pointer trie. Leaves carry the ids of their sub-sketches."""

    __slots__ = ("children", "ids", "weight", "level")

    def __init__(self, level=0):
        self.children = {}
        self.ids = []
        self.weight = 0
        self.level = level

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def iter_nodes(self):
        stack = [self]
        while stack:
            u = stack.pop()
            yield u
            stack.extend(u.children.values())

    def leaf_ids(self) -> list:
        return sorted(i for u in self.iter_nodes() if u.is_leaf for i in u.ids)

    def __repr__(self):
        kind = "leaf" if self.is_leaf else "internal"
        return f"TrieNode({kind}, level={self.level}, weight={self.weight})"


@dataclass
class TrieStats:
    N: int
    N_in: int
    internal_per_level: list
    leaves_per_level: list

    @property
    def leaves(self) -> int:
        return self.N - self.N_in


def _sorted_order(S, ids):
    # lexsort: last key is primary
    keys = [ids] + [S[:, c] for c in range(S.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def _as_block(block_sketches, ids):
    S = np.asarray(block_sketches)
    if S.ndim != 2:
        try:
            S = np.array([list(r) for r in block_sketches])
        except TypeError:
            raise ValueError("sub-sketches must be sequences") from None
        if S.ndim != 2:
            raise ValueError("all sub-sketches must have the same length")
    n = S.shape[0]
    if ids is None:
        ids = np.arange(n, dtype=np.int64)
    else:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.shape != (n,):
            raise ValueError("need exactly one id per sub-sketch")
    return S.astype(np.int64), ids


def build_trie(block_sketches, ids=None) -> TrieNode:
    """Build the pointer trie of equal-length sub-sketches.

    Rows are sorted lexicographically first and inserted as runs, so
    each insertion only walks the part of the path that differs from the
    previous row.
    """
    S, ids = _as_block(block_sketches, ids)
    n, depth = S.shape
    root = TrieNode(0)
    if n == 0:
        return root
    order = _sorted_order(S, ids)
    path = [root]
    prev = None
    for r in order:
        row = S[r]
        if prev is None:
            common = 0
        else:
            diff = np.flatnonzero(row != prev)
            common = int(diff[0]) if diff.size else depth
        del path[common + 1:]
        for lvl in range(common, depth):
            child = TrieNode(lvl + 1)
            path[-1].children[int(row[lvl])] = child
            path.append(child)
        path[-1].ids.append(int(ids[r]))
        prev = row
    _set_weights(root)
    return root


def _set_weights(root):
    # post-order without recursion
    order = list(root.iter_nodes())
    for u in reversed(order):
        u.weight = len(u.ids) + sum(c.weight for c in u.children.values())


def reduce(root: TrieNode, lam: int) -> TrieNode:
    """Collapse every maximal subtree of weight at most *lam* into a leaf.

    Returns a new trie; *root* is left untouched. ``lam = 0`` copies.
    """
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")

    def walk(u):
        v = TrieNode(u.level)
        v.weight = u.weight
        if u.weight <= lam or u.is_leaf:
            v.ids = u.leaf_ids()
            return v
        for label in sorted(u.children):
            v.children[label] = walk(u.children[label])
        return v

    return walk(root)


@dataclass
class LevelLayout:
    """Nodes of one trie level in breadth-first order.

    ``*_parent`` is the index of the parent among the internal nodes of
    the previous level (``-1`` for the root) and ``*_label`` the edge
    label leading to the node.
    """

    internal_parent: np.ndarray
    internal_label: np.ndarray
    leaf_parent: np.ndarray
    leaf_label: np.ndarray
    leaf_sizes: np.ndarray
    leaf_ids: np.ndarray = field(repr=False)

    @property
    def n_internal(self) -> int:
        return self.internal_parent.size

    @property
    def n_leaves(self) -> int:
        return self.leaf_parent.size

    def equals(self, other: "LevelLayout") -> bool:
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("internal_parent", "internal_label", "leaf_parent",
                      "leaf_label", "leaf_sizes", "leaf_ids")
        )


@dataclass
class TrieLayout:
    depth: int
    n: int
    levels: list

    @property
    def stats(self) -> TrieStats:
        ins = [lv.n_internal for lv in self.levels]
        lvs = [lv.n_leaves for lv in self.levels]
        return TrieStats(sum(ins) + sum(lvs), sum(ins), ins, lvs)

    def equals(self, other: "TrieLayout") -> bool:
        return (self.depth == other.depth and self.n == other.n
                and len(self.levels) == len(other.levels)
                and all(a.equals(b) for a, b in zip(self.levels, other.levels)))


def _level(ip, il, lp, ll, ls, ids):
    i64 = lambda x: np.asarray(x, dtype=np.int64)
    return LevelLayout(i64(ip), i64(il), i64(lp), i64(ll), i64(ls), i64(ids))


def bfs_layout(root: TrieNode, depth: int | None = None) -> TrieLayout:
    """Number the nodes of a pointer trie level by level."""
    if depth is None:
        depth = max(u.level for u in root.iter_nodes())
    cols = [([], [], [], [], [], []) for _ in range(depth + 1)]
    counters = [[0, 0] for _ in range(depth + 1)]
    queue = deque([(root, -1, -1)])
    while queue:
        u, parent, label = queue.popleft()
        ip, il, lp, ll, ls, ids = cols[u.level]
        if u.is_leaf:
            lp.append(parent)
            ll.append(label)
            ls.append(len(u.ids))
            ids.extend(sorted(u.ids))
            counters[u.level][1] += 1
        else:
            idx = counters[u.level][0]
            counters[u.level][0] += 1
            ip.append(parent)
            il.append(label)
            for c in sorted(u.children):
                queue.append((u.children[c], idx, c))
    return TrieLayout(depth, root.weight, [_level(*c) for c in cols])


def layout_from_block(block_sketches, lam: int = 0, ids=None) -> TrieLayout:
    """Breadth-first layout of the reduced trie, built from sorted rows.

    Equivalent to ``bfs_layout(reduce(build_trie(S, ids), lam), depth)``
    without materialising nodes. At level ``l`` a group of rows sharing
    an ``l``-prefix is a node; it is internal when its parent is internal,
    its weight exceeds *lam* and ``l`` is below the block length.
    """
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    S, ids = _as_block(block_sketches, ids)
    n, depth = S.shape
    if n == 0:
        raise ValueError("cannot lay out a trie over zero sketches")
    order = _sorted_order(S, ids)
    Ss = S[order]
    sorted_ids = ids[order]
    starts_mask = np.zeros(n, dtype=bool)
    starts_mask[0] = True
    prev_row_group = np.zeros(n, dtype=np.int64)
    prev_internal_idx = np.array([-1], dtype=np.int64)
    levels = []
    for lvl in range(depth + 1):
        if lvl > 0:
            starts_mask[1:] |= Ss[1:, lvl - 1] != Ss[:-1, lvl - 1]
        starts = np.flatnonzero(starts_mask)
        weights = np.diff(np.append(starts, n))
        row_group = np.cumsum(starts_mask) - 1
        if lvl == 0:
            parent_idx = np.array([-1], dtype=np.int64)
            labels = np.array([-1], dtype=np.int64)
            alive = np.ones(1, dtype=bool)
        else:
            parent_idx = prev_internal_idx[prev_row_group[starts]]
            labels = Ss[starts, lvl - 1]
            alive = parent_idx >= 0
        internal = alive & (weights > lam) & (lvl < depth)
        leaf = alive & ~internal
        internal_idx = np.where(internal, np.cumsum(internal) - 1, -1)
        in_leaf = leaf[row_group]
        # collapsed leaves list their ids ascending
        leaf_rows = np.flatnonzero(in_leaf)
        leaf_rows = leaf_rows[np.lexsort((sorted_ids[leaf_rows], row_group[leaf_rows]))]
        levels.append(_level(
            parent_idx[internal], labels[internal],
            parent_idx[leaf], labels[leaf], weights[leaf],
            sorted_ids[leaf_rows],
        ))
        prev_row_group = row_group
        prev_internal_idx = internal_idx
    return TrieLayout(depth, n, levels)


def pointer_search(root: TrieNode, query, K: int):
    """Depth-first thresholded search over a pointer trie.

    Returns ``(ids, reached)`` where *ids* is the sorted union of ids at
    leaves reached with at most *K* mismatches and *reached* counts the
    nodes whose running mismatch count stayed within *K*.
    """
    query = [int(x) for x in query]
    out = []
    reached = 0
    stack = [(root, 0)]
    while stack:
        u, dist = stack.pop()
        reached += 1
        if u.is_leaf:
            out.extend(u.ids)
            continue
        q = query[u.level]
        for label in sorted(u.children, reverse=True):
            nd = dist + (label != q)
            if nd <= K:
                stack.append((u.children[label], nd))
    return sorted(out), reached
