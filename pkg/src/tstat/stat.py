"""Succinct trit-array tries and the multi-index Hamming search.

A :class:`StatTrie` stores, for each level ``l`` of a reduced block trie,

* ``H_l``: ``sigma`` trits per internal node; trit ``c`` is 0 (no child
  on label ``c``), 1 (internal child) or 2 (leaf child),
* ``G_l``: the id-list size of every leaf in unary (a 1 then ``g-1`` 0s),
* ``V_l``: the id lists of the leaves, concatenated.

The levels are concatenated into one trit array, one bit vector and one
id array; per-level views subtract the level's base rank. Children are
located with ``Rank_1``/``Rank_2`` on ``H`` and leaf id ranges with
``Select_1`` on ``G``.

Search over a block prunes a node as soon as its running mismatch count
exceeds the block threshold. Within an internal node every child but the
one labelled with the query symbol costs one mismatch, so only the
child index ranges are needed, never the individual labels.
"""

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import _binio
from .geometry import frechet_distance, frechet_leq
from .sketch import HasherBank, LshParams, VerticalStore, encode_query, encode_vertical, make_hashers, sketch_many
from .succinct import (
    DEFAULT_T_L,
    DEFAULT_T_S,
    BitVector,
    PackedInts,
    TritArray,
    TritRank,
    _bit_select,
    _packed_get,
    _trit_rank,
    _TRITS,
)
from .trie import BlockConfig, TrieLayout, TrieNode, TrieStats, bfs_layout, layout_from_block

__all__ = [
    "StatLevel",
    "StatTrie",
    "StatIndex",
    "QueryResult",
    "IndexStats",
    "Absent",
    "Internal",
    "Leaf",
    "encode_stat",
    "child",
    "leaf_ids",
    "assign_thresholds",
    "trie_search",
    "query",
    "index_stats",
    "MAX_STAT_SIGMA",
]

MAX_STAT_SIGMA = 2**16


@dataclass(frozen=True)
class Absent:
    pass


@dataclass(frozen=True)
class Internal:
    index: int


@dataclass(frozen=True)
class Leaf:
    index: int


class StatLevel:
    """Read-only view of one level of a :class:`StatTrie`."""

    def __init__(self, trie: "StatTrie", level: int):
        self._t = trie
        self.level = level
        self.n_internal = int(trie.n_internal[level])
        self.n_leaves = int(trie.n_leaves[level])
        self._h0 = int(trie.h_off[level])
        self._g0 = int(trie.g_off[level])

    @property
    def H(self) -> np.ndarray:
        return self._t.H.get_many(np.arange(self._h0, self._h0 + self.n_internal * self._t.sigma))

    @property
    def G(self) -> np.ndarray:
        bits = self._t.G.to_numpy()
        return bits[self._g0:int(self._t.g_off[self.level + 1])]

    @property
    def V(self) -> np.ndarray:
        return self._t.V[self._g0:int(self._t.g_off[self.level + 1])]

    def rank_H(self, c: int, p: int) -> int:
        """``Rank_c(H_l, p)`` for ``c`` in {1, 2}."""
        if not 0 <= p <= self.n_internal * self._t.sigma:
            raise IndexError(f"rank position {p} out of range for level {self.level}")
        r = self._t.H_rank
        return r.rank(c, self._h0 + p) - r.rank(c, self._h0)

    def select_G(self, i: int) -> int:
        """``Select_1(G_l, i)``, zero-based; ``len(G_l)`` when out of range."""
        if i >= self.n_leaves:
            return int(self._t.g_off[self.level + 1]) - self._g0
        return self._t.G.select(1, int(self._t.leaf_base[self.level]) + i) - self._g0


class StatTrie:
    """Succinct encoding of one reduced block trie. Build with :func:`encode_stat`."""

    def __init__(self, sigma, depth, n, n_internal, n_leaves, H, H_rank, G, V):
        self.sigma = int(sigma)
        self.depth = int(depth)
        self.n = int(n)
        self.n_internal = np.asarray(n_internal, dtype=np.int64)
        self.n_leaves = np.asarray(n_leaves, dtype=np.int64)
        self.H = H
        self.H_rank = H_rank
        self.G = G
        self.V = V
        nl = self.depth + 1
        if self.n_internal.shape != (nl,) or self.n_leaves.shape != (nl,):
            raise ValueError("per-level counts must cover levels 0..depth")
        self.h_off = np.zeros(nl + 1, dtype=np.int64)
        np.cumsum(self.n_internal * self.sigma, out=self.h_off[1:])
        self.leaf_base = np.zeros(nl + 1, dtype=np.int64)
        np.cumsum(self.n_leaves, out=self.leaf_base[1:])
        if self.h_off[-1] != H.M:
            raise ValueError("H length does not equal sigma times the internal node count")
        if G.count(1) != self.leaf_base[-1] or G.M != len(V):
            raise ValueError("G and V do not describe the leaves")
        self.g_off = np.array([G.select(1, int(b)) for b in self.leaf_base], dtype=np.int64)
        self.base1 = H_rank.rank_many(1, self.h_off)
        self.base2 = H_rank.rank_many(2, self.h_off)
        self.root_is_leaf = bool(self.n_leaves[0] > 0)

    def level(self, l: int) -> StatLevel:
        if not 0 <= l <= self.depth:
            raise IndexError(f"level {l} out of range [0, {self.depth}]")
        return StatLevel(self, l)

    @property
    def levels(self) -> list:
        return [StatLevel(self, l) for l in range(self.depth + 1)]

    @property
    def stats(self) -> TrieStats:
        ins = self.n_internal.tolist()
        lvs = self.n_leaves.tolist()
        return TrieStats(sum(ins) + sum(lvs), sum(ins), ins, lvs)

    def nbytes(self) -> dict:
        return {
            "H": self.H.nbytes,
            "H_rank": self.H_rank.nbytes,
            "G": self.G.nbytes,
            "V": self.V.nbytes,
        }

    def _kernel_args(self):
        r = self.H_rank
        return (self.H.trytes, r.LB[1], r.SB[1], r.total[1], r.LB[2], r.SB[2], r.total[2],
                self.H.M, r.t_L, r.t_S, self.h_off, self.base1, self.base2, self.leaf_base,
                self.G.words, self.G.sup, self.G.sub, self.G.M, self.G.ones,
                self.V.words, self.V.width, self.V.mask, self.sigma, self.root_is_leaf)

    def write(self, f) -> None:
        _binio.write_u64(f, self.sigma, self.depth, self.n)
        _binio.write_array(f, self.n_internal)
        _binio.write_array(f, self.n_leaves)
        self.H.write(f)
        self.H_rank.write(f)
        self.G.write(f)
        self.V.write(f)

    @classmethod
    def read(cls, f) -> "StatTrie":
        sigma, depth, n = _binio.read_u64(f, 3)
        n_internal = _binio.read_array(f)
        n_leaves = _binio.read_array(f)
        H = TritArray.read(f)
        H_rank = TritRank.read(f, H)
        G = BitVector.read(f)
        V = PackedInts.read(f)
        return cls(sigma, depth, n, n_internal, n_leaves, H, H_rank, G, V)


def encode_stat(trie, sigma: int, depth: int | None = None,
                t_L: int = DEFAULT_T_L, t_S: int = DEFAULT_T_S) -> StatTrie:
    """Encode a trie (pointer root or :class:`TrieLayout`) as a STAT.

    Only ``Rank_1`` and ``Rank_2`` directories are built over ``H``;
    navigation never needs ``Rank_0``.
    """
    if isinstance(trie, TrieNode):
        layout = bfs_layout(trie, depth)
    elif isinstance(trie, TrieLayout):
        layout = trie
    else:
        raise TypeError("expected a TrieNode or TrieLayout")
    sigma = int(sigma)
    if sigma > MAX_STAT_SIGMA:
        raise ValueError(f"sigma={sigma} too large for trit-array nodes (max {MAX_STAT_SIGMA})")
    levels = layout.levels
    n_internal = [lv.n_internal for lv in levels]
    n_leaves = [lv.n_leaves for lv in levels]
    H_parts, G_parts = [], []
    for l, lv in enumerate(levels):
        h = np.zeros(lv.n_internal * sigma, dtype=np.uint8)
        if l + 1 < len(levels):
            nxt = levels[l + 1]
            for kind, parent, label in ((1, nxt.internal_parent, nxt.internal_label),
                                        (2, nxt.leaf_parent, nxt.leaf_label)):
                if label.size and label.max() >= sigma:
                    raise ValueError("edge label out of range for sigma")
                h[parent * sigma + label] = kind
        H_parts.append(h)
        if (lv.leaf_sizes <= 0).any():
            raise ValueError("leaves must hold at least one id")
        g = np.zeros(int(lv.leaf_sizes.sum()), dtype=bool)
        g[np.cumsum(lv.leaf_sizes) - lv.leaf_sizes] = True
        G_parts.append(g)
    H = TritArray(np.concatenate(H_parts) if H_parts else [])
    H_rank = TritRank(H, t_L, t_S, symbols=(1, 2))
    G = BitVector(np.concatenate(G_parts))
    V = PackedInts(np.concatenate([lv.leaf_ids for lv in levels]), limit=max(layout.n, 1))
    return StatTrie(sigma, layout.depth, layout.n, n_internal, n_leaves, H, H_rank, G, V)


def child(t: StatTrie, level: int, i: int, c: int):
    """Child of the ``i``-th internal node at *level* along label *c*."""
    lv = t.level(level)
    if not 0 <= i < lv.n_internal:
        raise IndexError(f"internal node {i} out of range at level {level}")
    if not 0 <= c < t.sigma:
        raise IndexError(f"label {c} out of range for sigma={t.sigma}")
    p = i * t.sigma + c
    kind = t.H[int(t.h_off[level]) + p]
    if kind == 0:
        return Absent()
    return (Internal if kind == 1 else Leaf)(lv.rank_H(kind, p))


def leaf_ids(t: StatTrie, level: int, i: int) -> np.ndarray:
    """Sketch ids of the ``i``-th leaf at *level*."""
    lv = t.level(level)
    if not 0 <= i < lv.n_leaves:
        raise IndexError(f"leaf {i} out of range at level {level}")
    s = lv.select_G(i)
    e = lv.select_G(i + 1) - 1
    return lv.V[s:e + 1]


def assign_thresholds(K: int, B: int) -> list:
    """Per-block thresholds summing to ``max(0, K - B + 1)``, round robin.

    >>> assign_thresholds(3, 2)
    [1, 1]
    """
    if K < 0 or B < 1:
        raise ValueError(f"need K >= 0 and B >= 1, got K={K}, B={B}")
    total = max(0, K - B + 1)
    base, extra = divmod(total, B)
    return [base + (j < extra) for j in range(B)]


@njit(cache=True, nogil=True)
def _emit_leaf(gl, gw, gsup, gsub, gM, gones, vw, vwidth, vmask, out, n_out):
    s = _bit_select(gw, gsup, gsub, gM, gones, 1, gl)
    e = _bit_select(gw, gsup, gsub, gM, gones, 1, gl + 1)
    for p in range(s, e):
        out[n_out] = _packed_get(vw, vwidth, vmask, p)
        n_out += 1
    return n_out


@njit(cache=True, nogil=True)
def _stat_search(trytes, lb1, sb1, tot1, lb2, sb2, tot2, HM, t_l, t_s,
                 h_off, base1, base2, leaf_base, gw, gsup, gsub, gM, gones,
                 vw, vwidth, vmask, sigma, root_is_leaf, query, K, out, stack):
    n_out = 0
    reached = 0
    if root_is_leaf:
        n_out = _emit_leaf(leaf_base[0], gw, gsup, gsub, gM, gones, vw, vwidth, vmask, out, n_out)
        return n_out, 1
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = 0
    top = 1
    while top > 0:
        top -= 1
        lvl = stack[top, 0]
        i = stack[top, 1]
        dist = stack[top, 2]
        reached += 1
        q = query[lvl]
        p0 = h_off[lvl] + i * sigma
        pq = p0 + q
        tq = _TRITS[trytes[pq // 5], pq % 5]
        lb_next = leaf_base[lvl + 1]
        if dist < K:
            a1 = _trit_rank(trytes, lb1, sb1, t_l, t_s, tot1, HM, 1, p0)
            b1 = _trit_rank(trytes, lb1, sb1, t_l, t_s, tot1, HM, 1, p0 + sigma)
            a2 = _trit_rank(trytes, lb2, sb2, t_l, t_s, tot2, HM, 2, p0)
            b2 = _trit_rank(trytes, lb2, sb2, t_l, t_s, tot2, HM, 2, p0 + sigma)
            hit = -1
            if tq != 0:
                if tq == 1:
                    hit = _trit_rank(trytes, lb1, sb1, t_l, t_s, tot1, HM, 1, pq)
                else:
                    hit = _trit_rank(trytes, lb2, sb2, t_l, t_s, tot2, HM, 2, pq)
            for r in range(a1, b1):
                stack[top, 0] = lvl + 1
                stack[top, 1] = r - base1[lvl]
                stack[top, 2] = dist + (0 if (tq == 1 and r == hit) else 1)
                top += 1
            for r in range(a2, b2):
                reached += 1
                n_out = _emit_leaf(lb_next + r - base2[lvl], gw, gsup, gsub, gM, gones, vw, vwidth, vmask, out, n_out)
        elif tq == 1:
            r = _trit_rank(trytes, lb1, sb1, t_l, t_s, tot1, HM, 1, pq)
            stack[top, 0] = lvl + 1
            stack[top, 1] = r - base1[lvl]
            stack[top, 2] = dist
            top += 1
        elif tq == 2:
            r = _trit_rank(trytes, lb2, sb2, t_l, t_s, tot2, HM, 2, pq)
            reached += 1
            n_out = _emit_leaf(lb_next + r - base2[lvl], gw, gsup, gsub, gM, gones, vw, vwidth, vmask, out, n_out)
    return n_out, reached


@njit(cache=True, nogil=True)
def _dedup(ids, count, stamps, epoch, out, n_out):
    for p in range(count):
        v = ids[p]
        if stamps[v] != epoch:
            stamps[v] = epoch
            out[n_out] = v
            n_out += 1
    return n_out


class _Scratch:
    """Per-worker buffers: block output, traversal stack and mark table."""

    def __init__(self, n, depth, sigma):
        self.block_out = np.empty(max(n, 1), dtype=np.int64)
        # DFS stack never exceeds one frame per (level, sibling)
        self.stack = np.empty(((depth + 1) * min(sigma, max(n, 1)) + 1, 3), dtype=np.int64)
        self.stamps = np.zeros(max(n, 1), dtype=np.int64)
        self.epoch = 0
        self.cand = np.empty(max(n, 1), dtype=np.int64)


def _check_query_block(t: StatTrie, Tj):
    Tj = np.ascontiguousarray(Tj, dtype=np.int64)
    if Tj.shape != (t.depth,):
        raise ValueError(f"query block must have length {t.depth}, got shape {Tj.shape}")
    if Tj.size and (Tj.min() < 0 or Tj.max() >= t.sigma):
        raise ValueError("query symbol out of range for sigma")
    return Tj


def _search_into(t: StatTrie, Tj, Kj, scratch: _Scratch):
    return _stat_search(*t._kernel_args(), Tj, int(Kj), scratch.block_out, scratch.stack)


def trie_search(t: StatTrie, Tj, Kj: int, return_reached: bool = False):
    """Ids of sub-sketches within *Kj* mismatches of ``Tj``, as a sorted array.

    Ids under a collapsed leaf are returned whenever the leaf is reached,
    so node reduction only ever adds candidates.
    """
    Tj = _check_query_block(t, Tj)
    if Kj < 0:
        raise ValueError("block threshold must be non-negative")
    scratch = _Scratch(t.n, t.depth, t.sigma)
    count, reached = _search_into(t, Tj, Kj, scratch)
    ids = np.sort(scratch.block_out[:count])
    return (ids, int(reached)) if return_reached else ids


@dataclass
class QueryResult:
    """Outcome of one query; ids are internal (0-based) positions.

    ``candidates`` is the union of block candidates, ``hamming`` the exact
    Hamming ball within it and ``verified`` the Fréchet-confirmed subset
    (``None`` in Hamming-only mode), with ``distances`` aligned to it.
    """

    candidates: np.ndarray
    hamming: np.ndarray
    verified: np.ndarray | None = None
    distances: np.ndarray | None = None
    nodes_visited: int = 0
    block_candidates: list = field(default_factory=list)


@dataclass
class IndexStats:
    blocks: list
    bytes: dict

    @property
    def N(self) -> int:
        return sum(s.N for s in self.blocks)

    @property
    def N_in(self) -> int:
        return sum(s.N_in for s in self.blocks)

    @property
    def stat_bytes(self) -> int:
        return sum(v for k, v in self.bytes.items() if k != "sketches")


class StatIndex:
    """B STAT tries over sketch blocks plus the vertical sketch store.

    Parameters
    ----------
    params : LshParams
    blocks : BlockConfig
    lam : int
        Node-reduction weight threshold.
    hashers : HasherBank
        Hash functions used to sketch queries; may be ``None`` for an
        index built straight from sketches.
    store : VerticalStore
    tries : list of StatTrie
    ids : ndarray, optional
        External ids of the indexed items, defaults to ``0..n-1``.
    """

    def __init__(self, params: LshParams, blocks: BlockConfig, lam: int,
                 hashers: HasherBank | None, store: VerticalStore, tries: list, ids=None):
        if blocks.L != params.L:
            raise ValueError("block configuration does not match sketch length")
        if len(tries) != blocks.B:
            raise ValueError(f"expected {blocks.B} tries, got {len(tries)}")
        self.params = params
        self.blocks = blocks
        self.lam = int(lam)
        self.hashers = hashers
        self.store = store
        self.tries = tries
        self.n = store.n
        self.ids = np.arange(self.n, dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
        if self.ids.shape != (self.n,):
            raise ValueError("need one external id per indexed sketch")
        self._local = threading.local()

    @property
    def d(self) -> int | None:
        return None if self.hashers is None else self.hashers.d

    @classmethod
    def build(cls, sketches, params: LshParams, B: int, lam: int = 0,
              hashers: HasherBank | None = None, ids=None, threads: int = 1) -> "StatIndex":
        """Index an ``(n, L)`` sketch matrix."""
        S = np.asarray(sketches)
        if S.ndim != 2 or S.shape[0] == 0:
            raise ValueError("need a non-empty (n, L) sketch matrix")
        if params.sigma > MAX_STAT_SIGMA:
            raise ValueError(f"sigma={params.sigma} too large for STAT (max {MAX_STAT_SIGMA})")
        if lam < 0:
            raise ValueError("lambda must be non-negative")
        blocks = BlockConfig(params.L, B)
        store = encode_vertical(S, params)
        parts = blocks.split(S)

        def one(block):
            return encode_stat(layout_from_block(block, lam), params.sigma)

        if threads > 1:
            with ThreadPoolExecutor(threads) as ex:
                tries = list(ex.map(one, parts))
        else:
            tries = [one(b) for b in parts]
        return cls(params, blocks, lam, hashers, store, tries, ids)

    @classmethod
    def from_trajectories(cls, trajectories, params: LshParams, B: int, lam: int = 0,
                          ids=None, threads: int = 1) -> "StatIndex":
        """Sketch *trajectories* and index them."""
        trajectories = list(trajectories)
        if not trajectories:
            raise ValueError("cannot index an empty collection")
        from .geometry import as_points
        d = as_points(trajectories[0]).shape[1]
        hashers = make_hashers(params, d)
        S = sketch_many(trajectories, hashers)
        if ids is None:
            ids = [getattr(P, "id", i) for i, P in enumerate(trajectories)]
        return cls.build(S, params, B, lam, hashers=hashers, ids=ids, threads=threads)

    def sketch_query(self, Q) -> np.ndarray:
        if self.hashers is None:
            raise ValueError("index has no hash functions; pass query sketches")
        return sketch_many([Q], self.hashers)[0]

    def _scratch(self) -> _Scratch:
        s = getattr(self._local, "scratch", None)
        if s is None:
            s = _Scratch(self.n, self.blocks.block_len, self.params.sigma)
            self._local.scratch = s
        return s

    def _check_sketch(self, T):
        T = np.asarray(T)
        if T.shape != (self.params.L,):
            raise ValueError(f"query sketch must have length L={self.params.L}")
        if T.size and (int(T.min()) < 0 or int(T.max()) >= self.params.sigma):
            raise ValueError("query symbol out of range for sigma")
        return T.astype(np.int64)

    def candidates(self, T, K: int):
        """Deduplicated union of block candidates, with counters."""
        T = self._check_sketch(T)
        if not 0 <= K <= self.params.L:
            raise ValueError(f"K must lie in [0, L={self.params.L}], got {K}")
        sc = self._scratch()
        sc.epoch += 1
        total = 0
        visited = 0
        per_block = []
        for t, Tj, Kj in zip(self.tries, self.blocks.split(T), assign_thresholds(K, self.blocks.B)):
            count, reached = _search_into(t, np.ascontiguousarray(Tj[0]), Kj, sc)
            per_block.append(int(count))
            visited += int(reached)
            total = _dedup(sc.block_out, count, sc.stamps, sc.epoch, sc.cand, total)
        return np.sort(sc.cand[:total]), visited, per_block

    def query(self, T, K: int, trajectories=None, Q=None, R: float | None = None) -> QueryResult:
        """Hamming search for sketch *T*, optionally Fréchet-verified.

        Verification runs when *R* is given; it needs the indexed
        *trajectories* (aligned with internal ids) and the query
        trajectory *Q*.
        """
        C, visited, per_block = self.candidates(T, K)
        qp = encode_query(T, self.params)
        I = C[self.store.hamming(C, qp) <= K]
        res = QueryResult(C, I, nodes_visited=visited, block_candidates=per_block)
        if R is not None:
            if trajectories is None or Q is None:
                raise ValueError("Fréchet verification needs the indexed trajectories and the query")
            if len(trajectories) != self.n:
                raise ValueError("trajectory collection does not match the index")
            keep = [i for i in I if frechet_leq(trajectories[i], Q, R)]
            res.verified = np.array(keep, dtype=np.int64)
            res.distances = np.array([frechet_distance(trajectories[i], Q) for i in keep], dtype=np.float64)
        return res

    def query_trajectory(self, Q, K: int, trajectories=None, R: float | None = None) -> QueryResult:
        return self.query(self.sketch_query(Q), K, trajectories, Q, R)

    def query_many(self, sketches, K: int, threads: int = 1, **kw) -> list:
        sketches = np.asarray(sketches)
        if threads <= 1:
            return [self.query(T, K, **kw) for T in sketches]
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(lambda T: self.query(T, K, **kw), sketches))

    def linear_scan(self, T, K: int) -> np.ndarray:
        """Exact Hamming ball by scanning every stored sketch."""
        T = self._check_sketch(T)
        return np.flatnonzero(self.store.hamming_all(encode_query(T, self.params)) <= K)

    def stats(self) -> IndexStats:
        return index_stats(self)


def query(idx: StatIndex, T, K: int, trajectories=None, Q=None, R=None) -> QueryResult:
    return idx.query(T, K, trajectories, Q, R)


def index_stats(idx: StatIndex) -> IndexStats:
    """Node counts per block and the byte size of every component."""
    sizes = {"H": 0, "H_rank": 0, "G": 0, "V": 0}
    for t in idx.tries:
        for k, v in t.nbytes().items():
            sizes[k] += v
    sizes["sketches"] = idx.store.nbytes
    return IndexStats([t.stats for t in idx.tries], sizes)
