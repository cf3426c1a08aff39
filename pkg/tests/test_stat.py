import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import mutate
from oracles import block_ball, reduced_node_counts
from test_trie import EXAMPLE_ROWS
from tstat.geometry import frechet_distance
from tstat.sketch import LshParams
from tstat.stat import (
    Absent,
    Internal,
    Leaf,
    StatIndex,
    assign_thresholds,
    child,
    encode_stat,
    index_stats,
    leaf_ids,
    trie_search,
)
from tstat.synthetic import clustered_trajectories
from tstat.trie import build_trie, layout_from_block, pointer_search, reduce


@pytest.fixture
def example_stat():
    # rows are ids 1..6 in 1-based numbering
    return encode_stat(reduce(build_trie(EXAMPLE_ROWS), 1), sigma=4, depth=4)


def test_example_arrays(example_stat):
    t = example_stat
    assert t.level(1).H.tolist() == [1, 1, 0, 2]
    assert t.level(4).G.tolist() == [1, 0, 1, 1]
    assert (t.level(4).V + 1).tolist() == [5, 6, 2, 1]
    lv2 = t.level(2)
    assert (lv2.n_internal, lv2.n_leaves) == (2, 1)


def test_example_navigation(example_stat):
    t = example_stat
    assert t.level(1).rank_H(1, 1) == 1
    assert t.level(1).rank_H(2, 3) == 0
    assert child(t, 1, 0, 1) == Internal(1)
    assert child(t, 1, 0, 3) == Leaf(0)
    assert child(t, 1, 0, 2) == Absent()
    assert (leaf_ids(t, 4, 0) + 1).tolist() == [5, 6]
    assert t.level(4).select_G(0) == 0 and t.level(4).select_G(3) == 4


def test_empty_levels_and_bounds(example_stat):
    t = example_stat
    lv3 = t.level(3)
    assert lv3.n_leaves == 0 and lv3.G.size == 0 and lv3.V.size == 0
    with pytest.raises(IndexError):
        child(t, 1, 1, 0)
    with pytest.raises(IndexError):
        child(t, 1, 0, 4)
    with pytest.raises(IndexError):
        leaf_ids(t, 4, 3)
    assert leaf_ids(t, 4, 2).tolist() == [0]


def test_leaf_ids_concatenate_to_V(rng):
    for _ in range(30):
        rows = rng.integers(0, 4, size=(int(rng.integers(1, 60)), 5))
        t = encode_stat(layout_from_block(rows, int(rng.integers(0, 5))), 4)
        for l, lv in enumerate(t.levels):
            parts = [leaf_ids(t, l, i) for i in range(lv.n_leaves)]
            got = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
            assert np.array_equal(got, lv.V)


def test_pointer_and_layout_inputs_agree(rng):
    rows = rng.integers(0, 8, size=(100, 4))
    a = encode_stat(reduce(build_trie(rows), 2), 8, 4)
    b = encode_stat(layout_from_block(rows, 2), 8)
    assert np.array_equal(a.H.trytes, b.H.trytes)
    assert np.array_equal(a.G.words, b.G.words)
    assert np.array_equal(a.V.to_numpy(), b.V.to_numpy())


def test_thresholds():
    assert assign_thresholds(3, 2) == [1, 1]
    assert assign_thresholds(7, 4) == [1, 1, 1, 1]
    assert assign_thresholds(2, 16) == [0] * 16
    assert assign_thresholds(10, 4) == [2, 2, 2, 1]
    with pytest.raises(ValueError):
        assign_thresholds(-1, 2)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 64), st.integers(1, 16))
def test_threshold_properties(K, B):
    th = assign_thresholds(K, B)
    assert len(th) == B and min(th) >= 0
    assert sum(th) == max(0, K - B + 1)
    assert max(th) - min(th) <= 1
    assert th == sorted(th, reverse=True)
    # generalized pigeonhole: sum(K^j + 1) > K
    assert sum(k + 1 for k in th) > K


def test_search_small_example():
    t = encode_stat(build_trie([(0, 1), (0, 3), (2, 1)]), 4, 2)
    assert trie_search(t, (0, 1), 1).tolist() == [0, 1, 2]
    assert trie_search(t, (0, 1), 0).tolist() == [0]
    assert trie_search(t, (3, 3), 2).tolist() == [0, 1, 2]


def test_search_unreduced_is_exact(rng):
    for _ in range(100):
        depth = int(rng.integers(1, 7))
        sigma = int(rng.choice([2, 4, 16]))
        rows = rng.integers(0, sigma, size=(int(rng.integers(1, 120)), depth))
        t = encode_stat(layout_from_block(rows, 0), sigma)
        q = rng.integers(0, sigma, size=depth)
        K = int(rng.integers(0, depth + 1))
        assert trie_search(t, q, K).tolist() == block_ball(rows.tolist(), q.tolist(), K)
        assert trie_search(t, q, depth).tolist() == list(range(len(rows)))


def test_search_matches_pointer_traversal(rng):
    for _ in range(150):
        depth = int(rng.integers(1, 7))
        sigma = int(rng.choice([2, 3, 8]))
        rows = rng.integers(0, sigma, size=(int(rng.integers(1, 100)), depth))
        lam = int(rng.integers(0, 10))
        q = rng.integers(0, sigma, size=depth)
        K = int(rng.integers(0, depth + 1))
        ref_ids, ref_reached = pointer_search(reduce(build_trie(rows), lam), q, K)
        ids, reached = trie_search(encode_stat(layout_from_block(rows, lam), sigma), q, K, True)
        assert ids.tolist() == ref_ids
        assert reached == ref_reached


def test_collapsed_root():
    t = encode_stat(layout_from_block([(0, 1), (1, 0)], lam=5), 2)
    assert t.stats.N_in == 0
    assert trie_search(t, (1, 1), 0).tolist() == [0, 1]


def _sketch_collection(rng, n, sigma=256, L=64, clusters=20):
    centres = rng.integers(0, sigma, size=(clusters, L))
    S = centres[rng.integers(0, clusters, size=n)]
    return np.array([mutate(s, int(rng.integers(0, 12)), sigma, rng) for s in S])


@pytest.fixture
def collection(rng):
    return _sketch_collection(rng, 600)


def test_query_exact_and_complete(rng, collection):
    params = LshParams()
    for B in (2, 4, 8, 16):
        for lam in (0, 3, 20):
            idx = StatIndex.build(collection, params, B, lam)
            for _ in range(15):
                T = mutate(collection[rng.integers(0, len(collection))], int(rng.integers(0, 10)), 256, rng)
                K = int(rng.integers(0, 16))
                res = idx.query(T, K)
                truth = np.flatnonzero((collection != T).sum(axis=1) <= K)
                assert np.array_equal(res.hamming, truth)
                assert np.isin(truth, res.candidates).all()
                assert len(res.block_candidates) == B


def test_self_query_at_zero(collection):
    idx = StatIndex.build(collection, LshParams(), 8, 2)
    for i in (0, 17, 599):
        res = idx.query(collection[i], 0)
        assert i in res.hamming
        assert np.array_equal(res.hamming, np.flatnonzero((collection == collection[i]).all(axis=1)))


def test_candidates_grow_with_lambda(rng, collection):
    params = LshParams()
    idxs = [StatIndex.build(collection, params, 8, lam) for lam in (0, 2, 8, 32)]
    for _ in range(30):
        T = mutate(collection[rng.integers(0, 600)], int(rng.integers(0, 20)), 256, rng)
        K = int(rng.integers(0, 15))
        cands = [set(ix.query(T, K).candidates.tolist()) for ix in idxs]
        assert all(a <= b for a, b in zip(cands, cands[1:]))


def test_two_block_containment(rng):
    S = rng.integers(0, 4, size=(6, 8))
    T = S[0].copy()
    T[[1, 6]] = (T[[1, 6]] + 1) % 4
    idx = StatIndex.build(S, LshParams(L=8, sigma=4), B=2, lam=0)
    res = idx.query(T, 3)
    assert set(res.hamming) <= set(res.candidates)
    assert 0 in res.hamming


def test_query_validation(collection):
    idx = StatIndex.build(collection, LshParams(), 8, 0)
    with pytest.raises(ValueError):
        idx.query(collection[0], 65)
    with pytest.raises(ValueError):
        idx.query(collection[0][:10], 2)
    with pytest.raises(ValueError):
        StatIndex.build(collection, LshParams(), 7, 0)
    with pytest.raises(ValueError):
        StatIndex.build(np.zeros((3, 64), dtype=np.uint64), LshParams(sigma=2**32), 8, 0)


def test_threaded_queries_match_serial(rng, collection):
    idx = StatIndex.build(collection, LshParams(), 8, 2, threads=4)
    Ts = np.array([mutate(collection[i], 5, 256, rng) for i in range(40)])
    a = idx.query_many(Ts, 8, threads=1)
    b = idx.query_many(Ts, 8, threads=4)
    assert all(np.array_equal(x.hamming, y.hamming) and np.array_equal(x.candidates, y.candidates)
               for x, y in zip(a, b))


def test_stats(rng, collection):
    params = LshParams()
    for lam in (0, 4):
        idx = StatIndex.build(collection, params, 8, lam)
        st_ = index_stats(idx)
        for b, part in zip(st_.blocks, idx.blocks.split(collection)):
            assert (b.N, b.N_in) == reduced_node_counts(part, lam)
        assert sum(t.H.M for t in idx.tries) == params.sigma * st_.N_in
        assert st_.bytes["sketches"] == idx.n * 64
    full = StatIndex.build(collection, params, 8, lam=len(collection)).stats()
    assert full.N_in == 0 and all(b.N == 1 for b in full.blocks)


def test_frechet_verification():
    trajs = clustered_trajectories(300, n_clusters=5, noise=0.05, seed=2)
    params = LshParams.from_radius(0.5, 2, seed=1)
    idx = StatIndex.from_trajectories(trajs, params, 8, 2)
    Q = trajs[7]
    res = idx.query_trajectory(Q, 20, trajectories=trajs, R=0.5)
    assert 7 in res.verified
    assert set(res.verified) <= set(res.hamming) <= set(res.candidates)
    for i, dist in zip(res.verified, res.distances):
        assert dist == frechet_distance(trajs[i], Q) <= 0.5
    with pytest.raises(ValueError):
        idx.query_trajectory(Q, 4, R=0.5)
