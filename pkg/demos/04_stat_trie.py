"""
A succinct trie over sketch blocks
==================================

Sketches are cut into B blocks and each block goes into a trie. Small
subtrees are collapsed into leaves, then every level is written as a trit
array H (0 absent, 1 internal, 2 leaf), a leaf bitmap G and the ids V.
"""

# %%
from tstat.stat import child, encode_stat, leaf_ids, trie_search
from tstat.trie import build_trie, reduce

rows = [(0, 1, 0, 1), (0, 1, 0, 0), (0, 3, 2, 1), (2, 2, 3, 3), (0, 0, 0, 0), (0, 0, 0, 0)]
trie = reduce(build_trie(rows), 1)
t = encode_stat(trie, sigma=4, depth=4)
for l, lv in enumerate(t.levels):
    print(l, "H", lv.H.tolist(), "G", lv.G.tolist(), "V", lv.V.tolist())

# %%
print(child(t, 1, 0, 1), child(t, 1, 0, 3), child(t, 1, 0, 2))
print(leaf_ids(t, 4, 0))

# %%
# Search with a mismatch budget; collapsed leaves report every id they hold.
print(trie_search(t, (0, 1, 0, 1), 1))
