"""
Grid sketches
=============

Each of L hash functions snaps a trajectory to a randomly shifted grid,
drops repeated cells and hashes the cell sequence to a symbol in
[0, sigma). Close trajectories collide on most positions.
"""

# %%
import numpy as np
from tstat import LshParams, make_hashers, sketch_many
from tstat.synthetic import perturb, random_walks

R = 1.0
params = LshParams.from_radius(R, d=2, L=64, sigma=256, seed=0)
print(params)
hashers = make_hashers(params, d=2)

# %%
rng = np.random.default_rng(0)
base = random_walks(1, (10, 20), step=5.0, seed=1)[0]
near = perturb(base, 0.05, rng)
far = random_walks(1, (10, 20), step=5.0, seed=2)[0]
S = sketch_many([base, near, far], hashers)
print("near mismatches:", np.count_nonzero(S[0] != S[1]))
print("far mismatches: ", np.count_nonzero(S[0] != S[2]))

# %%
# The vertical layout stores bit b of every position in one 64-bit word,
# so a Hamming distance costs log2(sigma) XORs and one popcount.
from tstat import encode_query, encode_vertical

store = encode_vertical(S, params)
print(store.hamming_all(encode_query(S[0], params)))
