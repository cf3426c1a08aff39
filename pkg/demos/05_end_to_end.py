"""
End-to-end search
=================

Index synthetic trajectories, query with a Hamming threshold K and keep
the candidates within Fréchet distance R. The same run is available from
the shell as ``tstat build`` and ``tstat query``.
"""

# %%
import time

import numpy as np
from tstat import LshParams, StatIndex
from tstat.io import ground_truth
from tstat.synthetic import clustered_trajectories, perturb

trajs = clustered_trajectories(20_000, seed=0)
R = 1.0
params = LshParams.from_radius(R, d=2, seed=0)
t0 = time.perf_counter()
idx = StatIndex.from_trajectories(trajs, params, B=8, lam=8)
print(f"built in {time.perf_counter() - t0:.2f} s")
st = idx.stats()
print("STAT bytes", st.stat_bytes, "sketch bytes", st.bytes["sketches"])

# %%
rng = np.random.default_rng(1)
Q = perturb(trajs[42], 0.1, rng)
truth = set(ground_truth(trajs, [Q], R)[0].tolist())
for K in (0, 4, 8, 16):
    res = idx.query_trajectory(Q, K, trajectories=trajs, R=R)
    found = set(res.verified.tolist())
    print(K, len(res.candidates), len(res.hamming), len(found), "of", len(truth))

# %%
# Shell equivalent, on files written with tstat.io.save_trajectories:
#
#   tstat build data.tsv -o data.idx --R 1 --B 8 --lambda 8
#   tstat query data.idx queries.tsv --K 8 --mode frechet --R 1 --dataset data.tsv
