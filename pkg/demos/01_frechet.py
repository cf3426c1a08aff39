"""
Discrete Fréchet distance
=========================

Two dogs on leashes walk along their own polylines, only ever stepping
forward. The discrete Fréchet distance is the shortest leash that lets
both reach the end.
"""

# %%
import numpy as np
from tstat import frechet_distance, frechet_leq

P = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
Q = np.array([[0.0, 1.0], [2.0, 1.0]])
print("distance:", frechet_distance(P, Q))

# %%
# The decision variant never takes a square root and stops as soon as a
# whole row of the coupling grid is out of reach.
dist = frechet_distance(P, Q)
print(frechet_leq(P, Q, dist), frechet_leq(P, Q, 0.99 * dist))

# %%
# Reordering points changes the answer, unlike a set distance.
print(frechet_distance(P, Q[::-1]))
