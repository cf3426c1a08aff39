"""
Trits, trytes and rank
======================

Five ternary digits fit in one byte because 3**5 = 243 <= 256. A two
layer directory plus a small table answers rank queries in constant time.
"""

# %%
import numpy as np
from tstat.succinct import TritArray, TritRank

A = TritArray([1, 2, 2, 0, 1])
print("packed byte:", A.trytes[0])  # 1 + 2*3 + 2*9 + 0*27 + 1*81

# %%
rng = np.random.default_rng(0)
trits = rng.integers(0, 3, size=1_000_000)
A = TritArray(trits)
ranks = TritRank(A)
print("bytes per trit:", A.nbytes / A.M)
print("directory bytes:", ranks.nbytes)

# %%
i = 777_777
print(ranks.rank(2, i), np.count_nonzero(trits[:i] == 2))
