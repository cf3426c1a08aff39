"""Trajectories and the discrete Fréchet distance."""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "Trajectory",
    "as_points",
    "frechet_distance",
    "frechet_leq",
    "radius_sq",
]


@dataclass(frozen=True)
class Trajectory:
    """A sequence of ``m >= 1`` points in ``R^d``.

    Parameters
    ----------
    id : int
        Non-negative identifier.
    points : ndarray
        ``(m, d)`` float64 array; a 1D input is read as a single point.
    """

    id: int
    points: np.ndarray

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"trajectory id must be non-negative, got {self.id}")
        object.__setattr__(self, "points", as_points(self.points))

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.m


def as_points(P) -> np.ndarray:
    """Validate and coerce *P* to a read-only ``(m, d)`` float64 array."""
    if isinstance(P, Trajectory):
        return P.points
    arr = np.array(P, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"expected an (m, d) array of points, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError("trajectory must contain at least one point")
    if arr.shape[1] == 0:
        raise ValueError("points must have at least one coordinate")
    if not np.all(np.isfinite(arr)):
        raise ValueError("trajectory coordinates must be finite")
    arr.setflags(write=False)
    return arr


def _pair(P, Q):
    p = as_points(P)
    q = as_points(Q)
    if p.shape[1] != q.shape[1]:
        raise ValueError(f"dimension mismatch: {p.shape[1]} vs {q.shape[1]}")
    return p, q


@njit(cache=True, nogil=True)
def _sqdist(p, i, q, j):
    s = 0.0
    for t in range(p.shape[1]):
        diff = p[i, t] - q[j, t]
        s += diff * diff
    return s


@njit(cache=True, nogil=True)
def _dfd_squared(p, q):
    # One row of the coupling DP, over squared distances; sqrt is monotone
    # so the minimax value is unchanged.
    m2 = q.shape[0]
    row = np.empty(m2, dtype=np.float64)
    row[0] = _sqdist(p, 0, q, 0)
    for j in range(1, m2):
        row[j] = max(row[j - 1], _sqdist(p, 0, q, j))
    for i in range(1, p.shape[0]):
        diag = row[0]
        row[0] = max(row[0], _sqdist(p, i, q, 0))
        for j in range(1, m2):
            up = row[j]
            best = min(diag, up, row[j - 1])
            row[j] = max(best, _sqdist(p, i, q, j))
            diag = up
    return row[m2 - 1]


@njit(cache=True, nogil=True)
def _dfd_leq(p, q, r2):
    m2 = q.shape[0]
    row = np.zeros(m2, dtype=np.bool_)
    row[0] = _sqdist(p, 0, q, 0) <= r2
    if not row[0]:
        return False
    for j in range(1, m2):
        row[j] = row[j - 1] and _sqdist(p, 0, q, j) <= r2
    for i in range(1, p.shape[0]):
        diag = row[0]
        row[0] = row[0] and _sqdist(p, i, q, 0) <= r2
        alive = row[0]
        for j in range(1, m2):
            up = row[j]
            row[j] = (diag or up or row[j - 1]) and _sqdist(p, i, q, j) <= r2
            alive = alive or row[j]
            diag = up
        if not alive:
            return False
    return row[m2 - 1]


def frechet_distance(P, Q) -> float:
    """Discrete Fréchet distance between two trajectories.

    O(m1 * m2) dynamic program with a single reused row.

    Parameters
    ----------
    P, Q : Trajectory or array_like
        Point sequences of equal dimension.

    Returns
    -------
    float
        The minimum over all couplings of the largest Euclidean gap.

    Examples
    --------
    >>> frechet_distance([[0.0, 0.0]], [[3.0, 4.0]])
    5.0
    """
    p, q = _pair(P, Q)
    return float(np.sqrt(_dfd_squared(p, q)))


def radius_sq(R: float) -> float:
    """Largest float ``t`` with ``sqrt(t) <= R``.

    Comparing squared distances against ``t`` rather than ``R * R`` keeps
    the decision variant consistent with :func:`frechet_distance`, which
    takes one square root of the squared optimum.
    """
    R = float(R)
    if not R >= 0:
        raise ValueError(f"R must be non-negative, got {R}")
    if math.isinf(R):
        return R
    t = R * R
    while t > 0 and math.sqrt(t) > R:
        t = math.nextafter(t, 0.0)
    while math.sqrt(up := math.nextafter(t, math.inf)) <= R:
        t = up
    return t


def frechet_leq(P, Q, R: float) -> bool:
    """Return True iff ``frechet_distance(P, Q) <= R``.

    Boolean reachability over the coupling grid, comparing squared
    distances against :func:`radius_sq`. Exits early once a whole row is
    unreachable.
    """
    r2 = radius_sq(R)
    p, q = _pair(P, Q)
    return bool(_dfd_leq(p, q, r2))
