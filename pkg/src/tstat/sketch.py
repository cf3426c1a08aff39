"""Grid LSH sketches for trajectories and bit-parallel Hamming distance.

Each sketch position owns ``k`` randomly shifted grids of cell width
``delta``. A trajectory is snapped to each grid (consecutive duplicate
cells dropped), the cell sequences are folded with a seeded 64-bit
polynomial hash, finalised with the splitmix64 mixer and reduced modulo
the alphabet size ``sigma`` (a power of two, so the reduction is a mask).

Sketches are stored in the vertical layout: plane ``b`` of sketch ``i``
is one 64-bit word holding bit ``b`` of every symbol. The Hamming
distance is then ``popcount(OR_b (S[b] ^ T[b]))``.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .geometry import as_points

__all__ = [
    "LshParams",
    "GridHasher",
    "make_hashers",
    "snap_curve",
    "sketch",
    "sketch_many",
    "VerticalStore",
    "encode_vertical",
    "encode_query",
    "hamming_vertical",
    "hamming_naive",
    "WORD_BITS",
]

WORD_BITS = 64
_POLY = np.uint64(0x100000001B3)
_SENTINEL = np.uint64(0x9E3779B97F4A7C15)


@dataclass(frozen=True)
class LshParams:
    """Sketching parameters.

    ``delta`` defaults to ``8 * d * R`` when built through
    :meth:`from_radius`.
    """

    L: int = 64
    sigma: int = 2**8
    delta: float = 1.0
    k: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (isinstance(self.L, (int, np.integer)) and 1 <= self.L):
            raise ValueError(f"L must be a positive integer, got {self.L!r}")
        s = int(self.sigma)
        if s < 2 or s > 2**32 or s & (s - 1):
            raise ValueError(f"sigma must be a power of two in [2, 2**32], got {self.sigma!r}")
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise ValueError(f"delta must be a positive real, got {self.delta!r}")
        if self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @classmethod
    def from_radius(cls, R: float, d: int, **kw) -> "LshParams":
        return cls(delta=8.0 * d * R, **kw)

    @property
    def log_sigma(self) -> int:
        return int(self.sigma).bit_length() - 1


@dataclass(frozen=True)
class GridHasher:
    shift: np.ndarray
    mix_seed: int

    @property
    def d(self) -> int:
        return self.shift.shape[0]


@dataclass(frozen=True, eq=False)
class HasherBank:
    """The ``L * k`` hashers of one sketch family, stored as arrays."""

    params: LshParams
    shifts: np.ndarray = field(repr=False)
    mix_seeds: np.ndarray = field(repr=False)

    def __len__(self):
        return self.shifts.shape[0]

    def __getitem__(self, i) -> GridHasher:
        return GridHasher(self.shifts[i], int(self.mix_seeds[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def d(self) -> int:
        return self.shifts.shape[1]


def make_hashers(params: LshParams, d: int = 2) -> HasherBank:
    """Draw the ``L * k`` grid hashers for *params* in ``d`` dimensions.

    Deterministic in ``params.seed``.
    """
    if d < 1:
        raise ValueError(f"d must be positive, got {d}")
    rng = np.random.default_rng(params.seed)
    count = params.L * params.k
    shifts = rng.uniform(0.0, params.delta, size=(count, d))
    # uniform() may round up to the open endpoint
    shifts = np.minimum(shifts, np.nextafter(params.delta, 0.0))
    seeds = rng.integers(0, 2**64, size=count, dtype=np.uint64, endpoint=False)
    while np.unique(seeds).size != count:
        seeds = rng.integers(0, 2**64, size=count, dtype=np.uint64, endpoint=False)
    shifts.setflags(write=False)
    seeds.setflags(write=False)
    return HasherBank(params, shifts, seeds)


def snap_curve(h: GridHasher, P, delta: float) -> np.ndarray:
    """Snap the points of *P* to the shifted grid of *h*.

    Returns an ``(r, d)`` int64 array of cell indices with consecutive
    duplicates removed.
    """
    pts = as_points(P)
    if pts.shape[1] != h.d:
        raise ValueError(f"dimension mismatch: {pts.shape[1]} vs {h.d}")
    cells = np.floor((pts + h.shift) / delta).astype(np.int64)
    keep = np.ones(cells.shape[0], dtype=bool)
    keep[1:] = np.any(cells[1:] != cells[:-1], axis=1)
    return cells[keep]


@njit(cache=True, inline="always")
def _splitmix(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def _sketch_kernel(points, offsets, shifts, seeds, delta, L, k, mask, out):
    d = points.shape[1]
    prev = np.empty(d, dtype=np.int64)
    cell = np.empty(d, dtype=np.int64)
    for t in range(offsets.shape[0] - 1):
        lo = offsets[t]
        hi = offsets[t + 1]
        for j in range(L):
            h = np.uint64(0)
            for g in range(k):
                hid = j * k + g
                h = h * _POLY + seeds[hid]
                for r in range(lo, hi):
                    same = r > lo
                    for a in range(d):
                        cell[a] = np.int64(np.floor((points[r, a] + shifts[hid, a]) / delta))
                        if cell[a] != prev[a]:
                            same = False
                    if same:
                        continue
                    for a in range(d):
                        h = h * _POLY + np.uint64(cell[a])
                        prev[a] = cell[a]
                h = h * _POLY + _SENTINEL
            out[t, j] = _splitmix(h) & mask


def _dtype_for(sigma: int):
    return np.uint8 if sigma <= 2**8 else np.uint16 if sigma <= 2**16 else np.uint32


def sketch_many(trajectories, hashers: HasherBank) -> np.ndarray:
    """Sketch a collection; returns an ``(n, L)`` array of symbols."""
    params = hashers.params
    pts = [as_points(P) for P in trajectories]
    out = np.zeros((len(pts), params.L), dtype=np.uint64)
    if pts:
        d = {p.shape[1] for p in pts}
        if d != {hashers.d}:
            raise ValueError(f"trajectory dimensions {sorted(d)} do not match hashers (d={hashers.d})")
        offsets = np.zeros(len(pts) + 1, dtype=np.int64)
        np.cumsum([p.shape[0] for p in pts], out=offsets[1:])
        flat = np.ascontiguousarray(np.concatenate(pts))
        _sketch_kernel(flat, offsets, hashers.shifts, hashers.mix_seeds,
                       float(params.delta), params.L, params.k,
                       np.uint64(params.sigma - 1), out)
    return out.astype(_dtype_for(params.sigma))


def sketch(P, hashers: HasherBank) -> np.ndarray:
    """Sketch a single trajectory into ``L`` symbols in ``[0, sigma)``."""
    return sketch_many([P], hashers)[0]


def _check_planes_params(L, sigma):
    if L > WORD_BITS:
        raise ValueError(f"vertical layout holds one word per plane; L={L} exceeds {WORD_BITS}")


def _to_planes(sketches: np.ndarray, nbits: int) -> np.ndarray:
    S = np.asarray(sketches, dtype=np.uint64)
    L = S.shape[1]
    weights = np.left_shift(np.uint64(1), np.arange(L, dtype=np.uint64))
    planes = np.empty((nbits, S.shape[0]), dtype=np.uint64)
    for b in range(nbits):
        bits = (S >> np.uint64(b)) & np.uint64(1)
        planes[b] = np.bitwise_or.reduce(bits * weights, axis=1) if L else 0
    return planes


@dataclass(frozen=True, eq=False)
class VerticalStore:
    """Sketches in bit-plane layout.

    ``planes[b, i]`` holds bit ``b`` of every symbol of sketch ``i``; bit
    ``j`` of the word is position ``j`` of the sketch.
    """

    L: int
    sigma: int
    planes: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.planes.shape[1]

    @property
    def nbits(self) -> int:
        return self.planes.shape[0]

    def decode(self, i) -> np.ndarray:
        """Recover the symbols of sketch ``i`` (or of each id in an array)."""
        words = self.planes[:, i]
        pos = np.arange(self.L, dtype=np.uint64)
        out = np.zeros(np.shape(i) + (self.L,), dtype=np.uint64)
        for b in range(self.nbits):
            bits = (words[b][..., None] >> pos) & np.uint64(1)
            out |= bits << np.uint64(b)
        return out.astype(_dtype_for(self.sigma))

    def decode_all(self) -> np.ndarray:
        return self.decode(np.arange(self.n))

    def hamming(self, ids, query_planes) -> np.ndarray:
        """Hamming distances from the query to each sketch in *ids*."""
        q = self._check_query(query_planes)
        acc = np.zeros(np.shape(ids), dtype=np.uint64)
        for b in range(self.nbits):
            acc |= self.planes[b, ids] ^ q[b]
        return np.bitwise_count(acc).astype(np.int64)

    def hamming_all(self, query_planes) -> np.ndarray:
        """Linear scan: Hamming distance from the query to every sketch."""
        q = self._check_query(query_planes)
        acc = np.zeros(self.n, dtype=np.uint64)
        for b in range(self.nbits):
            acc |= self.planes[b] ^ q[b]
        return np.bitwise_count(acc).astype(np.int64)

    def _check_query(self, query_planes):
        q = np.asarray(query_planes, dtype=np.uint64)
        if q.shape != (self.nbits,):
            raise ValueError(f"query has {q.shape} planes; store expects ({self.nbits},)")
        return q

    @property
    def nbytes(self) -> int:
        return self.planes.nbytes


def encode_vertical(sketches, params: LshParams) -> VerticalStore:
    """Transpose ``(n, L)`` sketches into ``log2(sigma)`` bit planes."""
    S = np.asarray(sketches)
    if S.ndim != 2:
        S = S.reshape(-1, params.L)
    if S.shape[1] != params.L:
        raise ValueError(f"sketch length {S.shape[1]} does not match L={params.L}")
    _check_planes_params(params.L, params.sigma)
    if S.size and int(S.max()) >= params.sigma:
        raise ValueError("sketch symbol out of range for sigma")
    return VerticalStore(params.L, int(params.sigma), _to_planes(S, params.log_sigma))


def encode_query(T, params: LshParams) -> np.ndarray:
    """Vertical planes of a single query sketch, shape ``(log2 sigma,)``."""
    T = np.asarray(T)
    if T.shape != (params.L,):
        raise ValueError(f"query sketch must have length L={params.L}, got shape {T.shape}")
    _check_planes_params(params.L, params.sigma)
    if T.size and int(T.max()) >= params.sigma:
        raise ValueError("query symbol out of range for sigma")
    return _to_planes(T[None, :], params.log_sigma)[:, 0]


def hamming_vertical(store: VerticalStore, i: int, query_planes) -> int:
    """Hamming distance between stored sketch ``i`` and the query planes."""
    if not 0 <= i < store.n:
        raise IndexError(f"sketch index {i} out of range [0, {store.n})")
    return int(store.hamming(np.array([i]), query_planes)[0])


def hamming_naive(S, T) -> int:
    """Positionwise mismatch count."""
    S = np.asarray(S)
    T = np.asarray(T)
    if S.shape != T.shape:
        raise ValueError("sketches differ in length")
    return int(np.count_nonzero(S != T))
