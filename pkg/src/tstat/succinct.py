"""Rank/Select over bit vectors and tryte-packed trit arrays.

Trits are packed five to a byte as ``sum(c_i * 3**i)`` (a *tryte*, value
at most 242). Rank over trits uses a two-layer directory: a 64-bit
counter per large block of ``t_L`` trits and a 16-bit counter per small
block of ``t_S`` trits, relative to its large block. The tail of a small
block is scanned with a 243 x 6 prefix-count table.

Select is zero-based in the occurrence number: ``select(c, 0)`` is the
position of the first ``c``. Out-of-range selects return ``M``.
"""

import numpy as np
from numba import njit

from . import _binio

__all__ = [
    "TritArray",
    "TritRank",
    "BitVector",
    "PackedInts",
    "trit_pack",
    "trit_get",
    "trit_rank_build",
    "trit_rank",
    "bit_rank",
    "bit_select",
    "DEFAULT_T_L",
    "DEFAULT_T_S",
]

DEFAULT_T_L = 65550
DEFAULT_T_S = 50

_POW3 = np.array([1, 3, 9, 27, 81], dtype=np.int64)
# _TRITS[t, r]: r-th trit of tryte t
_TRITS = ((np.arange(243)[:, None] // _POW3[None, :]) % 3).astype(np.uint8)
# _PREFIX[c, t, r]: occurrences of c among the first r trits of tryte t
_PREFIX = np.zeros((3, 243, 6), dtype=np.uint8)
for _c in range(3):
    _PREFIX[_c, :, 1:] = np.cumsum(_TRITS == _c, axis=1)

_BYTE_POP = np.array([bin(x).count("1") for x in range(256)], dtype=np.uint8)
_BYTE_SELECT = np.zeros((256, 8), dtype=np.uint8)
for _x in range(256):
    _ones = [b for b in range(8) if _x >> b & 1]
    _BYTE_SELECT[_x, : len(_ones)] = _ones


class TritArray:
    """Immutable array of trits packed five per byte.

    Parameters
    ----------
    trits : array_like of int
        Values in ``{0, 1, 2}``.
    """

    def __init__(self, trits=()):
        t = np.asarray(trits, dtype=np.int64).ravel()
        if t.size and (t.min() < 0 or t.max() > 2):
            bad = int(np.flatnonzero((t < 0) | (t > 2))[0])
            raise ValueError(f"trit at position {bad} is {t[bad]}, expected 0, 1 or 2")
        self.M = int(t.size)
        padded = np.zeros(-(-self.M // 5) * 5, dtype=np.int64)
        padded[: self.M] = t
        self.trytes = (padded.reshape(-1, 5) @ _POW3).astype(np.uint8)
        self.trytes.setflags(write=False)

    @classmethod
    def from_trytes(cls, trytes, M: int) -> "TritArray":
        trytes = np.asarray(trytes, dtype=np.uint8)
        if trytes.size != -(-M // 5):
            raise ValueError(f"{trytes.size} trytes cannot hold exactly {M} trits")
        if trytes.size and trytes.max() > 242:
            raise ValueError("tryte value above 242")
        obj = cls.__new__(cls)
        obj.M = int(M)
        obj.trytes = trytes.copy()
        obj.trytes.setflags(write=False)
        return obj

    def __len__(self):
        return self.M

    def __getitem__(self, i):
        if isinstance(i, slice):
            return self.to_numpy()[i]
        i = int(i)
        if i < 0:
            i += self.M
        if not 0 <= i < self.M:
            raise IndexError(f"trit index {i} out of range [0, {self.M})")
        return int(_TRITS[self.trytes[i // 5], i % 5])

    def get_many(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.M):
            raise IndexError("trit index out of range")
        return _TRITS[self.trytes[idx // 5], idx % 5]

    def to_numpy(self) -> np.ndarray:
        return _TRITS[self.trytes].ravel()[: self.M].copy()

    @property
    def nbytes(self) -> int:
        return self.trytes.nbytes

    def write(self, f) -> None:
        _binio.write_u64(f, self.M)
        _binio.write_array(f, self.trytes)

    @classmethod
    def read(cls, f) -> "TritArray":
        M = _binio.read_u64(f)
        return cls.from_trytes(_binio.read_array(f), M)


@njit(cache=True, nogil=True)
def _trit_rank(trytes, lb, sb, t_l, t_s, total, M, c, i):
    if i >= M:
        return total
    r = np.int64(lb[i // t_l]) + np.int64(sb[i // t_s])
    pos = (i // t_s) * t_s
    while pos < i and pos % 5 != 0:
        if _TRITS[trytes[pos // 5], pos % 5] == c:
            r += 1
        pos += 1
    while pos + 5 <= i:
        r += _PREFIX[c, trytes[pos // 5], 5]
        pos += 5
    if pos < i:
        r += _PREFIX[c, trytes[pos // 5], i - pos]
    return r


@njit(cache=True, nogil=True)
def _trit_rank_many(trytes, lb, sb, t_l, t_s, total, M, c, idx, out):
    for q in range(idx.shape[0]):
        out[q] = _trit_rank(trytes, lb, sb, t_l, t_s, total, M, c, idx[q])


class TritRank:
    """Two-layer Rank directory over a :class:`TritArray`.

    ``LB[c][j] = Rank_c(A, t_L * j)`` and
    ``SB[c][k] = Rank_c(A, t_S * k) - LB[c][t_S * k // t_L]``.

    Parameters
    ----------
    A : TritArray
    t_L, t_S : int
        Large and small block spans in trits. ``t_S`` must divide ``t_L``
        and ``t_L - t_S`` must fit in 16 bits.
    symbols : tuple of int
        Trit values whose directories are materialised.
    """

    def __init__(self, A: TritArray, t_L=DEFAULT_T_L, t_S=DEFAULT_T_S, symbols=(0, 1, 2)):
        t_L, t_S = int(t_L), int(t_S)
        if t_S <= 0 or t_L <= 0 or t_L % t_S:
            raise ValueError(f"t_S ({t_S}) must be positive and divide t_L ({t_L})")
        if t_L - t_S >= 2**16:
            raise ValueError(f"t_L={t_L} too large for 16-bit small-block counters")
        symbols = tuple(sorted(set(int(c) for c in symbols)))
        if not symbols or symbols[0] < 0 or symbols[-1] > 2:
            raise ValueError(f"symbols must be a non-empty subset of (0, 1, 2), got {symbols}")
        self.A = A
        self.t_L = t_L
        self.t_S = t_S
        self.symbols = symbols
        self.LB = {}
        self.SB = {}
        self.total = {}
        M = A.M
        trits = A.to_numpy()
        small = np.arange(0, M, t_S, dtype=np.int64)
        for c in symbols:
            prefix = np.zeros(M + 1, dtype=np.int64)
            np.cumsum(trits == c, out=prefix[1:])
            lb = prefix[0:M:t_L].astype(np.uint64)
            sb = (prefix[small] - lb[small // t_L].astype(np.int64)).astype(np.uint16)
            lb.setflags(write=False)
            sb.setflags(write=False)
            self.LB[c] = lb
            self.SB[c] = sb
            self.total[c] = int(prefix[M])

    def _dirs(self, c):
        if c not in self.LB:
            raise KeyError(f"no rank directory for trit {c}; built for {self.symbols}")
        return self.LB[c], self.SB[c]

    def rank(self, c: int, i: int) -> int:
        """Occurrences of ``c`` in ``A[0, i)``."""
        i = int(i)
        if not 0 <= i <= self.A.M:
            raise IndexError(f"rank position {i} out of range [0, {self.A.M}]")
        lb, sb = self._dirs(c)
        return int(_trit_rank(self.A.trytes, lb, sb, self.t_L, self.t_S,
                              self.total[c], self.A.M, c, i))

    def rank_many(self, c: int, idx) -> np.ndarray:
        idx = np.ascontiguousarray(idx, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() > self.A.M):
            raise IndexError("rank position out of range")
        lb, sb = self._dirs(c)
        out = np.empty(idx.shape[0], dtype=np.int64)
        _trit_rank_many(self.A.trytes, lb, sb, self.t_L, self.t_S,
                        self.total[c], self.A.M, c, idx, out)
        return out

    @property
    def nbytes(self) -> int:
        return sum(self.LB[c].nbytes + self.SB[c].nbytes for c in self.symbols)

    def write(self, f) -> None:
        _binio.write_u64(f, self.t_L, self.t_S, len(self.symbols), *self.symbols)
        for c in self.symbols:
            _binio.write_u64(f, self.total[c])
            _binio.write_array(f, self.LB[c])
            _binio.write_array(f, self.SB[c])

    @classmethod
    def read(cls, f, A: TritArray) -> "TritRank":
        t_L, t_S, ns = _binio.read_u64(f, 3)
        symbols = _binio.read_u64(f, ns) if ns > 1 else (_binio.read_u64(f),)
        obj = cls.__new__(cls)
        obj.A, obj.t_L, obj.t_S = A, int(t_L), int(t_S)
        obj.symbols = tuple(int(c) for c in symbols)
        obj.LB, obj.SB, obj.total = {}, {}, {}
        nlb, nsb = -(-A.M // obj.t_L), -(-A.M // obj.t_S)
        for c in obj.symbols:
            obj.total[c] = int(_binio.read_u64(f))
            obj.LB[c] = _binio.read_array(f)
            obj.SB[c] = _binio.read_array(f)
            if obj.LB[c].size != nlb or obj.SB[c].size != nsb:
                raise ValueError("rank directory size does not match trit array")
        return obj


def trit_pack(trits) -> TritArray:
    return TritArray(trits)


def trit_get(A: TritArray, i: int) -> int:
    return A[i]


def trit_rank_build(A: TritArray, t_L=DEFAULT_T_L, t_S=DEFAULT_T_S, symbols=(0, 1, 2)) -> TritRank:
    return TritRank(A, t_L, t_S, symbols)


def trit_rank(A: TritArray, dirs: TritRank, c: int, i: int) -> int:
    if dirs.A is not A:
        raise ValueError("rank directory was built for a different trit array")
    return dirs.rank(c, i)


# Bit vectors ---------------------------------------------------------------

_WORDS_PER_SUPER = 8


@njit(cache=True, nogil=True)
def _bit_rank1(words, sup, sub, M, total, i):
    if i >= M:
        return total
    w = i >> 6
    r = np.int64(sup[w >> 3]) + np.int64(sub[w])
    off = i & 63
    if off:
        r += _popcount(words[w] & ((np.uint64(1) << np.uint64(off)) - np.uint64(1)))
    return r


@njit(cache=True, inline="always")
def _popcount(x):
    c = 0
    while x:
        c += _BYTE_POP[x & np.uint64(0xFF)]
        x >>= np.uint64(8)
    return c


@njit(cache=True, inline="always")
def _before(sup, sub, s, w, c):
    # occurrences of c before superblock s (w < 0) or before word w
    if w < 0:
        ones = np.int64(sup[s])
        return ones if c == 1 else s * 512 - ones
    ones = np.int64(sup[w >> 3]) + np.int64(sub[w])
    return ones if c == 1 else w * 64 - ones


@njit(cache=True, nogil=True)
def _bit_select(words, sup, sub, M, total_c, c, i):
    if i < 0 or i >= total_c:
        return M
    lo = 0
    hi = sup.shape[0] - 1
    while lo < hi:
        mid = (lo + hi + 1) >> 1
        if _before(sup, sub, mid, -1, c) <= i:
            lo = mid
        else:
            hi = mid - 1
    w = lo * 8
    end = min(w + 8, words.shape[0])
    while w + 1 < end and _before(sup, sub, 0, w + 1, c) <= i:
        w += 1
    rem = i - _before(sup, sub, 0, w, c)
    x = words[w]
    if c == 0:
        x = ~x
    for byte in range(8):
        b = x & np.uint64(0xFF)
        cnt = _BYTE_POP[b]
        if rem < cnt:
            return w * 64 + byte * 8 + _BYTE_SELECT[b, rem]
        rem -= cnt
        x >>= np.uint64(8)
    return M


class BitVector:
    """Static bit vector with constant-time Rank and logarithmic Select.

    Bits live in little-endian 64-bit words. The rank directory keeps a
    64-bit cumulative count per 512-bit superblock and a 16-bit count per
    word relative to its superblock.
    """

    def __init__(self, bits=()):
        b = np.asarray(bits).ravel()
        if b.size and b.dtype != bool and (b.min() < 0 or b.max() > 1):
            raise ValueError("bits must be 0 or 1")
        self._build(np.packbits(b.astype(bool), bitorder="little"), int(b.size))

    def _build(self, packed, M):
        self.M = M
        nwords = -(-M // 64)
        buf = np.zeros(nwords * 8, dtype=np.uint8)
        buf[: packed.size] = packed[: nwords * 8]
        self.words = buf.view("<u8").astype(np.uint64)
        counts = np.bitwise_count(self.words).astype(np.int64)
        cum = np.zeros(nwords + 1, dtype=np.int64)
        np.cumsum(counts, out=cum[1:])
        self.ones = int(cum[-1])
        sup = cum[0:nwords:_WORDS_PER_SUPER]
        if sup.size == 0:
            sup = np.zeros(1, dtype=np.int64)
        self.sup = sup.astype(np.uint64)
        self.sub = (cum[:nwords] - sup[np.arange(nwords) // _WORDS_PER_SUPER]).astype(np.uint16)
        for a in (self.words, self.sup, self.sub):
            a.setflags(write=False)

    @classmethod
    def from_words(cls, words, M: int) -> "BitVector":
        obj = cls.__new__(cls)
        obj._build(np.asarray(words, dtype="<u8").view(np.uint8), int(M))
        return obj

    def __len__(self):
        return self.M

    def __getitem__(self, i):
        i = int(i)
        if not 0 <= i < self.M:
            raise IndexError(f"bit index {i} out of range [0, {self.M})")
        return int(self.words[i >> 6] >> np.uint64(i & 63) & np.uint64(1))

    def to_numpy(self) -> np.ndarray:
        return np.unpackbits(self.words.view(np.uint8), bitorder="little")[: self.M]

    def count(self, c: int) -> int:
        return self.ones if c == 1 else self.M - self.ones

    def rank(self, c: int, i: int) -> int:
        """Occurrences of bit ``c`` in ``A[0, i)``."""
        i = int(i)
        if not 0 <= i <= self.M:
            raise IndexError(f"rank position {i} out of range [0, {self.M}]")
        r1 = int(_bit_rank1(self.words, self.sup, self.sub, self.M, self.ones, i))
        return r1 if c == 1 else i - r1

    def select(self, c: int, i: int) -> int:
        """Position of the ``i``-th (zero-based) bit equal to ``c``, or ``M``."""
        if c not in (0, 1):
            raise ValueError(f"bit value must be 0 or 1, got {c}")
        if i < 0:
            raise IndexError("occurrence number must be non-negative")
        return int(_bit_select(self.words, self.sup, self.sub, self.M,
                               self.count(c), c, int(i)))

    @property
    def nbytes(self) -> int:
        return self.words.nbytes + self.sup.nbytes + self.sub.nbytes

    def write(self, f) -> None:
        _binio.write_u64(f, self.M)
        _binio.write_array(f, self.words)

    @classmethod
    def read(cls, f) -> "BitVector":
        M = _binio.read_u64(f)
        words = _binio.read_array(f)
        if words.size != -(-M // 64):
            raise ValueError("bit vector payload does not match its length")
        return cls.from_words(words, M)


def bit_rank(A: BitVector, c: int, i: int) -> int:
    return A.rank(c, i)


def bit_select(A: BitVector, c: int, i: int) -> int:
    return A.select(c, i)


# Fixed-width packed integers ----------------------------------------------


@njit(cache=True, nogil=True, inline="always")
def _packed_get(words, width, mask, p):
    bit = p * width
    w = bit >> 6
    off = bit & 63
    v = words[w] >> np.uint64(off)
    if off + width > 64:
        v |= words[w + 1] << np.uint64(64 - off)
    return v & mask


@njit(cache=True, nogil=True)
def _packed_fill(values, width, words):
    for p in range(values.shape[0]):
        v = np.uint64(values[p])
        bit = p * width
        w = bit >> 6
        off = bit & 63
        words[w] |= v << np.uint64(off)
        if off + width > 64:
            words[w + 1] |= v >> np.uint64(64 - off)


@njit(cache=True, nogil=True)
def _packed_unpack(words, width, mask, lo, hi, out):
    for p in range(lo, hi):
        out[p - lo] = _packed_get(words, width, mask, p)


class PackedInts:
    """Non-negative integers stored in ``width`` bits each.

    ``width`` defaults to the bit length of the largest value bound
    *limit* (exclusive), so ids below ``n`` take ``ceil(log2 n)`` bits.
    """

    def __init__(self, values=(), limit=None, width=None):
        v = np.asarray(values, dtype=np.int64).ravel()
        if v.size and v.min() < 0:
            raise ValueError("packed values must be non-negative")
        top = int(v.max()) + 1 if v.size else 1
        if limit is not None:
            if top > limit:
                raise ValueError(f"value {top - 1} not below limit {limit}")
            top = limit
        if width is None:
            width = max(1, (top - 1).bit_length())
        if not 1 <= width <= 64 or (v.size and int(v.max()).bit_length() > width):
            raise ValueError(f"width {width} cannot hold the values")
        self.size = int(v.size)
        self.width = int(width)
        # one spare word so reads never straddle the end
        self.words = np.zeros(-(-self.size * self.width // 64) + 1, dtype=np.uint64)
        _packed_fill(v, self.width, self.words)
        self.words.setflags(write=False)

    @property
    def mask(self):
        return np.uint64((1 << self.width) - 1)

    @classmethod
    def from_words(cls, words, size, width) -> "PackedInts":
        obj = cls.__new__(cls)
        obj.size, obj.width = int(size), int(width)
        if words.size != -(-obj.size * obj.width // 64) + 1:
            raise ValueError("packed payload does not match its length")
        obj.words = np.asarray(words, dtype=np.uint64).copy()
        obj.words.setflags(write=False)
        return obj

    def __len__(self):
        return self.size

    def __getitem__(self, i):
        if isinstance(i, slice):
            lo, hi, step = i.indices(self.size)
            if step != 1:
                return self.to_numpy()[i]
            out = np.empty(max(0, hi - lo), dtype=np.int64)
            _packed_unpack(self.words, self.width, self.mask, lo, max(lo, hi), out)
            return out
        i = int(i)
        if i < 0:
            i += self.size
        if not 0 <= i < self.size:
            raise IndexError(f"index {i} out of range [0, {self.size})")
        return int(_packed_get(self.words, self.width, self.mask, i))

    def to_numpy(self) -> np.ndarray:
        return self[0:self.size]

    @property
    def nbytes(self) -> int:
        return self.words.nbytes

    def write(self, f) -> None:
        _binio.write_u64(f, self.size, self.width)
        _binio.write_array(f, self.words)

    @classmethod
    def read(cls, f) -> "PackedInts":
        size, width = _binio.read_u64(f, 2)
        return cls.from_words(_binio.read_array(f), size, width)
