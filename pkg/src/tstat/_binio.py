"""Little-endian array and scalar framing shared by the on-disk formats."""

import struct

import numpy as np

_CODES = {
    np.dtype("<u1"): 1,
    np.dtype("<u2"): 2,
    np.dtype("<u4"): 3,
    np.dtype("<u8"): 4,
    np.dtype("<i8"): 5,
    np.dtype("<f8"): 6,
}
_DTYPES = {v: k for k, v in _CODES.items()}


def write_array(f, arr) -> None:
    arr = np.asarray(arr)
    dt = arr.dtype.newbyteorder("<")
    if dt not in _CODES:
        raise TypeError(f"unsupported dtype for serialization: {arr.dtype}")
    f.write(struct.pack("<BQ", _CODES[dt], arr.size))
    f.write(np.ascontiguousarray(arr, dtype=dt).tobytes())


def read_array(f) -> np.ndarray:
    head = f.read(9)
    if len(head) != 9:
        raise EOFError("truncated array header")
    code, size = struct.unpack("<BQ", head)
    if code not in _DTYPES:
        raise ValueError(f"unknown array dtype code {code}")
    dt = _DTYPES[code]
    raw = f.read(size * dt.itemsize)
    if len(raw) != size * dt.itemsize:
        raise EOFError("truncated array payload")
    return np.frombuffer(raw, dtype=dt).astype(dt.newbyteorder("="), copy=True)


def write_u64(f, *values) -> None:
    f.write(struct.pack(f"<{len(values)}Q", *values))


def read_u64(f, count=1):
    raw = f.read(8 * count)
    if len(raw) != 8 * count:
        raise EOFError("truncated header")
    vals = struct.unpack(f"<{count}Q", raw)
    return vals[0] if count == 1 else vals
