"""Dataset files, index persistence, ground truth and benchmark reports.

Trajectory files come in two formats:

``tsv``
    one record per line, ``id<TAB>x1,y1 x2,y2 ...``; blank lines and lines
    starting with ``#`` are skipped.
``binary``
    little-endian ``u32 d, u64 n`` then per record ``u64 id, u32 m`` and
    ``m * d`` float64 values.

Index files start with the magic ``TSTATIDX`` and a version byte.
"""

import csv
import io as _io
import math
import statistics
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit, prange

from . import _binio
from .geometry import Trajectory, _dfd_leq, frechet_leq, radius_sq
from .sketch import HasherBank, LshParams, VerticalStore
from .stat import StatIndex, StatTrie
from .trie import BlockConfig

__all__ = [
    "load_trajectories",
    "save_trajectories",
    "save_index",
    "load_index",
    "ground_truth",
    "write_ground_truth",
    "read_ground_truth",
    "BenchReport",
    "run_bench",
    "IndexFormatError",
    "MAGIC",
    "VERSION",
]

MAGIC = b"TSTATIDX"
VERSION = 1
_TRAJ_HEAD = struct.Struct("<IQ")
_TRAJ_REC = struct.Struct("<QI")


class IndexFormatError(ValueError):
    pass


def _detect_format(path, fmt):
    if fmt is not None:
        return fmt
    return "binary" if Path(path).suffix in (".bin", ".traj") else "tsv"


def load_trajectories(path, format: str | None = None) -> list:
    """Read a trajectory collection; see the module docstring for formats."""
    fmt = _detect_format(path, format)
    if fmt == "tsv":
        with open(path, "r", encoding="utf-8") as f:
            trajs = _parse_tsv(f)
    elif fmt == "binary":
        with open(path, "rb") as f:
            trajs = _parse_binary(f)
    else:
        raise ValueError(f"unknown trajectory format {fmt!r}")
    seen = set()
    for t in trajs:
        if t.id in seen:
            raise ValueError(f"duplicate trajectory id {t.id}")
        seen.add(t.id)
    return trajs


def _parse_tsv(f) -> list:
    out = []
    d = None
    for lineno, line in enumerate(f, 1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        try:
            head, _, body = line.partition("\t")
            if not body:
                raise ValueError("missing tab-separated point list")
            tid = int(head)
            pts = [[float(x) for x in tok.split(",")] for tok in body.split()]
            if len({len(p) for p in pts}) != 1:
                raise ValueError("points have differing dimensions")
            t = Trajectory(tid, np.array(pts))
        except ValueError as e:
            raise ValueError(f"line {lineno}: {e}") from None
        if d is None:
            d = t.d
        elif t.d != d:
            raise ValueError(f"line {lineno}: dimension {t.d} differs from {d}")
        out.append(t)
    return out


def _parse_binary(f) -> list:
    head = f.read(_TRAJ_HEAD.size)
    if not head:
        return []
    if len(head) != _TRAJ_HEAD.size:
        raise ValueError("truncated trajectory header")
    d, n = _TRAJ_HEAD.unpack(head)
    out = []
    for r in range(n):
        rec = f.read(_TRAJ_REC.size)
        if len(rec) != _TRAJ_REC.size:
            raise ValueError(f"record {r}: truncated header")
        tid, m = _TRAJ_REC.unpack(rec)
        raw = f.read(8 * m * d)
        if len(raw) != 8 * m * d:
            raise ValueError(f"record {r}: truncated coordinates")
        try:
            out.append(Trajectory(tid, np.frombuffer(raw, dtype="<f8").reshape(m, d)))
        except ValueError as e:
            raise ValueError(f"record {r}: {e}") from None
    return out


def save_trajectories(trajectories, path, format: str | None = None) -> None:
    fmt = _detect_format(path, format)
    trajectories = list(trajectories)
    if fmt == "tsv":
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for t in trajectories:
                pts = " ".join(",".join(repr(float(x)) for x in p) for p in t.points)
                f.write(f"{t.id}\t{pts}\n")
    elif fmt == "binary":
        d = trajectories[0].d if trajectories else 0
        with open(path, "wb") as f:
            f.write(_TRAJ_HEAD.pack(d, len(trajectories)))
            for t in trajectories:
                if t.d != d:
                    raise ValueError("trajectories have differing dimensions")
                f.write(_TRAJ_REC.pack(t.id, t.m))
                f.write(np.ascontiguousarray(t.points, dtype="<f8").tobytes())
    else:
        raise ValueError(f"unknown trajectory format {fmt!r}")


# Index files ---------------------------------------------------------------

_HEADER = struct.Struct("<QQdQQQQQQd")


def save_index(idx: StatIndex, path, build_R: float | None = None) -> None:
    """Write *idx* to *path*. Trajectories are not embedded.

    *build_R* records the radius that ``delta`` was derived from, if any.
    """
    p = idx.params
    d = 0 if idx.hashers is None else idx.hashers.d
    buf = _io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<B", VERSION))
    buf.write(_HEADER.pack(p.L, p.sigma, p.delta, p.k, p.seed, idx.blocks.B, idx.lam,
                           idx.n, d, math.nan if build_R is None else float(build_R)))
    if d:
        _binio.write_array(buf, idx.hashers.shifts.ravel())
        _binio.write_array(buf, idx.hashers.mix_seeds)
    _binio.write_array(buf, idx.ids)
    _binio.write_array(buf, idx.store.planes.ravel())
    for t in idx.tries:
        t.write(buf)
    Path(path).write_bytes(buf.getvalue())


def load_index(path) -> StatIndex:
    """Read an index written by :func:`save_index`.

    The radius recorded at build time is exposed as ``idx.build_R``.
    """
    with open(path, "rb") as f:
        if f.read(len(MAGIC)) != MAGIC:
            raise IndexFormatError(f"{path}: not a tstat index file")
        (version,) = struct.unpack("<B", f.read(1))
        if version != VERSION:
            raise IndexFormatError(f"{path}: index version {version}, expected {VERSION}")
        raw = f.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise IndexFormatError(f"{path}: truncated header")
        L, sigma, delta, k, seed, B, lam, n, d, build_R = _HEADER.unpack(raw)
        try:
            params = LshParams(L=L, sigma=sigma, delta=delta, k=k, seed=seed)
            hashers = None
            if d:
                shifts = _binio.read_array(f).reshape(L * k, d)
                seeds = _binio.read_array(f)
                shifts.setflags(write=False)
                seeds.setflags(write=False)
                hashers = HasherBank(params, shifts, seeds)
            ids = _binio.read_array(f)
            planes = _binio.read_array(f).reshape(params.log_sigma, n)
            store = VerticalStore(L, sigma, planes)
            tries = [StatTrie.read(f) for _ in range(B)]
        except (EOFError, ValueError) as e:
            raise IndexFormatError(f"{path}: {e}") from None
    idx = StatIndex(params, BlockConfig(L, B), lam, hashers, store, tries, ids)
    idx.build_R = None if math.isnan(build_R) else build_R
    return idx


# Ground truth --------------------------------------------------------------

def _flatten(trajectories):
    pts = [np.asarray(getattr(t, "points", t), dtype=np.float64) for t in trajectories]
    offsets = np.zeros(len(pts) + 1, dtype=np.int64)
    np.cumsum([p.shape[0] for p in pts], out=offsets[1:])
    flat = np.ascontiguousarray(np.concatenate(pts)) if pts else np.zeros((0, 1))
    return flat, offsets


@njit(cache=True, nogil=True, parallel=True)
def _leq_row(flat, offsets, q, r2, out):
    for i in prange(offsets.shape[0] - 1):
        out[i] = _dfd_leq(flat[offsets[i]:offsets[i + 1]], q, r2)


def ground_truth(trajectories, queries, R: float) -> list:
    """For each query, the sorted positions of trajectories within Fréchet *R*.

    Brute force: ``O(n * m^2)`` per query.
    """
    r2 = radius_sq(R)
    flat, offsets = _flatten(trajectories)
    n = offsets.size - 1
    out = []
    hits = np.zeros(n, dtype=np.bool_)
    for Q in queries:
        q = np.ascontiguousarray(getattr(Q, "points", Q), dtype=np.float64)
        if n and q.shape[1] != flat.shape[1]:
            raise ValueError("query dimension differs from the collection")
        _leq_row(flat, offsets, q, r2, hits)
        out.append(np.flatnonzero(hits))
    return out


def write_ground_truth(path_or_file, query_ids, answers) -> None:
    """One line per query: ``query_id<TAB>id,id,...`` (external ids)."""
    own = isinstance(path_or_file, (str, Path))
    f = open(path_or_file, "w", encoding="utf-8") if own else path_or_file
    try:
        for qid, ans in zip(query_ids, answers):
            f.write(f"{qid}\t{','.join(str(int(a)) for a in ans)}\n")
    finally:
        if own:
            f.close()


def read_ground_truth(path) -> dict:
    gt = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            head, _, body = line.partition("\t")
            try:
                gt[int(head)] = [int(x) for x in body.split(",") if x]
            except ValueError:
                raise ValueError(f"line {lineno}: malformed ground-truth record") from None
    return gt


# Benchmarks ----------------------------------------------------------------

BENCH_COLUMNS = (
    "query_id", "K", "candidates", "hamming", "verified", "ground_truth",
    "recall", "precision", "nodes_visited", "search_ms", "total_ms",
)


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)
    memory: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def write_csv(self, f) -> None:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(BENCH_COLUMNS)
        for r in self.rows:
            w.writerow(["" if r[c] is None else (f"{r[c]:.6f}" if isinstance(r[c], float) else r[c])
                        for c in BENCH_COLUMNS])

    def summary(self) -> dict:
        """Per-K means (recall and precision averaged per query) and timings."""
        out = {}
        for K in sorted({r["K"] for r in self.rows}):
            rows = [r for r in self.rows if r["K"] == K]
            rec = [r["recall"] for r in rows if r["recall"] is not None]
            pre = [r["precision"] for r in rows if r["precision"] is not None]
            t = [r["search_ms"] for r in rows]
            out[K] = {
                "queries": len(rows),
                "recall": statistics.fmean(rec) if rec else None,
                "precision": statistics.fmean(pre) if pre else None,
                "mean_search_ms": statistics.fmean(t),
                "median_search_ms": statistics.median(t),
                "mean_candidates": statistics.fmean(r["candidates"] for r in rows),
            }
        return out


def recall_precision(found, truth):
    """``(recall, precision)``; either is ``None`` when undefined."""
    found = set(int(x) for x in found)
    truth = set(int(x) for x in truth)
    hit = len(found & truth)
    recall = hit / len(truth) if truth else None
    precision = hit / len(found) if found else None
    return recall, precision


def run_bench(idx: StatIndex, trajectories, queries, K_list, R: float,
              truth=None, threads: int = 1) -> BenchReport:
    """Time Hamming search plus Fréchet verification for each (query, K).

    *truth* maps query position to ground-truth positions in
    *trajectories*; computed by brute force when omitted. Sketching the
    queries happens before timing starts.
    """
    if truth is None:
        truth = ground_truth(trajectories, queries, R)
    sketches = [idx.sketch_query(Q) for Q in queries]
    report = BenchReport(memory=idx.stats().bytes)
    build_R = getattr(idx, "build_R", None)
    if build_R is not None and build_R != R:
        report.flags.append(f"index delta was derived from R={build_R}, queried at R={R}")

    def one(args):
        qi, K = args
        t0 = time.perf_counter()
        res = idx.query(sketches[qi], K)
        t1 = time.perf_counter()
        keep = [i for i in res.hamming if frechet_leq(trajectories[i], queries[qi], R)]
        t2 = time.perf_counter()
        rec, pre = recall_precision(res.hamming, truth[qi])
        return {
            "query_id": int(getattr(queries[qi], "id", qi)), "K": int(K),
            "candidates": int(res.candidates.size), "hamming": int(res.hamming.size),
            "verified": len(keep), "ground_truth": len(truth[qi]),
            "recall": rec, "precision": pre, "nodes_visited": res.nodes_visited,
            "search_ms": (t1 - t0) * 1e3, "total_ms": (t2 - t0) * 1e3,
        }

    jobs = [(qi, K) for K in K_list for qi in range(len(queries))]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            report.rows = list(ex.map(one, jobs))
    else:
        report.rows = [one(j) for j in jobs]
    return report
