"""Command-line interface: ``tstat {build,query,bench,groundtruth,stats}``.

Exit status is 0 on success, 1 on validation errors and 2 on I/O errors.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import io as tio
from .sketch import LshParams, make_hashers, sketch_many
from .stat import StatIndex

BENCH_HELP = "CSV columns, in order: " + ", ".join(tio.BENCH_COLUMNS)


def _threads_default():
    try:
        return max(1, int(os.environ.get("TSTAT_THREADS", "1")))
    except ValueError:
        return 1


def _log(msg):
    print(msg, file=sys.stderr)


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", encoding="utf-8", newline="\n")


def cmd_build(args):
    trajs = tio.load_trajectories(args.dataset, args.format)
    if not trajs:
        raise ValueError("dataset is empty")
    d = trajs[0].d
    if (args.delta is None) == (args.R is None):
        raise ValueError("give exactly one of --delta or --R")
    delta = args.delta if args.delta is not None else 8.0 * d * args.R
    params = LshParams(L=args.L, sigma=args.sigma, delta=delta, k=args.k, seed=args.seed)
    t0 = time.perf_counter()
    hashers = make_hashers(params, d)
    S = sketch_many(trajs, hashers)
    t1 = time.perf_counter()
    idx = StatIndex.build(S, params, args.B, args.lam, hashers=hashers,
                          ids=[t.id for t in trajs], threads=args.threads)
    t2 = time.perf_counter()
    tio.save_index(idx, args.out, build_R=args.R)
    st = idx.stats()
    _log(f"indexed {idx.n} trajectories (d={d}, delta={delta:g})")
    _log(f"sketching: {t1 - t0:.3f} s, STAT construction: {t2 - t1:.3f} s")
    _log(f"N={st.N} N_in={st.N_in} STAT bytes={st.stat_bytes} sketch bytes={st.bytes['sketches']}")


def _aligned_trajectories(idx, path, fmt):
    by_id = {t.id: t for t in tio.load_trajectories(path, fmt)}
    try:
        return [by_id[int(i)] for i in idx.ids]
    except KeyError as e:
        raise ValueError(f"trajectory {e.args[0]} of the index is missing from {path}") from None


def _check_queries(idx, queries):
    for Q in queries:
        if Q.d != idx.d:
            raise ValueError(f"query {Q.id} has dimension {Q.d}, index expects {idx.d}")


def cmd_query(args):
    idx = tio.load_index(args.index)
    if not 0 <= args.K <= idx.params.L:
        raise ValueError(f"K must lie in [0, L={idx.params.L}], got {args.K}")
    queries = tio.load_trajectories(args.queries, args.format)
    _check_queries(idx, queries)
    trajs = None
    if args.mode == "frechet":
        if args.dataset is None:
            raise ValueError("frechet mode needs --dataset with the indexed trajectories")
        if args.R is None:
            raise ValueError("frechet mode needs --R")
        trajs = _aligned_trajectories(idx, args.dataset, args.format)
    sk = sketch_many(queries, idx.hashers)
    R = args.R if args.mode == "frechet" else None
    if R is None:
        results = idx.query_many(sk, args.K, threads=args.threads)
    else:
        results = [idx.query(T, args.K, trajs, Q, R) for T, Q in zip(sk, queries)]
    out = _open_out(args.out)
    try:
        for Q, res in zip(queries, results):
            if R is None:
                ext = np.sort(idx.ids[res.hamming])
                body = ",".join(str(int(i)) for i in ext)
            else:
                pairs = sorted(zip(idx.ids[res.verified].tolist(), res.distances.tolist()))
                body = ",".join(f"{i}:{dist:.9g}" for i, dist in pairs)
            out.write(f"{Q.id}\t{body}\n")
    finally:
        if out is not sys.stdout:
            out.close()


def cmd_bench(args):
    idx = tio.load_index(args.index)
    for K in args.K:
        if not 0 <= K <= idx.params.L:
            raise ValueError(f"K must lie in [0, L={idx.params.L}], got {K}")
    trajs = _aligned_trajectories(idx, args.dataset, args.format)
    queries = tio.load_trajectories(args.queries, args.format)
    _check_queries(idx, queries)
    truth = None
    if args.gt:
        gt = tio.read_ground_truth(args.gt)
        pos = {int(e): p for p, e in enumerate(idx.ids)}
        try:
            truth = [sorted(pos[i] for i in gt[Q.id]) for Q in queries]
        except KeyError as e:
            raise ValueError(f"ground truth has no entry or unknown id {e.args[0]}") from None
    report = tio.run_bench(idx, trajs, queries, args.K, args.R, truth=truth, threads=args.threads)
    out = _open_out(args.out)
    try:
        report.write_csv(out)
    finally:
        if out is not sys.stdout:
            out.close()
    for flag in report.flags:
        _log(f"warning: {flag}")
    _log(json.dumps({"summary": report.summary(), "memory_bytes": report.memory}, indent=2))


def cmd_groundtruth(args):
    trajs = tio.load_trajectories(args.dataset, args.format)
    queries = tio.load_trajectories(args.queries, args.format)
    ans = tio.ground_truth(trajs, queries, args.R)
    ids = np.array([t.id for t in trajs], dtype=np.int64)
    ext = [np.sort(ids[a]) for a in ans]
    out = _open_out(args.out)
    try:
        tio.write_ground_truth(out, [Q.id for Q in queries], ext)
    finally:
        if out is not sys.stdout:
            out.close()
    mean = float(np.mean([a.size for a in ans])) if ans else 0.0
    _log(f"mean solutions per query at R={args.R:g}: {mean:.3f}")


def cmd_stats(args):
    idx = tio.load_index(args.index)
    st = idx.stats()
    info = {
        "n": idx.n, "L": idx.params.L, "sigma": idx.params.sigma, "delta": idx.params.delta,
        "k": idx.params.k, "seed": idx.params.seed, "B": idx.blocks.B, "lambda": idx.lam,
        "N": st.N, "N_in": st.N_in,
        "blocks": [{"N": b.N, "N_in": b.N_in, "internal_per_level": b.internal_per_level,
                    "leaves_per_level": b.leaves_per_level} for b in st.blocks],
        "bytes": st.bytes, "stat_bytes": st.stat_bytes,
    }
    print(json.dumps(info, indent=2))


def build_parser():
    p = argparse.ArgumentParser(prog="tstat", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--format", choices=("tsv", "binary"), default=None,
                        help="trajectory file format (default: by extension, .bin/.traj = binary)")
        sp.add_argument("--threads", type=int, default=_threads_default(),
                        help="worker threads (default: $TSTAT_THREADS or 1)")

    b = sub.add_parser("build", help="sketch a dataset and write an index")
    b.add_argument("dataset")
    b.add_argument("-o", "--out", required=True)
    b.add_argument("--L", type=int, default=64)
    b.add_argument("--sigma", type=int, default=2**8)
    b.add_argument("--delta", type=float)
    b.add_argument("--R", type=float, help="derive delta = 8 d R")
    b.add_argument("--k", type=int, default=1)
    b.add_argument("--B", type=int, default=8)
    b.add_argument("--lambda", dest="lam", type=int, default=0)
    b.add_argument("--seed", type=int, default=0)
    common(b)
    b.set_defaults(func=cmd_build)

    q = sub.add_parser("query", help="search an index; one output line per query")
    q.add_argument("index")
    q.add_argument("queries")
    q.add_argument("--K", type=int, required=True)
    q.add_argument("--R", type=float)
    q.add_argument("--mode", choices=("hamming", "frechet"), default="hamming")
    q.add_argument("--dataset", help="indexed trajectories (frechet mode)")
    q.add_argument("-o", "--out")
    common(q)
    q.set_defaults(func=cmd_query)

    be = sub.add_parser("bench", help="time queries and score recall/precision",
                        description=BENCH_HELP)
    be.add_argument("index")
    be.add_argument("dataset")
    be.add_argument("queries")
    be.add_argument("--K", type=int, nargs="+", required=True)
    be.add_argument("--R", type=float, required=True)
    be.add_argument("--gt", help="ground-truth file from `tstat groundtruth`")
    be.add_argument("-o", "--out")
    common(be)
    be.set_defaults(func=cmd_bench)

    g = sub.add_parser("groundtruth", help="brute-force Fréchet answers per query")
    g.add_argument("dataset")
    g.add_argument("queries")
    g.add_argument("--R", type=float, required=True)
    g.add_argument("-o", "--out")
    common(g)
    g.set_defaults(func=cmd_groundtruth)

    s = sub.add_parser("stats", help="node counts and memory breakdown of an index")
    s.add_argument("index")
    s.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except OSError as e:
        _log(f"tstat: I/O error: {e}")
        return 2
    except ValueError as e:
        _log(f"tstat: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
