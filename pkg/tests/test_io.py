import csv
import io
import json
import math

import numpy as np
import pytest

from oracles import frechet_exhaustive
from tstat import io as tio
from tstat.cli import main
from tstat.geometry import Trajectory
from tstat.sketch import LshParams, sketch_many
from tstat.stat import StatIndex
from tstat.synthetic import clustered_trajectories, perturb


def test_tsv_record(tmp_path):
    p = tmp_path / "a.tsv"
    p.write_text("# header comment\n7\t0.5,1.0 2.0,3.0\n\n")
    (t,) = tio.load_trajectories(p)
    assert t.id == 7
    assert t.points.tolist() == [[0.5, 1.0], [2.0, 3.0]]


def test_empty_files(tmp_path):
    p = tmp_path / "e.tsv"
    p.write_text("")
    assert tio.load_trajectories(p) == []
    b = tmp_path / "e.bin"
    b.write_bytes(b"")
    assert tio.load_trajectories(b) == []


@pytest.mark.parametrize("text, where", [
    ("1\t0,0 1,1\nx\t0,0\n", "line 2"),
    ("1\t0,0 1\n", "line 1"),
    ("1\t0,0\n2\t0,0,0\n", "line 2"),
    ("1\n", "line 1"),
    ("1\t0,nan\n", "line 1"),
])
def test_tsv_errors(tmp_path, text, where):
    p = tmp_path / "bad.tsv"
    p.write_text(text)
    with pytest.raises(ValueError, match=where):
        tio.load_trajectories(p)


def test_duplicate_ids(tmp_path):
    p = tmp_path / "dup.tsv"
    p.write_text("1\t0,0\n1\t1,1\n")
    with pytest.raises(ValueError, match="duplicate"):
        tio.load_trajectories(p)


@pytest.mark.parametrize("suffix", [".tsv", ".bin"])
def test_round_trip(tmp_path, suffix):
    trajs = clustered_trajectories(50, n_clusters=3, d=3, seed=4)
    p = tmp_path / f"t{suffix}"
    tio.save_trajectories(trajs, p)
    back = tio.load_trajectories(p)
    assert [t.id for t in back] == [t.id for t in trajs]
    assert all(np.array_equal(a.points, b.points) for a, b in zip(back, trajs))


def test_truncated_binary(tmp_path):
    p = tmp_path / "t.bin"
    tio.save_trajectories(clustered_trajectories(5, n_clusters=1, seed=1), p)
    raw = p.read_bytes()
    (tmp_path / "cut.bin").write_bytes(raw[:-4])
    with pytest.raises(ValueError, match="truncated"):
        tio.load_trajectories(tmp_path / "cut.bin")


@pytest.fixture(scope="module")
def small_setup():
    trajs = clustered_trajectories(400, n_clusters=8, noise=0.1, seed=11)
    params = LshParams.from_radius(0.5, 2, seed=5)
    idx = StatIndex.from_trajectories(trajs, params, 8, 3)
    rng = np.random.default_rng(2)
    queries = [perturb(trajs[i], 0.1, rng, new_id=1000 + i) for i in range(0, 400, 4)]
    return trajs, idx, queries


def test_index_persistence(tmp_path, small_setup):
    trajs, idx, queries = small_setup
    tio.save_index(idx, tmp_path / "a.idx", build_R=0.5)
    back = tio.load_index(tmp_path / "a.idx")
    assert back.build_R == 0.5
    assert np.array_equal(back.ids, idx.ids)
    for Q in queries:
        for K in (0, 4, 12):
            a = idx.query_trajectory(Q, K)
            b = back.query_trajectory(Q, K)
            assert np.array_equal(a.candidates, b.candidates)
            assert np.array_equal(a.hamming, b.hamming)
    # deterministic bytes for the same seed
    again = StatIndex.from_trajectories(trajs, idx.params, 8, 3)
    tio.save_index(again, tmp_path / "b.idx", build_R=0.5)
    assert (tmp_path / "a.idx").read_bytes() == (tmp_path / "b.idx").read_bytes()


def test_index_without_hashers(tmp_path, rng):
    S = rng.integers(0, 16, size=(50, 32))
    idx = StatIndex.build(S, LshParams(L=32, sigma=16), 4, 1)
    tio.save_index(idx, tmp_path / "s.idx")
    back = tio.load_index(tmp_path / "s.idx")
    assert back.hashers is None and back.build_R is None
    assert np.array_equal(back.query(S[3], 5).hamming, idx.query(S[3], 5).hamming)


def test_index_refusals(tmp_path, small_setup):
    _, idx, _ = small_setup
    p = tmp_path / "x.idx"
    tio.save_index(idx, p)
    raw = p.read_bytes()
    (tmp_path / "magic.idx").write_bytes(b"NOTANIDX" + raw[8:])
    (tmp_path / "ver.idx").write_bytes(raw[:8] + bytes([tio.VERSION + 1]) + raw[9:])
    (tmp_path / "cut.idx").write_bytes(raw[: len(raw) // 2])
    for name, msg in (("magic", "not a tstat"), ("ver", "version"), ("cut", None)):
        with pytest.raises(tio.IndexFormatError, match=msg):
            tio.load_index(tmp_path / f"{name}.idx")


def test_ground_truth_extremes(small_setup):
    trajs, _, queries = small_setup
    qs = queries[:10] + [trajs[3]]
    zero = tio.ground_truth(trajs, qs, 0.0)
    assert 3 in zero[-1]
    for Q, ans in zip(qs, zero):
        assert all(np.array_equal(trajs[i].points, Q.points) or
                   frechet_exhaustive(trajs[i].points, Q.points) == 0 for i in ans)
    inf = tio.ground_truth(trajs, qs, math.inf)
    assert all(a.tolist() == list(range(len(trajs))) for a in inf)
    with pytest.raises(ValueError):
        tio.ground_truth(trajs, qs, -1.0)


def test_ground_truth_pairwise(rng):
    trajs = clustered_trajectories(40, n_clusters=4, m_range=(2, 6), noise=1.0, seed=8)
    qs = trajs[:8]
    for R in (0.5, 2.0, 10.0):
        ans = tio.ground_truth(trajs, qs, R)
        for Q, a in zip(qs, ans):
            ref = [i for i, P in enumerate(trajs) if frechet_exhaustive(P.points, Q.points) <= R]
            assert a.tolist() == ref


def test_ground_truth_file(tmp_path):
    p = tmp_path / "gt.txt"
    tio.write_ground_truth(p, [5, 9], [[1, 2, 3], []])
    assert p.read_text() == "5\t1,2,3\n9\t\n"
    assert tio.read_ground_truth(p) == {5: [1, 2, 3], 9: []}


def test_recall_precision_toy():
    truth = [2, 3, 4, 5]
    assert tio.recall_precision([1, 2, 3], truth) == (0.5, 2 / 3)
    assert tio.recall_precision(range(10), truth) == (1.0, 0.4)
    assert tio.recall_precision([], truth) == (0.0, None)
    assert tio.recall_precision([1], []) == (None, 0.0)


def test_bench_report(small_setup):
    trajs, idx, queries = small_setup
    report = tio.run_bench(idx, trajs, queries[:10], [0, 64], 0.5)
    assert len(report.rows) == 20
    full = [r for r in report.rows if r["K"] == 64]
    # K = L passes every sketch, so nothing within R can be missed
    assert all(r["recall"] in (1.0, None) for r in full)
    assert all(r["verified"] == r["ground_truth"] for r in full)
    buf = io.StringIO()
    report.write_csv(buf)
    rows = list(csv.DictReader(io.StringIO(buf.getvalue())))
    assert len(rows) == 20 and tuple(rows[0]) == tio.BENCH_COLUMNS
    s = report.summary()
    assert set(s) == {0, 64} and s[64]["queries"] == 10
    assert "sketches" in report.memory
    idx.build_R = 1.0
    try:
        assert tio.run_bench(idx, trajs, queries[:1], [4], 0.5).flags
    finally:
        del idx.build_R


# CLI -----------------------------------------------------------------------

@pytest.fixture
def cli_files(tmp_path):
    trajs = clustered_trajectories(200, n_clusters=4, noise=0.1, seed=21)
    data = tmp_path / "data.tsv"
    tio.save_trajectories(trajs, data)
    rng = np.random.default_rng(0)
    qs = [perturb(trajs[i], 0.05, rng, new_id=500 + i) for i in range(0, 200, 20)]
    qpath = tmp_path / "q.tsv"
    tio.save_trajectories(qs, qpath)
    return tmp_path, data, qpath, trajs, qs


def test_cli_pipeline(cli_files, capsys):
    d, data, qpath, trajs, qs = cli_files
    idx = d / "i.idx"
    assert main(["build", str(data), "-o", str(idx), "--R", "0.5", "--B", "8",
                 "--lambda", "2", "--seed", "3"]) == 0
    assert "STAT construction" in capsys.readouterr().err

    out = d / "ham.txt"
    assert main(["query", str(idx), str(qpath), "--K", "10", "-o", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert [int(l.split("\t")[0]) for l in lines] == [q.id for q in qs]

    # Hamming output agrees with the library
    lib = tio.load_index(idx)
    sk = sketch_many(qs, lib.hashers)
    for line, T in zip(lines, sk):
        ids = [int(x) for x in line.split("\t")[1].split(",") if x]
        assert ids == sorted(lib.ids[lib.query(T, 10).hamming].tolist())

    fout = d / "fr.txt"
    assert main(["query", str(idx), str(qpath), "--K", "10", "--mode", "frechet",
                 "--R", "0.5", "--dataset", str(data), "-o", str(fout)]) == 0
    by_id = {t.id: t for t in trajs}
    for line, Q in zip(fout.read_text().splitlines(), qs):
        for tok in filter(None, line.split("\t")[1].split(",")):
            i, dist = tok.split(":")
            assert float(dist) <= 0.5
            assert math.isclose(float(dist), frechet_exhaustive(by_id[int(i)].points, Q.points),
                                rel_tol=1e-8)

    gt = d / "gt.txt"
    assert main(["groundtruth", str(data), str(qpath), "--R", "0.5", "-o", str(gt)]) == 0
    assert len(tio.read_ground_truth(gt)) == len(qs)

    csvp = d / "b.csv"
    assert main(["bench", str(idx), str(data), str(qpath), "--K", "4", "12", "--R", "0.5",
                 "--gt", str(gt), "-o", str(csvp)]) == 0
    rows = list(csv.DictReader(csvp.open()))
    assert len(rows) == 2 * len(qs)

    capsys.readouterr()
    assert main(["stats", str(idx)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["n"] == 200 and info["B"] == 8 and len(info["blocks"]) == 8


def test_cli_errors(cli_files):
    d, data, qpath, _, _ = cli_files
    idx = d / "i.idx"
    assert main(["build", str(data), "-o", str(idx), "--delta", "4"]) == 0
    assert main(["query", str(idx), str(qpath), "--K", "65"]) == 1
    assert main(["query", str(idx), str(qpath), "--K", "4", "--mode", "frechet", "--R", "1"]) == 1
    assert main(["build", str(data), "-o", str(d / "x.idx")]) == 1
    assert main(["build", str(data), "-o", str(d / "x.idx"), "--R", "1", "--sigma", "100"]) == 1
    assert main(["query", str(d / "missing.idx"), str(qpath), "--K", "4"]) == 2
    (d / "junk.idx").write_bytes(b"garbage")
    assert main(["query", str(d / "junk.idx"), str(qpath), "--K", "4"]) == 1
    q3 = d / "q3.tsv"
    q3.write_text("1\t0,0,0 1,1,1\n")
    assert main(["query", str(idx), str(q3), "--K", "4"]) == 1
    with pytest.raises(SystemExit):
        main(["query", str(idx)])


def test_bench_exact_sketching_recall():
    # every ground-truth pair is an exact duplicate, so sketches collide
    base = clustered_trajectories(30, n_clusters=30, seed=13)
    trajs = base + [Trajectory(100 + t.id, t.points) for t in base]
    idx = StatIndex.from_trajectories(trajs, LshParams.from_radius(1e-3, 2, seed=2), 8, 0)
    report = tio.run_bench(idx, trajs, base, [0], 0.0)
    assert report.summary()[0]["recall"] == 1.0
    assert all(r["ground_truth"] == 2 for r in report.rows)
