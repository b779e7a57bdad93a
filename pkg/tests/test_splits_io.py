import json
import multiprocessing as mp
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from netalign.errors import FormatError, InvalidInputError
from netalign.graph import GroundTruth, build_graph
from netalign.splits_io import (
    DEFAULT_SEEDS, RunRecord, append_result, import_edgelist, num_train, read_dataset, read_graph, read_results,
    read_split, split_anchors, write_dataset, write_split,
)

from .helpers import graphs, path_graph

GOLDEN = Path(__file__).parent / "data" / "golden_split_n100_r0.2_s42.json"


def _identity(n):
    return GroundTruth(np.stack([np.arange(n), np.arange(n)], axis=1))


def test_split_sizes_floor_rule():
    s = split_anchors(_identity(10), 0.2, 0)
    assert (len(s.train), len(s.test)) == (2, 8)
    assert num_train(0.29, 100) == 29
    assert num_train(0.999, 10) == 9


def test_ratio_zero_is_unsupervised():
    s = split_anchors(_identity(10), 0.0, 3)
    assert s.train == [] and len(s.test) == 10


def test_split_deterministic():
    assert split_anchors(_identity(50), 0.2, 7) == split_anchors(_identity(50), 0.2, 7)
    assert split_anchors(_identity(50), 0.2, 7) != split_anchors(_identity(50), 0.2, 8)


def test_split_rejects_bad_ratio():
    with pytest.raises(InvalidInputError):
        split_anchors(_identity(5), 1.5, 0)


def test_golden_split_matches():
    stored = read_split(GOLDEN)
    fresh = split_anchors(_identity(100), 0.2, 42)
    assert fresh == stored
    assert fresh.to_json() + "\n" == GOLDEN.read_text(encoding="utf-8")
    assert len(stored.train) == 20


@given(st.integers(0, 60), st.floats(0, 1), st.integers(0, 2**64 - 1))
def test_split_partitions_truth(n, ratio, seed):
    s = split_anchors(_identity(n), ratio, seed)
    assert len(s.train) == num_train(ratio, n)
    assert not set(s.train) & set(s.test)
    assert set(s.train) | set(s.test) == {(i, i) for i in range(n)}


def test_split_file_round_trip(tmp_path):
    s = split_anchors(_identity(30), 0.3, 1)
    write_split(tmp_path / "s.json", s)
    assert read_split(tmp_path / "s.json") == s


def test_dataset_round_trip_path_pair(tmp_path):
    g1, g2 = path_graph(3), build_graph(3, [(0, 2), (1, 2)])
    truth = GroundTruth([(0, 1), (1, 2), (2, 0)])
    write_dataset(tmp_path, g1, g2, truth)
    r1, r2, rt = read_dataset(tmp_path)
    assert (r1.edge_set(), r2.edge_set()) == (g1.edge_set(), g2.edge_set())
    assert rt == truth


@given(graphs(max_nodes=7, weighted=True, attrs=True), graphs(max_nodes=7, attrs=True))
def test_dataset_round_trip_is_lossless(tmp_path_factory, g1, g2):
    d = tmp_path_factory.mktemp("ds")
    k = min(g1.num_nodes, g2.num_nodes)
    truth = GroundTruth(np.stack([np.arange(k), np.arange(k)[::-1]], axis=1))
    g1 = build_graph(g1.num_nodes, g1.edges, g1.node_attrs, ["a"] * g1.num_edges, weights=g1.weights, name="left")
    write_dataset(d, g1, g2, truth)
    r1, r2, rt = read_dataset(d)
    assert r1 == g1
    assert r2 == build_graph(g2.num_nodes, g2.edges, g2.node_attrs, weights=g2.weights, name=g2.name)
    assert rt == truth


def test_weighted_edge_line_and_anchor_line(tmp_path):
    (tmp_path / "meta.json").write_text(json.dumps({"n1": 10, "n2": 10}))
    (tmp_path / "g1.edges").write_text("0\t1\t2.5\n")
    (tmp_path / "g2.edges").write_text("3\t9\n")
    (tmp_path / "anchors.tsv").write_text("4\t9\n")
    g1, g2, truth = read_dataset(tmp_path)
    assert g1.edges.tolist() == [[0, 1]] and g1.weights.tolist() == [2.5]
    assert truth.pairs.tolist() == [[4, 9]]
    assert read_graph(tmp_path, "g2").edges.tolist() == [[3, 9]]


def _bad_dataset(tmp_path, edges_text, anchors="0\t0\n"):
    (tmp_path / "meta.json").write_text(json.dumps({"n1": 3, "n2": 3}))
    (tmp_path / "g1.edges").write_text(edges_text)
    (tmp_path / "g2.edges").write_text("0\t1\n")
    (tmp_path / "anchors.tsv").write_text(anchors)


def test_malformed_line_reports_file_and_line(tmp_path):
    _bad_dataset(tmp_path, "0\t1\n1 2\n")
    with pytest.raises(FormatError) as exc:
        read_dataset(tmp_path)
    assert exc.value.line == 2 and exc.value.path.endswith("g1.edges")
    assert ":2:" in str(exc.value)


def test_out_of_range_index(tmp_path):
    _bad_dataset(tmp_path, "0\t7\n")
    with pytest.raises(InvalidInputError):
        read_dataset(tmp_path)
    _bad_dataset(tmp_path, "0\t1\n", anchors="0\t5\n")
    with pytest.raises(InvalidInputError):
        read_dataset(tmp_path)


def test_directed_input_symmetrized_by_max(tmp_path):
    (tmp_path / "meta.json").write_text(json.dumps({"n1": 3, "n2": 3, "directed": True}))
    (tmp_path / "g1.edges").write_text("0\t1\t2\n1\t0\t5\n1\t2\n")
    (tmp_path / "g2.edges").write_text("")
    (tmp_path / "anchors.tsv").write_text("")
    g1, _, _ = read_dataset(tmp_path)
    assert g1.edges.tolist() == [[0, 1], [1, 2]]
    assert g1.weights.tolist() == [5.0, 1.0]


def test_import_edgelist_maps_string_ids(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("# comment\nalice bob\nbob carol 2\n")
    g, ids = import_edgelist(p)
    assert ids == ["alice", "bob", "carol"]
    assert g.edges.tolist() == [[0, 1], [1, 2]] and g.weights.tolist() == [1.0, 2.0]


def _record(hits=None, seed=0):
    return RunRecord(algo="isorank", dataset="d", seed=seed, train_ratio=0.2, params={"alpha": 0.5},
                     hits=hits or {1: 0.5, 10: 0.75}, mrr=0.6)


def test_append_three_records(tmp_path):
    path = tmp_path / "r.jsonl"
    for s in range(3):
        append_result(path, _record(seed=s))
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    assert [json.loads(x)["seed"] for x in lines] == [0, 1, 2]
    assert read_results(path)[1] == _record(seed=1)


def test_non_monotone_hits_rejected_before_write(tmp_path):
    path = tmp_path / "r.jsonl"
    with pytest.raises(InvalidInputError):
        append_result(path, _record(hits={1: 0.5, 10: 0.4}))
    assert not path.exists()


def test_out_of_range_metrics_rejected(tmp_path):
    bad = _record()
    bad.mrr = 1.5
    with pytest.raises(InvalidInputError):
        append_result(tmp_path / "r.jsonl", bad)


def _writer(path, tag, count):
    for i in range(count):
        rec = _record(seed=i)
        rec.params = {"writer": tag, "pad": "x" * 2000}
        append_result(path, rec)


def test_concurrent_appends_do_not_interleave(tmp_path):
    path = tmp_path / "r.jsonl"
    ctx = mp.get_context("fork")
    procs = [ctx.Process(target=_writer, args=(path, t, 100)) for t in ("a", "b")]
    for p in procs:
        p.start()
    for p in procs:
        p.join()
        assert p.exitcode == 0
    lines = path.read_text().splitlines()
    assert len(lines) == 200
    recs = [json.loads(x) for x in lines]
    for tag in ("a", "b"):
        assert sorted(r["seed"] for r in recs if r["params"]["writer"] == tag) == list(range(100))


def test_default_seeds():
    assert DEFAULT_SEEDS == (0, 1, 2, 3, 4)
