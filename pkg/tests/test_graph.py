import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from netalign.errors import InvalidInputError
from netalign.graph import (
    AlignmentMatrix, AlignmentTask, GroundTruth, build_graph, degree_vector, ensure_dense_fits, normalize_adjacency,
)
from netalign.splits_io import make_task, split_anchors

from .helpers import graphs, path_graph


def test_single_edge():
    g = build_graph(2, [(0, 1)])
    assert g.num_edges == 1
    assert degree_vector(g).tolist() == [1.0, 1.0]


def test_duplicate_edges_merge_by_weight_sum():
    g = build_graph(3, [(0, 1), (1, 0)])
    assert g.num_edges == 1
    assert g.edges.tolist() == [[0, 1]]
    assert g.weights.tolist() == [2.0]


def test_self_loop_dropped_with_count_warning():
    with pytest.warns(UserWarning, match="dropped 1 self-loop"):
        g = build_graph(3, [(0, 0), (0, 1)])
    assert g.edges.tolist() == [[0, 1]]


def test_out_of_range_endpoint():
    with pytest.raises(InvalidInputError):
        build_graph(2, [(0, 2)])
    with pytest.raises(InvalidInputError):
        build_graph(2, [(-1, 1)])


def test_attr_row_mismatch():
    with pytest.raises(InvalidInputError):
        build_graph(3, [(0, 1)], node_attrs=np.ones((2, 4)))
    with pytest.raises(InvalidInputError):
        build_graph(3, [(0, 1)], edge_attrs=["a", "b"])


def test_negative_or_nonfinite_weight_rejected():
    with pytest.raises(InvalidInputError):
        build_graph(2, [(0, 1, -1.0)])
    with pytest.raises(InvalidInputError):
        build_graph(2, [(0, 1, np.inf)])


def test_merged_edge_keeps_first_label():
    g = build_graph(3, [(1, 0), (0, 1), (1, 2)], edge_attrs=["x", "y", "z"])
    assert g.edge_attrs == ("x", "z")


def test_arrays_are_read_only():
    g = build_graph(3, [(0, 1)], node_attrs=np.zeros((3, 2)))
    for a in (g.edges, g.weights, g.node_attrs):
        with pytest.raises(ValueError):
            a[0] = 1


def test_degree_examples():
    assert degree_vector(path_graph(3)).tolist() == [1.0, 2.0, 1.0]
    assert degree_vector(build_graph(3, [])).tolist() == [0.0, 0.0, 0.0]
    tri = build_graph(3, [(0, 1, 2.0), (1, 2, 2.0), (0, 2, 2.0)])
    assert degree_vector(tri).tolist() == [4.0, 4.0, 4.0]


def test_normalize_examples():
    g = build_graph(2, [(0, 1)])
    assert normalize_adjacency(g, "row-stochastic").toarray().tolist() == [[0, 1], [1, 0]]
    row1 = normalize_adjacency(path_graph(3), "row-stochastic").toarray()[1]
    assert row1.tolist() == [0.5, 0.0, 0.5]
    iso = build_graph(3, [(0, 1)])
    for mode in ("row-stochastic", "symmetric"):
        a = normalize_adjacency(iso, mode).toarray()
        assert not a[2].any() and not a[:, 2].any()


def test_unknown_normalization():
    with pytest.raises(InvalidInputError):
        normalize_adjacency(path_graph(3), "column")


@given(graphs(max_nodes=9, weighted=True))
def test_canonicalization_idempotent(g):
    again = build_graph(g.num_nodes, g.edges, weights=g.weights)
    assert again == g


@given(graphs(max_nodes=9, weighted=True))
def test_canonical_form(g):
    e = g.edges
    assert np.all(e[:, 0] < e[:, 1])
    assert len(g.edge_set()) == g.num_edges
    assert [tuple(x) for x in e.tolist()] == sorted(map(tuple, e.tolist()))


@given(graphs(max_nodes=9, weighted=True))
def test_row_stochastic_rows_sum_to_one(g):
    a = normalize_adjacency(g, "row-stochastic")
    sums = np.asarray(a.sum(axis=1)).ravel()
    deg = degree_vector(g)
    assert np.all(np.abs(sums[deg > 0] - 1.0) < 1e-12)
    assert np.all(sums[deg == 0] == 0)


@given(graphs(max_nodes=9, weighted=True))
def test_symmetric_normalization_is_symmetric(g):
    a = normalize_adjacency(g, "symmetric").toarray()
    assert np.max(np.abs(a - a.T), initial=0.0) <= 1e-12


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), max_size=20))
def test_duplicates_and_loops_in_any_order(edges):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g = build_graph(6, edges)
    expected = {}
    for u, v in edges:
        if u != v:
            key = (min(u, v), max(u, v))
            expected[key] = expected.get(key, 0) + 1
    assert dict(zip(map(tuple, g.edges.tolist()), g.weights.tolist())) == expected


def test_ground_truth_one_to_one():
    with pytest.raises(InvalidInputError):
        GroundTruth([(0, 1), (0, 2)])
    with pytest.raises(InvalidInputError):
        GroundTruth([(0, 1), (2, 1)])
    with pytest.raises(InvalidInputError):
        GroundTruth([(0, 5)]).check_bounds(3, 3)


@given(st.integers(0, 40), st.floats(0, 1), st.integers(0, 2**64 - 1))
def test_split_sizes_partition_truth(n, ratio, seed):
    g = build_graph(max(n, 1), [])
    truth = GroundTruth(np.stack([np.arange(n), np.arange(n)], axis=1))
    task = make_task(g, g, truth, split_anchors(truth, ratio, seed))
    assert len(task.train_anchors) + len(task.test_pairs) == n
    train = set(map(tuple, task.train_anchors.tolist()))
    test = set(map(tuple, task.test_pairs.tolist()))
    assert not train & test
    assert train | test == set(map(tuple, truth.pairs.tolist()))
    assert task.unsupervised == (len(train) == 0)


def test_task_rejects_out_of_range_anchor():
    g = path_graph(3)
    truth = GroundTruth([(0, 0)])
    with pytest.raises(InvalidInputError):
        AlignmentTask(g, g, truth, train_anchors=[(0, 3)], test_pairs=[])


def test_alignment_matrix_must_be_finite_2d():
    with pytest.raises(InvalidInputError):
        AlignmentMatrix(np.array([[0.0, np.nan]]))
    with pytest.raises(InvalidInputError):
        AlignmentMatrix(np.zeros(3))
    assert AlignmentMatrix(np.zeros((2, 3))).shape == (2, 3)


def test_dense_preflight_refuses_huge_request():
    with pytest.raises(MemoryError):
        ensure_dense_fits(10**6, 10**6, 1)
    ensure_dense_fits(10, 10, 3)
