import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from netalign.consistency import ConsistencyConfig, attribute_similarity, build_prior, final_align, isorank_align
from netalign.errors import InvalidInputError
from netalign.graph import AlignmentTask, GroundTruth, build_graph

from .helpers import graphs


def _dense_norm(g, mode):
    a = np.zeros((g.num_nodes, g.num_nodes))
    for (u, v), w in zip(g.edges.tolist(), g.weights.tolist()):
        a[u, v] = a[v, u] = w
    d = a.sum(axis=1)
    inv = np.array([1 / x if x > 0 else 0.0 for x in d])
    if mode == "row-stochastic":
        return inv[:, None] * a
    s = np.sqrt(inv)
    return s[:, None] * a * s[None, :]


def _prior_dense(n1, n2, anchors):
    if not anchors:
        return np.full((n1, n2), 1.0 / (n1 * n2))
    h = np.zeros((n1, n2))
    for i, j in anchors:
        h[i, j] = 1.0
    return h / h.sum()


def product_graph_solve(g1, g2, anchors, alpha, mode, sim=None):
    """Dense oracle: (I - alpha * D W D) s = (1 - alpha) h with
    W = kron(A2n^T, A1n^T) on column-major vec(S), D = diag(vec(N))."""
    n1, n2 = g1.num_nodes, g2.num_nodes
    w = np.kron(_dense_norm(g2, mode).T, _dense_norm(g1, mode).T)
    if sim is not None:
        d = np.diag(sim.ravel(order="F"))
        w = d @ w @ d
    h = _prior_dense(n1, n2, anchors).ravel(order="F")
    s = np.linalg.solve(np.eye(n1 * n2) - alpha * w, (1 - alpha) * h)
    return s.reshape((n1, n2), order="F")


def labelled_product_solve(g1, g2, anchors, alpha, mode):
    """Oracle from explicit product-graph edge enumeration: edge
    ((i, k), (j, l)) exists when (i, j) and (k, l) carry the same label."""
    n1, n2 = g1.num_nodes, g2.num_nodes
    idx = lambda i, k: i * n2 + k  # noqa: E731
    w = np.zeros((n1 * n2, n1 * n2))
    for (i, j), w1, lab1 in zip(g1.edges.tolist(), g1.weights.tolist(), g1.edge_attrs):
        for (k, l), w2, lab2 in zip(g2.edges.tolist(), g2.weights.tolist(), g2.edge_attrs):
            if lab1 != lab2:
                continue
            for a, b in ((i, j), (j, i)):
                for c, d in ((k, l), (l, k)):
                    w[idx(a, c), idx(b, d)] += w1 * w2
    deg = w.sum(axis=1)
    inv = np.array([1 / x if x > 0 else 0.0 for x in deg])
    if mode == "row-stochastic":
        p = w * inv[None, :]
    else:
        p = np.sqrt(inv)[:, None] * w * np.sqrt(inv)[None, :]
    h = _prior_dense(n1, n2, anchors).ravel()
    return np.linalg.solve(np.eye(n1 * n2) - alpha * p, (1 - alpha) * h).reshape(n1, n2)


def _task(g1, g2, anchors=()):
    k = min(g1.num_nodes, g2.num_nodes)
    truth = GroundTruth(np.stack([np.arange(k), np.arange(k)], axis=1))
    anchors = list(anchors)
    test = [p for p in truth.pairs.tolist() if tuple(p) not in set(anchors)]
    return AlignmentTask(g1, g2, truth, train_anchors=anchors, test_pairs=test)


EDGE = build_graph(2, [(0, 1)])
TRIANGLE = build_graph(3, [(0, 1), (1, 2), (0, 2)])


def test_prior_examples():
    assert build_prior(_task(EDGE, EDGE, [(0, 0)])).scores.tolist() == [[1, 0], [0, 0]]
    assert build_prior(_task(EDGE, EDGE)).scores.tolist() == [[0.25, 0.25], [0.25, 0.25]]
    assert build_prior(_task(EDGE, EDGE, [(0, 0), (1, 1)])).scores.tolist() == [[0.5, 0], [0, 0.5]]


def test_isorank_single_edge_against_linear_solve():
    oracle = product_graph_solve(EDGE, EDGE, [(0, 0)], 0.5, "row-stochastic")
    # values the oracle produces, frozen: s00 = 2/3, s11 = 1/3
    assert np.allclose(oracle, [[2 / 3, 0], [0, 1 / 3]], atol=1e-15)
    s = isorank_align(_task(EDGE, EDGE, [(0, 0)]), ConsistencyConfig(alpha=0.5))
    assert np.allclose(s.scores, oracle, atol=1e-8)
    assert s.scores.argmax(axis=1).tolist() == [0, 1]


@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
def test_isorank_triangles_uniform_is_constant(alpha):
    s = isorank_align(_task(TRIANGLE, TRIANGLE), ConsistencyConfig(alpha=alpha)).scores
    assert np.ptp(s) < 1e-15


def test_damping_limit_returns_prior():
    g1 = build_graph(4, [(0, 1), (1, 2), (2, 3)])
    task = _task(g1, g1, [(0, 0), (2, 2)])
    h = build_prior(task).scores
    for align in (isorank_align, final_align):
        s = align(task, ConsistencyConfig(alpha=1e-12, max_iter=1)).scores
        assert np.abs(s - h).max() < 1e-9


def test_final_orthogonal_attributes_single_edge():
    g1 = build_graph(2, [(0, 1)], node_attrs=np.eye(2))
    task = _task(g1, g1)
    sim = attribute_similarity(g1, g1)
    assert np.array_equal(sim, np.eye(2))
    oracle = product_graph_solve(g1, g1, [], 0.5, "symmetric", sim)
    assert np.allclose(oracle, [[0.25, 0.125], [0.125, 0.25]], atol=1e-15)
    s = final_align(task, ConsistencyConfig(alpha=0.5)).scores
    assert np.allclose(s, oracle, atol=1e-8)
    assert s.argmax(axis=1).tolist() == [0, 1]


@st.composite
def small_pairs(draw, labelled=False):
    g1 = draw(graphs(min_nodes=1, max_nodes=8, weighted=True))
    g2 = draw(graphs(min_nodes=1, max_nodes=max(1, 64 // g1.num_nodes), weighted=True))
    if labelled:
        labs = st.sampled_from("ab")
        l1 = draw(st.lists(labs, min_size=g1.num_edges, max_size=g1.num_edges))
        l2 = draw(st.lists(labs, min_size=g2.num_edges, max_size=g2.num_edges))
        g1 = build_graph(g1.num_nodes, g1.edges, None, l1, weights=g1.weights)
        g2 = build_graph(g2.num_nodes, g2.edges, None, l2, weights=g2.weights)
    k = min(g1.num_nodes, g2.num_nodes)
    anchors = draw(st.lists(st.integers(0, k - 1), unique=True, max_size=k))
    alpha = draw(st.sampled_from([0.1, 0.3, 0.5, 0.7, 0.9]))
    return g1, g2, [(a, a) for a in anchors], alpha


@given(small_pairs(), st.sampled_from(["row-stochastic", "symmetric"]))
def test_isorank_matches_product_graph_solve(case, mode):
    g1, g2, anchors, alpha = case
    cfg = ConsistencyConfig(alpha=alpha, normalization=mode, max_iter=5000)
    s = isorank_align(_task(g1, g2, anchors), cfg)
    oracle = product_graph_solve(g1, g2, anchors, alpha, mode)
    assert s.converged
    assert np.abs(s.scores - oracle).max() <= 10 * cfg.tol


@given(small_pairs(), st.sampled_from(["row-stochastic", "symmetric"]))
def test_final_without_attributes_equals_isorank(case, mode):
    g1, g2, anchors, alpha = case
    cfg = ConsistencyConfig(alpha=alpha, normalization=mode, max_iter=5000)
    task = _task(g1, g2, anchors)
    assert np.abs(final_align(task, cfg).scores - isorank_align(task, cfg).scores).max() < cfg.tol


@given(small_pairs(), st.data())
def test_final_with_attributes_matches_oracle(case, data):
    g1, g2, anchors, alpha = case
    x = st.floats(0, 2)
    a1 = np.array(data.draw(st.lists(x, min_size=2 * g1.num_nodes, max_size=2 * g1.num_nodes))).reshape(-1, 2)
    a2 = np.array(data.draw(st.lists(x, min_size=2 * g2.num_nodes, max_size=2 * g2.num_nodes))).reshape(-1, 2)
    g1 = build_graph(g1.num_nodes, g1.edges, a1, weights=g1.weights)
    g2 = build_graph(g2.num_nodes, g2.edges, a2, weights=g2.weights)
    cfg = ConsistencyConfig(alpha=alpha, max_iter=5000)
    s = final_align(_task(g1, g2, anchors), cfg)
    oracle = product_graph_solve(g1, g2, anchors, alpha, "symmetric", attribute_similarity(g1, g2))
    assert np.abs(s.scores - oracle).max() <= 10 * cfg.tol


@given(small_pairs(labelled=True), st.sampled_from(["row-stochastic", "symmetric"]))
def test_final_edge_labels_match_product_graph(case, mode):
    g1, g2, anchors, alpha = case
    cfg = ConsistencyConfig(alpha=alpha, normalization=mode, max_iter=5000)
    s = final_align(_task(g1, g2, anchors), cfg)
    oracle = labelled_product_solve(g1, g2, anchors, alpha, mode)
    assert np.abs(s.scores - oracle).max() <= 10 * cfg.tol


@given(small_pairs())
def test_row_stochastic_contraction(case):
    g1, g2, anchors, alpha = case
    s = isorank_align(_task(g1, g2, anchors), ConsistencyConfig(alpha=alpha, max_iter=200))
    r = s.info["residuals"]
    # residuals are differences of O(1) entries, so allow a few ulps
    for prev, cur in zip(r, r[1:]):
        assert cur <= alpha * prev + 1e-14


@given(small_pairs())
def test_output_ignores_graph_names(case):
    g1, g2, anchors, alpha = case
    cfg = ConsistencyConfig(alpha=alpha)
    renamed = [build_graph(g.num_nodes, g.edges, weights=g.weights, name="other") for g in (g1, g2)]
    a = isorank_align(_task(g1, g2, anchors), cfg).scores
    b = isorank_align(_task(*renamed, anchors), cfg).scores
    assert np.array_equal(a, b)


def test_nonconvergence_is_flagged():
    g = build_graph(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    s = isorank_align(_task(g, g, [(0, 0)]), ConsistencyConfig(max_iter=2))
    assert not s.converged and s.info["iterations"] == 2


def test_config_validation():
    for bad in (dict(alpha=0.0), dict(alpha=1.0), dict(tol=0.0), dict(max_iter=0), dict(normalization="x")):
        with pytest.raises(InvalidInputError):
            ConsistencyConfig(**bad)


def test_empty_graph_rejected():
    empty = build_graph(0, [])
    task = AlignmentTask(empty, EDGE, GroundTruth(np.zeros((0, 2))), [], [])
    with pytest.raises(InvalidInputError):
        isorank_align(task)
