import numpy as np
from hypothesis import strategies as st

from netalign.graph import build_graph
from netalign.splits_io import make_task, split_anchors
from netalign.synthesis import gen_er, make_permuted_pair


@st.composite
def graphs(draw, min_nodes=1, max_nodes=8, weighted=False, attrs=False):
    n = draw(st.integers(min_nodes, max_nodes))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    w = None
    if weighted:
        w = draw(st.lists(st.floats(0.1, 5.0), min_size=len(chosen), max_size=len(chosen)))
    x = None
    if attrs:
        d = draw(st.integers(1, 3))
        x = np.array(draw(st.lists(st.floats(-3, 3), min_size=n * d, max_size=n * d))).reshape(n, d)
    return build_graph(n, chosen, x, weights=w)


def path_graph(n):
    return build_graph(n, [(i, i + 1) for i in range(n - 1)])


def copy_task(n=100, avg_degree=10, seed=0, ratio=0.2):
    base = gen_er(n, avg_degree, seed)
    g1, g2, truth = make_permuted_pair(base, 0.0, 0.0, seed)
    return make_task(g1, g2, truth, split_anchors(truth, ratio, seed))
