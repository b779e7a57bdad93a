"""Training-free embedding aligners: xNetMF (REGAL) and RWR positional
descriptors against anchors (BRIGHT-U with an identity transform)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from .errors import InvalidInputError, UnsupervisedNotSupported
from .graph import AlignmentMatrix, AlignmentTask, Graph, degree_vector, normalize_adjacency
from .rng import stream


@dataclass(frozen=True)
class XNetMFConfig:
    num_layers: int = 2
    discount: float = 0.1
    # None: min(10 * floor(log2(n1 + n2)), n1 + n2)
    num_landmarks: Optional[int] = None
    # None: 1 when both graphs carry attributes, else 0
    attr_weight: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.num_layers < 1:
            raise InvalidInputError("num_layers must be >= 1")
        if not 0.0 < self.discount < 1.0:
            raise InvalidInputError("discount must lie in (0, 1)")
        if self.num_landmarks is not None and self.num_landmarks < 1:
            raise InvalidInputError("num_landmarks must be >= 1")
        if self.attr_weight is not None and self.attr_weight < 0:
            raise InvalidInputError("attr_weight must be nonnegative")


@dataclass(frozen=True)
class RWRConfig:
    restart_prob: float = 0.15
    tol: float = 1e-10
    max_iter: int = 1000

    def __post_init__(self):
        if not 0.0 < self.restart_prob < 1.0:
            raise InvalidInputError("restart_prob must lie in (0, 1)")
        if self.tol <= 0 or self.max_iter < 1:
            raise InvalidInputError("tol must be positive and max_iter >= 1")


def num_bins(max_degree: float) -> int:
    return int(np.floor(np.log2(max_degree))) + 1 if max_degree >= 1 else 1


def _degree_bins(deg: np.ndarray, bins: int) -> np.ndarray:
    with np.errstate(divide="ignore"):
        b = np.floor(np.log2(np.maximum(deg, 1.0))).astype(np.int64)
    return np.minimum(b, bins - 1)


def hop_layers(g: Graph, k: int) -> list:
    """Sparse 0/1 matrices; entry ``(u, v)`` of layer ``h`` is 1 iff the
    unweighted shortest-path distance from u to v is exactly ``h``."""
    n = g.num_nodes
    skel = g.adjacency.copy()
    skel.data[:] = 1.0
    visited = sp.identity(n, format="csr")
    frontier = visited
    layers = []
    for _ in range(k):
        reach = frontier @ skel
        reach.data[:] = 1.0
        nxt = (reach - reach.multiply(visited)).tocsr()
        nxt.eliminate_zeros()
        layers.append(nxt)
        visited = visited + nxt
        frontier = nxt
    return layers


def structural_features(g: Graph, cfg: XNetMFConfig = XNetMFConfig(), max_degree: Optional[float] = None):
    """Discounted log-binned degree histograms of each hop shell.

    Block ``k`` (``k = 1..num_layers``) counts the nodes at exactly distance
    ``k``, bucketed by ``floor(log2(degree))``, scaled by
    ``discount ** (k - 1)``. Blocks are concatenated, so the result has
    ``num_layers * B`` columns with ``B = floor(log2(max_degree)) + 1``.
    """
    deg = degree_vector(g)
    md = float(deg.max(initial=0.0)) if max_degree is None else float(max_degree)
    b = num_bins(md)
    onehot = np.zeros((g.num_nodes, b))
    onehot[np.arange(g.num_nodes), _degree_bins(deg, b)] = 1.0
    blocks = [
        (cfg.discount ** h) * np.asarray(layer @ onehot) for h, layer in enumerate(hop_layers(g, cfg.num_layers))
    ]
    return np.hstack(blocks)


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return cdist(a, b, "sqeuclidean")


def xnetmf_embed(g1: Graph, g2: Graph, cfg: XNetMFConfig = XNetMFConfig()):
    """Joint low-rank (Nystrom) embedding of both node sets.

    ``sim(u, v) = exp(-|f_u - f_v|^2 - attr_weight * |x_u - x_v|^2)``
    between every node and ``p`` landmarks drawn from the union; the
    landmark block is eigendecomposed and only its positive spectrum is
    kept. Rows are L2-normalized. Returns ``(emb1, emb2)``.
    """
    both_attrs = g1.node_attrs is not None and g2.node_attrs is not None
    gamma = cfg.attr_weight if cfg.attr_weight is not None else (1.0 if both_attrs else 0.0)
    if gamma > 0:
        if not both_attrs:
            raise InvalidInputError("attr_weight > 0 needs node attributes on both graphs")
        if g1.node_attrs.shape[1] != g2.node_attrs.shape[1]:
            raise InvalidInputError("attribute dimensions differ between graphs")

    md = max(degree_vector(g1).max(initial=0.0), degree_vector(g2).max(initial=0.0))
    feats = np.vstack([structural_features(g1, cfg, md), structural_features(g2, cfg, md)])
    total = feats.shape[0]
    p = cfg.num_landmarks
    if p is None:
        p = min(10 * int(np.floor(np.log2(max(total, 1)))), total) if total > 1 else total
    p = min(p, total)
    landmarks = np.sort(stream(cfg.seed, "xnetmf/landmarks").choice(total, size=p, replace=False))

    dist = _sq_dists(feats, feats[landmarks])
    if gamma > 0:
        attrs = np.vstack([g1.node_attrs, g2.node_attrs])
        dist = dist + gamma * _sq_dists(attrs, attrs[landmarks])
    c = np.exp(-dist)
    w = c[landmarks]
    vals, vecs = np.linalg.eigh((w + w.T) / 2)
    keep = vals > max(vals.max(initial=0.0), 0.0) * 1e-12
    emb = c @ (vecs[:, keep] / np.sqrt(vals[keep]))
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = np.divide(emb, norms, out=np.zeros_like(emb), where=norms > 0)
    return emb[: g1.num_nodes], emb[g1.num_nodes:]


def regal_align(task: AlignmentTask, cfg: XNetMFConfig = XNetMFConfig()) -> AlignmentMatrix:
    """Negative Euclidean distance between xNetMF embeddings. Anchors are ignored."""
    e1, e2 = xnetmf_embed(task.g1, task.g2, cfg)
    return AlignmentMatrix(-cdist(e1, e2), info={"dim": e1.shape[1]})


def rwr_matrix(g: Graph, sources, cfg: RWRConfig = RWRConfig()):
    """RWR vectors for many sources at once; column ``a`` is the walk
    restarting at ``sources[a]``.

    Mass reaching a node without neighbours returns to the source, so every
    column sums to 1. Returns ``(R, converged, iterations)``.
    """
    sources = np.asarray(sources, dtype=np.int64)
    n = g.num_nodes
    if len(sources) and (sources.min() < 0 or sources.max() >= n):
        raise InvalidInputError("RWR source out of range")
    pt = normalize_adjacency(g, "row-stochastic").T.tocsr()
    dangling = degree_vector(g) == 0
    restart = np.zeros((n, len(sources)))
    restart[sources, np.arange(len(sources))] = 1.0
    c = cfg.restart_prob
    r = restart.copy()
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        walk = np.asarray(pt @ r)
        lost = r[dangling].sum(axis=0)
        new = c * restart + (1.0 - c) * (walk + restart * lost)
        delta = np.abs(new - r).sum(axis=0).max(initial=0.0)
        r = new
        if delta < cfg.tol:
            converged = True
            break
    return r, converged, it


def rwr_scores(g: Graph, source: int, cfg: RWRConfig = RWRConfig(), return_info: bool = False):
    """Fixed point of ``r = c e_source + (1 - c) P^T r``."""
    r, converged, it = rwr_matrix(g, [source], cfg)
    if return_info:
        return r[:, 0], {"converged": converged, "iterations": it}
    return r[:, 0]


def _l1_rows(x: np.ndarray) -> np.ndarray:
    s = x.sum(axis=1, keepdims=True)
    return np.divide(x, s, out=np.zeros_like(x), where=s > 0)


def cosine_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    na = np.linalg.norm(a, axis=1, keepdims=True)
    nb = np.linalg.norm(b, axis=1, keepdims=True)
    a = np.divide(a, na, out=np.zeros_like(a), where=na > 0)
    b = np.divide(b, nb, out=np.zeros_like(b), where=nb > 0)
    return a @ b.T


def anchor_descriptors(task: AlignmentTask, cfg: RWRConfig):
    """Row-L1-normalized RWR descriptors of both graphs against the training
    anchors, plus the joint convergence flag."""
    if task.unsupervised:
        raise UnsupervisedNotSupported("RWR descriptors need at least one training anchor")
    a = task.train_anchors
    e1, ok1, it1 = rwr_matrix(task.g1, a[:, 0], cfg)
    e2, ok2, it2 = rwr_matrix(task.g2, a[:, 1], cfg)
    return _l1_rows(e1), _l1_rows(e2), ok1 and ok2, max(it1, it2)


def rwr_align(task: AlignmentTask, cfg: RWRConfig = RWRConfig()) -> AlignmentMatrix:
    """Cosine similarity of anchor-RWR descriptors."""
    e1, e2, ok, it = anchor_descriptors(task, cfg)
    return AlignmentMatrix(cosine_matrix(e1, e2), converged=ok, info={"iterations": it})
