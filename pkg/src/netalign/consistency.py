"""IsoRank and FINAL as damped fixed points on the product graph.

Both iterate ``S <- alpha * P(S) + (1 - alpha) * H`` where ``P`` propagates
scores along product-graph edges without forming the Kronecker product:
for plain graphs ``P(S) = A1n.T @ S @ A2n``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInputError
from .graph import AlignmentMatrix, AlignmentTask, Graph, ensure_dense_fits, normalize_adjacency


@dataclass(frozen=True)
class ConsistencyConfig:
    alpha: float = 0.5
    tol: float = 1e-8
    max_iter: int = 500
    # None picks the per-algorithm default
    normalization: Optional[str] = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidInputError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.tol <= 0 or self.max_iter < 1:
            raise InvalidInputError("tol must be positive and max_iter >= 1")
        if self.normalization not in (None, "row-stochastic", "symmetric"):
            raise InvalidInputError(f"unknown normalization {self.normalization!r}")


def _prior(task: AlignmentTask):
    """Anchor prior as a sparse matrix, or a float for the uniform case."""
    n1, n2 = task.shape
    if task.unsupervised:
        return 1.0 / (n1 * n2)
    a = task.train_anchors
    h = sp.coo_matrix((np.ones(len(a)), (a[:, 0], a[:, 1])), shape=(n1, n2)).tocsr()
    h.sum_duplicates()
    h.data[:] = 1.0
    h.data /= h.data.sum()
    return h


def build_prior(task: AlignmentTask) -> AlignmentMatrix:
    """Dense prior ``H``: mass on training anchors, uniform when unsupervised; sums to 1."""
    h = _prior(task)
    dense = np.full(task.shape, h) if np.isscalar(h) else h.toarray()
    return AlignmentMatrix(dense)


def _l1_diff(a: np.ndarray, b: np.ndarray, block: int = 1024) -> float:
    total = 0.0
    for s in range(0, a.shape[0], block):
        total += float(np.abs(a[s:s + block] - b[s:s + block]).sum())
    return total


def fixed_point(propagate: Callable[[np.ndarray], np.ndarray], h, shape, alpha: float, tol: float,
                max_iter: int) -> AlignmentMatrix:
    """Iterate ``S <- alpha * propagate(S) + (1 - alpha) * h`` from ``S = h``.

    Stops once the entrywise L1 change drops below ``tol``. The per-step
    residuals are kept in ``info['residuals']``.
    """
    if np.isscalar(h):
        s = np.full(shape, float(h))
    else:
        s = h.toarray()
        hr, hc = h.nonzero()
        hv = np.asarray(h[hr, hc]).ravel()
    residuals = []
    converged = False
    for _ in range(max_iter):
        new = np.asarray(propagate(s))
        new *= alpha
        if np.isscalar(h):
            new += (1.0 - alpha) * h
        else:
            new[hr, hc] += (1.0 - alpha) * hv
        residuals.append(_l1_diff(new, s))
        s = new
        if residuals[-1] < tol:
            converged = True
            break
    return AlignmentMatrix(s, converged=converged, info={"iterations": len(residuals), "residuals": residuals})


def _plain_propagator(g1: Graph, g2: Graph, mode: str):
    a1t = normalize_adjacency(g1, mode).T.tocsr()
    a2 = normalize_adjacency(g2, mode)
    return lambda s: a1t @ (s @ a2)


def _labelled_propagator(g1: Graph, g2: Graph, mode: str):
    """Propagation over product-graph edges ``((i,k), (j,l))`` whose two
    factor edges carry the same label, normalized by product-graph degree.
    """
    labels = sorted(set(g1.edge_attrs) & set(g2.edge_attrs))
    parts = []
    degree = np.zeros((g1.num_nodes, g2.num_nodes))
    for lab in labels:
        subs = []
        for g in (g1, g2):
            mask = np.array([x == lab for x in g.edge_attrs])
            e, w = g.edges[mask], g.weights[mask]
            n = g.num_nodes
            a = sp.coo_matrix((np.concatenate([w, w]), (np.concatenate([e[:, 0], e[:, 1]]),
                                                        np.concatenate([e[:, 1], e[:, 0]]))), shape=(n, n)).tocsr()
            subs.append(a)
        degree += np.outer(np.asarray(subs[0].sum(axis=1)).ravel(), np.asarray(subs[1].sum(axis=1)).ravel())
        parts.append((subs[0].T.tocsr(), subs[1]))
    with np.errstate(divide="ignore"):
        if mode == "row-stochastic":
            pre, post = np.where(degree > 0, 1.0 / degree, 0.0), None
        else:
            post = np.where(degree > 0, 1.0 / np.sqrt(degree), 0.0)
            pre = post

    def propagate(s):
        x = s * pre
        out = np.zeros_like(s)
        for a1t, a2 in parts:
            out += a1t @ (x @ a2)
        return out if post is None else out * post

    return propagate


def isorank_align(task: AlignmentTask, cfg: ConsistencyConfig = ConsistencyConfig()) -> AlignmentMatrix:
    n1, n2 = task.shape
    if n1 == 0 or n2 == 0:
        raise InvalidInputError("both graphs must be nonempty")
    ensure_dense_fits(n1, n2, 3, "isorank")
    mode = cfg.normalization or "row-stochastic"
    prop = _plain_propagator(task.g1, task.g2, mode)
    out = fixed_point(prop, _prior(task), task.shape, cfg.alpha, cfg.tol, cfg.max_iter)
    out.info["normalization"] = mode
    return out


def attribute_similarity(g1: Graph, g2: Graph) -> Optional[np.ndarray]:
    """Cosine similarity of node-attribute rows clipped to [0, 1]; None if
    either graph lacks attributes (meaning all-ones)."""
    if g1.node_attrs is None or g2.node_attrs is None:
        return None
    x1, x2 = g1.node_attrs, g2.node_attrs
    if x1.shape[1] != x2.shape[1]:
        raise InvalidInputError("attribute dimensions differ between graphs")
    n1 = np.linalg.norm(x1, axis=1, keepdims=True)
    n2 = np.linalg.norm(x2, axis=1, keepdims=True)
    x1 = np.divide(x1, n1, out=np.zeros_like(x1), where=n1 > 0)
    x2 = np.divide(x2, n2, out=np.zeros_like(x2), where=n2 > 0)
    return np.clip(x1 @ x2.T, 0.0, 1.0)


def final_align(task: AlignmentTask, cfg: ConsistencyConfig = ConsistencyConfig()) -> AlignmentMatrix:
    """FINAL: ``S <- alpha * N o P(N o S) + (1 - alpha) * H``.

    ``N`` is the attribute similarity (all-ones without attributes). When
    both graphs carry edge labels, ``P`` only follows product edges whose
    factor edges share a label.
    """
    g1, g2 = task.g1, task.g2
    n1, n2 = task.shape
    if n1 == 0 or n2 == 0:
        raise InvalidInputError("both graphs must be nonempty")
    labelled = g1.edge_attrs is not None and g2.edge_attrs is not None
    ensure_dense_fits(n1, n2, 3 + (g1.has_node_attrs and g2.has_node_attrs) + 2 * labelled, "final")
    mode = cfg.normalization or "symmetric"
    base = _labelled_propagator(g1, g2, mode) if labelled else _plain_propagator(g1, g2, mode)
    sim = attribute_similarity(g1, g2)
    prop = base if sim is None else (lambda s: sim * base(sim * s))
    out = fixed_point(prop, _prior(task), task.shape, cfg.alpha, cfg.tol, cfg.max_iter)
    out.info["normalization"] = mode
    return out

