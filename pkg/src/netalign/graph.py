"""Graph and alignment-task data model plus shared adjacency primitives."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Optional, Sequence

import numpy as np
import psutil
import scipy.sparse as sp

from .errors import InvalidInputError

Normalization = Literal["row-stochastic", "symmetric"]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected weighted graph in canonical form.

    ``edges`` holds one row ``(u, v)`` with ``u < v`` per undirected edge,
    sorted lexicographically; ``weights[i]`` belongs to ``edges[i]``, and so
    does ``edge_attrs[i]`` when edge labels are present. Build instances with
    :func:`build_graph` rather than calling the constructor directly.
    """

    num_nodes: int
    edges: np.ndarray
    weights: np.ndarray
    node_attrs: Optional[np.ndarray] = None
    edge_attrs: Optional[tuple] = None
    name: str = ""

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def has_node_attrs(self) -> bool:
        return self.node_attrs is not None

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        n = self.num_nodes
        u, v = self.edges[:, 0], self.edges[:, 1]
        a = sp.coo_matrix(
            (np.concatenate([self.weights, self.weights]), (np.concatenate([u, v]), np.concatenate([v, u]))),
            shape=(n, n),
        ).tocsr()
        a.sort_indices()
        return a

    def edge_set(self) -> set:
        return set(map(tuple, self.edges.tolist()))

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        if (self.num_nodes, self.name, self.edge_attrs) != (other.num_nodes, other.name, other.edge_attrs):
            return False
        if not (np.array_equal(self.edges, other.edges) and np.array_equal(self.weights, other.weights)):
            return False
        if (self.node_attrs is None) != (other.node_attrs is None):
            return False
        return self.node_attrs is None or np.array_equal(self.node_attrs, other.node_attrs)

    __hash__ = None


def build_graph(
    num_nodes: int,
    edges,
    node_attrs=None,
    edge_attrs: Optional[Sequence] = None,
    *,
    weights=None,
    name: str = "",
) -> Graph:
    """Canonicalize an edge list into a :class:`Graph`.

    ``edges`` may be a sequence of ``(u, v)`` or ``(u, v, w)`` tuples, or an
    integer array of shape ``(m, 2)`` with ``weights`` passed separately.
    Self-loops are dropped (with a warning giving their count). Repeated
    undirected pairs are merged by summing their weights; the first label
    seen is kept for a merged edge.
    """
    n = int(num_nodes)
    if n < 0:
        raise InvalidInputError("num_nodes must be nonnegative")

    if isinstance(edges, np.ndarray) and edges.ndim == 2 and edges.shape[1] == 2:
        uv = edges.astype(np.int64, copy=False)
        w = np.ones(len(uv)) if weights is None else np.asarray(weights, dtype=np.float64)
    else:
        rows = list(edges)
        uv = np.array([(int(e[0]), int(e[1])) for e in rows], dtype=np.int64).reshape(-1, 2)
        if weights is not None:
            w = np.asarray(weights, dtype=np.float64)
        else:
            w = np.array([float(e[2]) if len(e) > 2 else 1.0 for e in rows], dtype=np.float64)
    if len(w) != len(uv):
        raise InvalidInputError("weights must have one entry per edge")
    if edge_attrs is not None and len(edge_attrs) != len(uv):
        raise InvalidInputError(f"edge_attrs has {len(edge_attrs)} labels for {len(uv)} edges")
    if len(uv) and (uv.min() < 0 or uv.max() >= n):
        bad = uv[(uv < 0).any(axis=1) | (uv >= n).any(axis=1)][0]
        raise InvalidInputError(f"edge {tuple(bad.tolist())} has an endpoint outside [0, {n})")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidInputError("edge weights must be finite and nonnegative")

    loops = uv[:, 0] == uv[:, 1]
    if loops.any():
        warnings.warn(f"dropped {int(loops.sum())} self-loop(s)", stacklevel=2)
    keep = ~loops
    uv, w = uv[keep], w[keep]
    labels = None if edge_attrs is None else [lab for lab, k in zip(edge_attrs, keep) if k]

    lo = np.minimum(uv[:, 0], uv[:, 1])
    hi = np.maximum(uv[:, 0], uv[:, 1])
    key = lo * max(n, 1) + hi
    uniq, first, inverse = np.unique(key, return_index=True, return_inverse=True)
    merged_w = np.zeros(len(uniq))
    np.add.at(merged_w, inverse, w)
    canon = np.stack([lo[first], hi[first]], axis=1) if len(uniq) else np.zeros((0, 2), dtype=np.int64)
    canon_labels = None if labels is None else tuple(str(labels[i]) for i in first)

    attrs = None
    if node_attrs is not None:
        attrs = np.array(node_attrs, dtype=np.float64, copy=True)
        if attrs.ndim == 1:
            attrs = attrs.reshape(-1, 1)
        if attrs.shape[0] != n:
            raise InvalidInputError(f"node_attrs has {attrs.shape[0]} rows for {n} nodes")
        if not np.all(np.isfinite(attrs)):
            raise InvalidInputError("node_attrs must be finite")
        attrs = _frozen(attrs)

    return Graph(
        num_nodes=n,
        edges=_frozen(canon.astype(np.int64)),
        weights=_frozen(merged_w),
        node_attrs=attrs,
        edge_attrs=canon_labels,
        name=name,
    )


def degree_vector(g: Graph) -> np.ndarray:
    """Weighted degree of every node."""
    deg = np.zeros(g.num_nodes)
    np.add.at(deg, g.edges[:, 0], g.weights)
    np.add.at(deg, g.edges[:, 1], g.weights)
    return deg


def _scale(a: sp.spmatrix, deg: np.ndarray, mode: Normalization) -> sp.csr_matrix:
    with np.errstate(divide="ignore"):
        if mode == "row-stochastic":
            inv = np.where(deg > 0, 1.0 / deg, 0.0)
            return sp.csr_matrix(sp.diags(inv) @ a)
        if mode == "symmetric":
            inv = np.where(deg > 0, 1.0 / np.sqrt(deg), 0.0)
            d = sp.diags(inv)
            return sp.csr_matrix(d @ a @ d)
    raise InvalidInputError(f"unknown normalization {mode!r}")


def normalize_adjacency(g: Graph, mode: Normalization = "row-stochastic") -> sp.csr_matrix:
    """Row-stochastic ``D^-1 A`` or symmetric ``D^-1/2 A D^-1/2``.

    Isolated nodes keep all-zero rows and columns.
    """
    return _scale(g.adjacency, degree_vector(g), mode)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """One-to-one node correspondence, rows ``(i in g1, j in g2)``."""

    pairs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        if len(np.unique(p[:, 0])) != len(p) or len(np.unique(p[:, 1])) != len(p):
            raise InvalidInputError("ground truth must be one-to-one")
        object.__setattr__(self, "pairs", _frozen(p.copy()))

    def __len__(self):
        return len(self.pairs)

    def __eq__(self, other):
        return isinstance(other, GroundTruth) and np.array_equal(self.pairs, other.pairs)

    __hash__ = None

    def check_bounds(self, n1: int, n2: int) -> None:
        if len(self.pairs) and (
            self.pairs.min() < 0 or self.pairs[:, 0].max() >= n1 or self.pairs[:, 1].max() >= n2
        ):
            raise InvalidInputError(f"ground-truth index out of range for graphs of size {n1} and {n2}")


def _pairs(x) -> np.ndarray:
    return _frozen(np.asarray(x, dtype=np.int64).reshape(-1, 2).copy())


@dataclass(frozen=True, eq=False)
class AlignmentTask:
    """A graph pair with its anchor split.

    ``train_anchors`` is the supervision set handed to aligners;
    ``test_pairs`` are held out for evaluation. An empty ``train_anchors``
    makes the task unsupervised.
    """

    g1: Graph
    g2: Graph
    truth: GroundTruth
    train_anchors: np.ndarray
    test_pairs: np.ndarray
    train_ratio: float = 0.0
    seed: int = 0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "train_anchors", _pairs(self.train_anchors))
        object.__setattr__(self, "test_pairs", _pairs(self.test_pairs))
        self.truth.check_bounds(self.g1.num_nodes, self.g2.num_nodes)
        for name in ("train_anchors", "test_pairs"):
            p = getattr(self, name)
            if len(p) and (
                p.min() < 0 or p[:, 0].max() >= self.g1.num_nodes or p[:, 1].max() >= self.g2.num_nodes
            ):
                raise InvalidInputError(f"{name} index out of range")

    @property
    def unsupervised(self) -> bool:
        return len(self.train_anchors) == 0

    @property
    def shape(self) -> tuple:
        return (self.g1.num_nodes, self.g2.num_nodes)


@dataclass(eq=False)
class AlignmentMatrix:
    """Dense ``n1 x n2`` score matrix; higher means more likely aligned.

    ``converged`` and ``info`` carry run metadata from the producing
    algorithm (iteration counts, residuals).
    """

    scores: np.ndarray
    converged: bool = True
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 2:
            raise InvalidInputError("alignment scores must be a 2-D matrix")
        if not np.all(np.isfinite(self.scores)):
            raise InvalidInputError("alignment scores must be finite")

    @property
    def shape(self) -> tuple:
        return self.scores.shape


def ensure_dense_fits(n1: int, n2: int, copies: int, what: str = "score matrix") -> None:
    """Raise MemoryError before allocating ``copies`` dense float64 ``n1 x n2``
    matrices that would not fit in currently available memory.

    The kernel's OOM killer ends the process without a Python exception, so
    oversize requests are refused up front instead.
    """
    need = copies * n1 * n2 * 8
    avail = psutil.virtual_memory().available
    if need > 0.9 * avail:
        raise MemoryError(
            f"{what}: {copies} dense {n1}x{n2} float64 buffers need {need / 2**30:.1f} GiB, "
            f"{avail / 2**30:.1f} GiB available"
        )
