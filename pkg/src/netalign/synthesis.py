"""Synthetic benchmark generation and noise injection."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal, Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .graph import AlignmentTask, Graph, GroundTruth, build_graph
from .rng import round_half_up, stream

NoiseKind = Literal["edge", "attribute", "supervision"]
EdgeNoiseMode = Literal["split", "add-only", "delete-only"]


@dataclass(frozen=True)
class NoiseSpec:
    kind: NoiseKind
    level_p: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("edge", "attribute", "supervision"):
            raise InvalidInputError(f"unknown noise kind {self.kind!r}")
        _check_p(self.level_p)


def _check_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"noise level must lie in [0, 1], got {p}")


def _num_pairs(n: int) -> int:
    return n * (n - 1) // 2


def _decode_pairs(idx: np.ndarray, n: int) -> np.ndarray:
    """Map row-major upper-triangle indices to ``(i, j)`` with ``i < j``."""
    idx = np.asarray(idx, dtype=np.int64)
    total = _num_pairs(n)
    # count pairs from the end so the sqrt is taken of a small number
    rev = total - 1 - idx
    r = ((np.sqrt(8.0 * rev + 1.0) - 1.0) // 2).astype(np.int64)
    # fix float rounding at triangular-number boundaries
    r -= (r * (r + 1) // 2 > rev).astype(np.int64)
    r += ((r + 1) * (r + 2) // 2 <= rev).astype(np.int64)
    i = n - 2 - r
    j = (n - 1) - (rev - r * (r + 1) // 2)
    return np.stack([i, j], axis=1)


def _encode_pairs(uv: np.ndarray, n: int) -> np.ndarray:
    i, j = uv[:, 0].astype(np.int64), uv[:, 1].astype(np.int64)
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def gen_er(n: int, avg_degree: float, seed: int, name: str = "er") -> Graph:
    """Erdos-Renyi ``G(n, p)`` with ``p = avg_degree / (n - 1)``.

    The edge count is drawn from ``Binomial(n(n-1)/2, p)`` and that many
    distinct pairs are then drawn uniformly, which is exactly ``G(n, p)``
    without touching all ``O(n^2)`` pairs.
    """
    if n < 2:
        raise InvalidInputError("gen_er needs n >= 2")
    if avg_degree <= 0 or avg_degree >= n:
        raise InvalidInputError(f"avg_degree must lie in (0, n), got {avg_degree} for n={n}")
    p = min(1.0, avg_degree / (n - 1))
    rng = stream(seed, "gen_er")
    total = _num_pairs(n)
    m = int(rng.binomial(total, p))
    idx = np.sort(rng.choice(total, size=m, replace=False))
    return build_graph(n, _decode_pairs(idx, n), name=name)


def _sample_absent(g: Graph, k: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``k`` distinct node pairs not already joined in ``g``."""
    n = g.num_nodes
    total = _num_pairs(n)
    present = _encode_pairs(g.edges, n)
    available = total - len(present)
    if k > available:
        raise InvalidInputError(f"cannot insert {k} edges: only {available} absent pairs")
    if k == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if total <= 4_000_000 or k > available // 4:
        pool = np.setdiff1d(np.arange(total, dtype=np.int64), present, assume_unique=True)
        chosen = pool[rng.choice(len(pool), size=k, replace=False)]
    else:
        taken = set(present.tolist())
        chosen = []
        while len(chosen) < k:
            for c in rng.integers(0, total, size=2 * (k - len(chosen))).tolist():
                if c not in taken:
                    taken.add(c)
                    chosen.append(c)
                    if len(chosen) == k:
                        break
        chosen = np.asarray(chosen, dtype=np.int64)
    return _decode_pairs(np.sort(chosen), n)


def _with_edges(g: Graph, keep: np.ndarray, added: np.ndarray, name: Optional[str] = None) -> Graph:
    edges = np.concatenate([g.edges[keep], added]).astype(np.int64)
    weights = np.concatenate([g.weights[keep], np.ones(len(added))])
    labels = None
    if g.edge_attrs is not None:
        # inserted edges get the empty label
        labels = [lab for lab, k in zip(g.edge_attrs, keep) if k] + [""] * len(added)
    return build_graph(
        g.num_nodes, edges, g.node_attrs, labels, weights=weights, name=g.name if name is None else name
    )


def relabel(g: Graph, perm: np.ndarray, name: Optional[str] = None) -> Graph:
    """Relabel node ``i`` as ``perm[i]``."""
    perm = np.asarray(perm, dtype=np.int64)
    attrs = None
    if g.node_attrs is not None:
        attrs = np.empty_like(g.node_attrs)
        attrs[perm] = g.node_attrs
    return build_graph(
        g.num_nodes, perm[g.edges], attrs, g.edge_attrs, weights=g.weights, name=g.name if name is None else name
    )


def make_permuted_pair(base: Graph, insert_frac: float, delete_frac: float, seed: int):
    """Two noisy views of ``base``: ``g1`` gains ``round(insert_frac*|E|)``
    random new edges, ``g2`` loses ``round(delete_frac*|E|)`` random edges and
    is relabeled by a uniform random permutation ``pi``.

    Returns ``(g1, g2, truth)`` with ``truth = {(i, pi[i])}``.
    """
    if base.num_edges < 1:
        raise InvalidInputError("base graph needs at least one edge")
    for f in (insert_frac, delete_frac):
        if not 0.0 <= f < 1.0:
            raise InvalidInputError(f"fractions must lie in [0, 1), got {f}")
    m = base.num_edges
    n_ins = round_half_up(insert_frac * m)
    n_del = round_half_up(delete_frac * m)

    added = _sample_absent(base, n_ins, stream(seed, "pair/insert"))
    g1 = _with_edges(base, np.ones(m, dtype=bool), added, name=f"{base.name}-1")

    keep = np.ones(m, dtype=bool)
    keep[stream(seed, "pair/delete").choice(m, size=n_del, replace=False)] = False
    pruned = _with_edges(base, keep, np.zeros((0, 2), dtype=np.int64))
    perm = stream(seed, "pair/permute").permutation(base.num_nodes)
    g2 = relabel(pruned, perm, name=f"{base.name}-2")

    truth = GroundTruth(np.stack([np.arange(base.num_nodes), perm], axis=1))
    return g1, g2, truth


def inject_edge_noise(g: Graph, p: float, seed: int, mode: EdgeNoiseMode = "split") -> Graph:
    """Perturb ``p * |E|`` edges.

    In ``split`` mode half the budget adds absent pairs and half deletes
    existing edges, so the edge count is unchanged. ``add-only`` and
    ``delete-only`` spend the whole budget on one side.
    """
    _check_p(p)
    if p == 0:
        return g
    m = g.num_edges
    if mode == "split":
        n_add = n_del = round_half_up(p * m / 2)
    elif mode == "add-only":
        n_add, n_del = round_half_up(p * m), 0
    elif mode == "delete-only":
        n_add, n_del = 0, round_half_up(p * m)
    else:
        raise InvalidInputError(f"unknown edge-noise mode {mode!r}")
    added = _sample_absent(g, n_add, stream(seed, "noise/edge/add"))
    keep = np.ones(m, dtype=bool)
    keep[stream(seed, "noise/edge/delete").choice(m, size=n_del, replace=False)] = False
    return _with_edges(g, keep, added)


def attribute_kinds(attrs: np.ndarray) -> list:
    """``'binary'`` for columns with values in {0, 1}, else ``'continuous'``."""
    return ["binary" if np.isin(col, (0.0, 1.0)).all() else "continuous" for col in attrs.T]


def inject_attr_noise(g: Graph, p: float, seed: int, kinds: Optional[Sequence[str]] = None) -> Graph:
    """Perturb the attributes of ``round(p * n)`` random nodes.

    Binary columns are flipped on the chosen nodes. Continuous columns are
    min-max normalized (all nodes) and the chosen nodes get additive
    standard Gaussian noise. ``kinds`` overrides per-column detection.
    """
    if g.node_attrs is None:
        raise InvalidInputError(f"graph {g.name!r} has no node attributes")
    _check_p(p)
    if p == 0:
        return g
    x = np.array(g.node_attrs, dtype=np.float64)
    kinds = list(kinds) if kinds is not None else attribute_kinds(x)
    if len(kinds) != x.shape[1]:
        raise InvalidInputError("kinds must name one kind per attribute column")
    rng = stream(seed, "noise/attr")
    chosen = np.sort(rng.choice(g.num_nodes, size=round_half_up(p * g.num_nodes), replace=False))
    binary = np.array([k == "binary" for k in kinds])
    cont = ~binary
    if cont.any():
        c = x[:, cont]
        lo, hi = c.min(axis=0), c.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        x[:, cont] = (c - lo) / span
        x[np.ix_(chosen, np.flatnonzero(cont))] += rng.standard_normal((len(chosen), int(cont.sum())))
    if binary.any():
        cols = np.flatnonzero(binary)
        x[np.ix_(chosen, cols)] = 1.0 - x[np.ix_(chosen, cols)]
    return replace(g, node_attrs=_readonly(x))


def _readonly(a):
    a.setflags(write=False)
    return a


def inject_supervision_noise(task: AlignmentTask, p: float, seed: int) -> AlignmentTask:
    """Corrupt ``round(p * |L|)`` training anchors.

    Each chosen anchor ``(x, y)`` keeps ``x`` but gets a right endpoint drawn
    uniformly (without replacement) from g2 nodes that are not the right
    endpoint of any training anchor. Test pairs are untouched.
    """
    _check_p(p)
    train = task.train_anchors
    if len(train) == 0:
        raise InvalidInputError("supervision noise needs at least one training anchor")
    if p == 0:
        return task
    k = round_half_up(p * len(train))
    rng = stream(seed, "noise/supervision")
    chosen = np.sort(rng.choice(len(train), size=k, replace=False))
    eligible = np.setdiff1d(np.arange(task.g2.num_nodes), train[:, 1])
    if len(eligible) < k:
        raise InvalidInputError(f"need {k} non-anchor replacement nodes, only {len(eligible)} exist")
    new_train = train.copy()
    new_train[chosen, 1] = eligible[rng.choice(len(eligible), size=k, replace=False)]
    info = dict(task.info, supervision_noise={"p": p, "seed": seed, "corrupted": chosen.tolist()})
    return replace(task, train_anchors=new_train, info=info)


def expected_er_edges(n: int, avg_degree: float) -> tuple:
    """Mean and standard deviation of the ER edge count."""
    total = _num_pairs(n)
    p = avg_degree / (n - 1)
    return total * p, math.sqrt(total * p * (1 - p))
