"""Seeded anchor splits, the on-disk dataset format, and JSONL results.

Dataset directory layout::

    meta.json        {"name", "n1", "n2", "g1_attrs", "g2_attrs",
                      "g1_edge_attrs", "g2_edge_attrs", "directed", ...}
    g1.edges         u<TAB>v[<TAB>w]   one undirected edge per line, 0-indexed
    g2.edges
    g1.attrs.csv     one row of comma-separated floats per node (optional)
    g2.attrs.csv
    g1.eattrs.tsv    one label per line, aligned with g1.edges (optional)
    g2.eattrs.tsv
    g1.ids.tsv       external id per node, line i = node i (optional)
    g2.ids.tsv
    anchors.tsv      i<TAB>j ground-truth pairs

Attribute values are written with 17 significant digits so a write/read
round trip is exact.
"""
from __future__ import annotations

import fcntl
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import FormatError, InvalidInputError
from .graph import AlignmentTask, Graph, GroundTruth, build_graph
from .rng import stream

DEFAULT_SEEDS = (0, 1, 2, 3, 4)
DIRECTIONS = ("left-to-right", "right-to-left", "averaged")


@dataclass
class SplitRecord:
    seed: int
    train_ratio: float
    train: list
    test: list
    # provenance, e.g. supervision noise applied to ``train``
    info: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SplitRecord":
        return cls(
            seed=int(d["seed"]),
            train_ratio=float(d["train_ratio"]),
            train=[tuple(map(int, p)) for p in d["train"]],
            test=[tuple(map(int, p)) for p in d["test"]],
            info=dict(d.get("info", {})),
        )


def num_train(ratio: float, total: int) -> int:
    # the epsilon absorbs binary representation error, e.g. 0.29 * 100
    return int(math.floor(ratio * total + 1e-9))


def split_anchors(truth: GroundTruth, ratio: float, seed: int) -> SplitRecord:
    """Sample ``floor(ratio * |truth|)`` pairs for training, the rest for test."""
    if not 0.0 <= ratio <= 1.0:
        raise InvalidInputError(f"train ratio must lie in [0, 1], got {ratio}")
    pairs = [tuple(p) for p in truth.pairs.tolist()]
    k = num_train(ratio, len(pairs))
    order = stream(seed, "split").permutation(len(pairs))
    chosen = np.zeros(len(pairs), dtype=bool)
    chosen[order[:k]] = True
    return SplitRecord(
        seed=int(seed),
        train_ratio=float(ratio),
        train=[p for p, c in zip(pairs, chosen) if c],
        test=[p for p, c in zip(pairs, chosen) if not c],
    )


def make_task(g1: Graph, g2: Graph, truth: GroundTruth, split: SplitRecord) -> AlignmentTask:
    return AlignmentTask(
        g1=g1,
        g2=g2,
        truth=truth,
        train_anchors=np.asarray(split.train, dtype=np.int64).reshape(-1, 2),
        test_pairs=np.asarray(split.test, dtype=np.int64).reshape(-1, 2),
        train_ratio=split.train_ratio,
        seed=split.seed,
        info=dict(split.info),
    )


def write_split(path, split: SplitRecord) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(split.to_json() + "\n", encoding="utf-8")


def read_split(path) -> SplitRecord:
    return SplitRecord.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------- datasets


def _fmt(x: float) -> str:
    return "%.17g" % x


def _write_graph(d: Path, tag: str, g: Graph, ids=None) -> None:
    weighted = not np.all(g.weights == 1.0)
    with open(d / f"{tag}.edges", "w", encoding="utf-8") as f:
        for (u, v), w in zip(g.edges.tolist(), g.weights.tolist()):
            f.write(f"{u}\t{v}\t{_fmt(w)}\n" if weighted else f"{u}\t{v}\n")
    if g.node_attrs is not None:
        with open(d / f"{tag}.attrs.csv", "w", encoding="utf-8") as f:
            for row in g.node_attrs.tolist():
                f.write(",".join(_fmt(x) for x in row) + "\n")
    if g.edge_attrs is not None:
        with open(d / f"{tag}.eattrs.tsv", "w", encoding="utf-8") as f:
            f.writelines(f"{lab}\n" for lab in g.edge_attrs)
    if ids is not None:
        with open(d / f"{tag}.ids.tsv", "w", encoding="utf-8") as f:
            f.writelines(f"{x}\n" for x in ids)


def write_dataset(directory, g1: Graph, g2: Graph, truth: GroundTruth, *, name: Optional[str] = None,
                  ids1=None, ids2=None, extra_meta: Optional[dict] = None) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    truth.check_bounds(g1.num_nodes, g2.num_nodes)
    meta = {
        "name": name or d.name,
        "n1": g1.num_nodes,
        "n2": g2.num_nodes,
        "g1_name": g1.name,
        "g2_name": g2.name,
        "g1_attrs": g1.node_attrs is not None,
        "g2_attrs": g2.node_attrs is not None,
        "g1_edge_attrs": g1.edge_attrs is not None,
        "g2_edge_attrs": g2.edge_attrs is not None,
        "directed": False,
    }
    meta.update(extra_meta or {})
    for tag, g, ids in (("g1", g1, ids1), ("g2", g2, ids2)):
        for suffix in (".attrs.csv", ".eattrs.tsv", ".ids.tsv"):
            (d / f"{tag}{suffix}").unlink(missing_ok=True)
        _write_graph(d, tag, g, ids)
    with open(d / "anchors.tsv", "w", encoding="utf-8") as f:
        f.writelines(f"{i}\t{j}\n" for i, j in truth.pairs.tolist())
    (d / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return d


def read_meta(directory) -> dict:
    path = Path(directory) / "meta.json"
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(path, e.lineno, e.msg) from None


def _int(tok: str, path, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise FormatError(path, lineno, f"expected an integer, got {tok!r}") from None


def read_edges(path, num_nodes: int):
    """Parse an edges file into ``(uv, weights)`` with range checks."""
    uv, w = [], []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise FormatError(path, lineno, f"expected 'u<TAB>v[<TAB>w]', got {line!r}")
            u, v = _int(parts[0], path, lineno), _int(parts[1], path, lineno)
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise InvalidInputError(f"{path}:{lineno}: node index out of range [0, {num_nodes})")
            weight = 1.0
            if len(parts) == 3:
                try:
                    weight = float(parts[2])
                except ValueError:
                    raise FormatError(path, lineno, f"bad weight {parts[2]!r}") from None
            uv.append((u, v))
            w.append(weight)
    return np.asarray(uv, dtype=np.int64).reshape(-1, 2), np.asarray(w, dtype=np.float64)


def _symmetrize_max(uv: np.ndarray, w: np.ndarray):
    best = {}
    for (u, v), x in zip(uv.tolist(), w.tolist()):
        key = (min(u, v), max(u, v))
        best[key] = max(best.get(key, 0.0), x)
    keys = sorted(best)
    return np.asarray(keys, dtype=np.int64).reshape(-1, 2), np.asarray([best[k] for k in keys])


def _read_attrs(path, n: int) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            try:
                rows.append([float(x) for x in line.strip().split(",")])
            except ValueError:
                raise FormatError(path, lineno, "non-numeric attribute value") from None
            if len(rows[-1]) != len(rows[0]):
                raise FormatError(path, lineno, "ragged attribute row")
    if len(rows) != n:
        raise InvalidInputError(f"{path}: {len(rows)} attribute rows for {n} nodes")
    return np.asarray(rows, dtype=np.float64)


def _read_graph(d: Path, tag: str, n: int, meta: dict) -> Graph:
    uv, w = read_edges(d / f"{tag}.edges", n)
    labels = None
    lab_path = d / f"{tag}.eattrs.tsv"
    if lab_path.exists():
        labels = lab_path.read_text(encoding="utf-8").split("\n")[:-1]
        if len(labels) != len(uv):
            raise InvalidInputError(f"{lab_path}: {len(labels)} labels for {len(uv)} edges")
    if meta.get("directed"):
        if labels is not None:
            raise InvalidInputError("edge labels are not supported on directed input")
        uv, w = _symmetrize_max(uv, w)
    attrs = None
    if (d / f"{tag}.attrs.csv").exists():
        attrs = _read_attrs(d / f"{tag}.attrs.csv", n)
    return build_graph(n, uv, attrs, labels, weights=w, name=meta.get(f"{tag}_name", tag))


def read_graph(directory, tag: str = "g1") -> Graph:
    """Load one side (``g1`` or ``g2``) of a dataset directory."""
    if tag not in ("g1", "g2"):
        raise InvalidInputError(f"graph tag must be g1 or g2, got {tag!r}")
    d = Path(directory)
    meta = read_meta(d)
    return _read_graph(d, tag, int(meta[f"n{tag[1]}"]), meta)


def read_dataset(directory):
    """Load ``(g1, g2, truth)`` from a dataset directory."""
    d = Path(directory)
    meta = read_meta(d)
    g1 = _read_graph(d, "g1", int(meta["n1"]), meta)
    g2 = _read_graph(d, "g2", int(meta["n2"]), meta)
    pairs = []
    path = d / "anchors.tsv"
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise FormatError(path, lineno, f"expected 'i<TAB>j', got {line.rstrip()!r}")
            pairs.append((_int(parts[0], path, lineno), _int(parts[1], path, lineno)))
    truth = GroundTruth(np.asarray(pairs, dtype=np.int64).reshape(-1, 2))
    truth.check_bounds(g1.num_nodes, g2.num_nodes)
    return g1, g2, truth


def import_edgelist(path, directed: bool = False, name: str = "") -> tuple:
    """Read a whitespace-separated edge list with arbitrary string node ids.

    Returns ``(graph, ids)`` where ``ids[i]`` is the external id of node
    ``i``; ids are numbered in order of first appearance.
    """
    index: dict = {}
    uv, w = [], []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) not in (2, 3):
                raise FormatError(path, lineno, "expected 'u v [w]'")
            a, b = (index.setdefault(x, len(index)) for x in parts[:2])
            uv.append((a, b))
            try:
                w.append(float(parts[2]) if len(parts) == 3 else 1.0)
            except ValueError:
                raise FormatError(path, lineno, f"bad weight {parts[2]!r}") from None
    uv_a = np.asarray(uv, dtype=np.int64).reshape(-1, 2)
    w_a = np.asarray(w, dtype=np.float64)
    if directed:
        uv_a, w_a = _symmetrize_max(uv_a, w_a)
    return build_graph(len(index), uv_a, weights=w_a, name=name), list(index)


# ----------------------------------------------------------------- results


@dataclass
class RunRecord:
    algo: str
    dataset: str
    seed: int
    train_ratio: float
    params: dict
    hits: dict
    mrr: float
    direction: str = "averaged"
    time_s: float = 0.0
    peak_mem_bytes: int = 0
    converged: bool = True
    flags: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.direction not in DIRECTIONS:
            raise InvalidInputError(f"unknown direction {self.direction!r}")
        ks = sorted(int(k) for k in self.hits)
        vals = [float(self.hits[k]) for k in sorted(self.hits, key=int)]
        if any(not 0.0 <= v <= 1.0 for v in vals) or not 0.0 <= self.mrr <= 1.0:
            raise InvalidInputError("hits and mrr must lie in [0, 1]")
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise InvalidInputError(f"hits must be nondecreasing in K, got {dict(zip(ks, vals))}")
        if self.time_s < 0 or self.peak_mem_bytes < 0:
            raise InvalidInputError("telemetry must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hits"] = {str(k): float(self.hits[k]) for k in sorted(self.hits, key=int)}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        d = dict(d)
        d["hits"] = {int(k): float(v) for k, v in d["hits"].items()}
        return cls(**d)


def append_result(path, record: RunRecord) -> None:
    """Append one JSON line under an exclusive advisory lock.

    The line is written with a single ``write`` on an ``O_APPEND`` descriptor,
    so readers never observe a partial record from a concurrent writer.
    """
    record.validate()
    data = (json.dumps(record.to_dict(), sort_keys=True) + "\n").encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd = os.open(path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
    try:
        fcntl.flock(fd, fcntl.LOCK_EX)
        try:
            view = memoryview(data)
            while view:
                view = view[os.write(fd, view):]
            os.fsync(fd)
        finally:
            fcntl.flock(fd, fcntl.LOCK_UN)
    finally:
        os.close(fd)


def read_results(path) -> list:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if line.strip():
                try:
                    out.append(RunRecord.from_dict(json.loads(line)))
                except (json.JSONDecodeError, TypeError, KeyError) as e:
                    raise FormatError(path, lineno, str(e)) from None
    return out
