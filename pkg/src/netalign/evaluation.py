"""Ranking metrics, hard matchings, and run telemetry."""
from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInputError
from .graph import AlignmentMatrix

log = logging.getLogger(__name__)

LEFT, RIGHT, AVERAGED = "left-to-right", "right-to-left", "averaged"
DEFAULT_KS = (1, 10, 30, 50)


def _scores(s) -> np.ndarray:
    return s.scores if isinstance(s, AlignmentMatrix) else np.asarray(s, dtype=np.float64)


def _check_direction(direction: str) -> None:
    if direction not in (LEFT, RIGHT, AVERAGED):
        raise InvalidInputError(f"unknown direction {direction!r}")


def rank_of_truth(s, pair, direction: str = LEFT) -> int:
    """1-based rank of ``s[i, j]`` in row ``i`` (left-to-right) or column
    ``j`` (right-to-left). Equal scores at a smaller index rank ahead."""
    if direction not in (LEFT, RIGHT):
        raise InvalidInputError("rank_of_truth needs a single direction")
    return int(ranks(s, np.asarray([pair]), direction)[0])


def ranks(s, pairs, direction: str = LEFT, block: int = 512) -> np.ndarray:
    """Vectorized :func:`rank_of_truth` over many pairs."""
    m = _scores(s)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if direction == RIGHT:
        m, pairs = m.T, pairs[:, ::-1]
    elif direction != LEFT:
        raise InvalidInputError("ranks needs a single direction")
    if len(pairs) and (pairs.min() < 0 or pairs[:, 0].max() >= m.shape[0] or pairs[:, 1].max() >= m.shape[1]):
        raise InvalidInputError("pair index out of range")
    out = np.empty(len(pairs), dtype=np.int64)
    cols = np.arange(m.shape[1])
    for start in range(0, len(pairs), block):
        p = pairs[start:start + block]
        rows = m[p[:, 0]]
        truth = rows[np.arange(len(p)), p[:, 1]][:, None]
        ahead = (rows > truth) | ((rows == truth) & (cols[None, :] < p[:, 1:2]))
        out[start:start + block] = 1 + ahead.sum(axis=1)
    return out


def _directional(fn, s, pairs, direction):
    _check_direction(direction)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        raise InvalidInputError("test set is empty")
    if direction == AVERAGED:
        return (fn(ranks(s, pairs, LEFT)) + fn(ranks(s, pairs, RIGHT))) / 2.0
    return fn(ranks(s, pairs, direction))


def hits_at_k(s, test_pairs, k: int, direction: str = AVERAGED) -> float:
    """Fraction of test pairs whose truth ranks within the top ``k``."""
    return float(_directional(lambda r: np.mean(r <= k), s, test_pairs, direction))


def mrr(s, test_pairs, direction: str = AVERAGED) -> float:
    """Mean reciprocal rank of the truth."""
    return float(_directional(lambda r: np.mean(1.0 / r), s, test_pairs, direction))


def evaluate(s, test_pairs, ks: Iterable[int] = DEFAULT_KS, direction: str = AVERAGED,
             topk: Optional[int] = None) -> dict:
    """Hits@K for every ``k`` in ``ks`` plus MRR, ranking only once per direction.

    With ``topk``, only the ``topk`` best candidates per row (column) count
    as retained: a truth ranked beyond them is a miss for every K and adds 0
    to MRR, so MRR is a lower bound within ``truncated / (topk + 1)``.
    """
    _check_direction(direction)
    pairs = np.asarray(test_pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        raise InvalidInputError("test set is empty")
    if topk is not None and topk < 1:
        raise InvalidInputError("topk must be >= 1")
    dirs = (LEFT, RIGHT) if direction == AVERAGED else (direction,)
    rs = [ranks(s, pairs, d).astype(np.float64) for d in dirs]
    out = {}
    if topk is not None:
        out["truncated"] = float(np.mean([np.mean(r > topk) for r in rs]))
        rs = [np.where(r <= topk, r, np.inf) for r in rs]
    out["hits"] = {int(k): float(np.mean([np.mean(r <= k) for r in rs])) for k in sorted(ks)}
    out["mrr"] = float(np.mean([np.mean(1.0 / r) for r in rs]))
    return out


def top_k(s, k: int, block: int = 1024):
    """Per-row ``(indices, values)`` of the ``k`` best columns, best first;
    ties go to the smaller column index."""
    m = _scores(s)
    k = min(k, m.shape[1])
    idx = np.empty((m.shape[0], k), dtype=np.int64)
    for start in range(0, m.shape[0], block):
        rows = m[start:start + block]
        idx[start:start + block] = np.argsort(-rows, axis=1, kind="stable")[:, :k]
    return idx, np.take_along_axis(m, idx, axis=1)


def _listed_ranks(idx: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """1-based position of ``pairs[:, 1]`` in row ``pairs[:, 0]`` of ``idx``, inf if absent."""
    hit = idx[pairs[:, 0]] == pairs[:, 1:2]
    found = hit.any(axis=1)
    return np.where(found, hit.argmax(axis=1) + 1.0, np.inf)


def evaluate_topk(row_idx, col_idx, test_pairs, ks: Iterable[int] = DEFAULT_KS, direction: str = AVERAGED) -> dict:
    """Metrics from stored top-k lists (``row_idx`` from :func:`top_k` on S,
    ``col_idx`` from :func:`top_k` on S.T). Agrees with
    ``evaluate(S, ..., topk=k)``."""
    _check_direction(direction)
    pairs = np.asarray(test_pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        raise InvalidInputError("test set is empty")
    rs = []
    if direction in (LEFT, AVERAGED):
        rs.append(_listed_ranks(np.asarray(row_idx), pairs))
    if direction in (RIGHT, AVERAGED):
        rs.append(_listed_ranks(np.asarray(col_idx), pairs[:, ::-1]))
    return {
        "truncated": float(np.mean([np.mean(np.isinf(r)) for r in rs])),
        "hits": {int(k): float(np.mean([np.mean(r <= k) for r in rs])) for k in sorted(ks)},
        "mrr": float(np.mean([np.mean(1.0 / r) for r in rs])),
    }


def greedy_match(s) -> list:
    """Repeatedly take the largest remaining entry whose row and column are
    both unused; ties go to the smaller ``(row, col)``."""
    m = _scores(s)
    n1, n2 = m.shape
    order = np.argsort(-m, axis=None, kind="stable")
    used_r = np.zeros(n1, dtype=bool)
    used_c = np.zeros(n2, dtype=bool)
    out = []
    for flat in order.tolist():
        i, j = divmod(flat, n2)
        if used_r[i] or used_c[j]:
            continue
        used_r[i] = used_c[j] = True
        out.append((i, j))
        if len(out) == min(n1, n2):
            break
    return sorted(out)


def hungarian_oracle(s, limit: int = 10) -> list:
    """Exact maximum-total-score one-to-one matching (small instances only)."""
    m = _scores(s)
    if max(m.shape) > limit:
        raise InvalidInputError(f"hungarian_oracle is limited to {limit} nodes per side")
    r, c = linear_sum_assignment(m, maximize=True)
    return sorted(zip(r.tolist(), c.tolist()))


def matching_score(s, matching: Sequence) -> float:
    m = _scores(s)
    return float(sum(m[i, j] for i, j in matching))


# ---------------------------------------------------------------- telemetry


@dataclass
class Telemetry:
    wall_time_s: float
    peak_mem_bytes: int
    converged: bool = True


def _rss() -> int:
    try:
        import psutil

        return int(psutil.Process(os.getpid()).memory_info().rss)
    except Exception:  # platform without RSS support
        return -1


class _RSSMonitor(threading.Thread):
    def __init__(self, interval: float):
        super().__init__(daemon=True)
        self.interval = interval
        self.peak = _rss()
        self._stop_evt = threading.Event()

    def run(self):
        while not self._stop_evt.wait(self.interval):
            self.peak = max(self.peak, _rss())

    def stop(self):
        self._stop_evt.set()
        self.join()


def run_with_telemetry(job: Callable[[], object], interval: float = 0.05):
    """Run ``job()`` while sampling process RSS every ``interval`` seconds.

    Returns ``(result, Telemetry)``. Peak memory is the largest sample,
    including snapshots taken right before and after the call. Exceptions
    from ``job`` propagate with the telemetry attached as ``exc.telemetry``.
    """
    before = _rss()
    mon = _RSSMonitor(interval)
    mon.start()
    t0 = time.perf_counter()
    try:
        result = job()
    except BaseException as exc:
        elapsed = time.perf_counter() - t0
        mon.stop()
        exc.telemetry = Telemetry(elapsed, max(mon.peak, before, _rss(), 0), converged=False)
        raise
    elapsed = time.perf_counter() - t0
    mon.stop()
    after = _rss()
    peak = max(before, mon.peak, after)
    if peak < 0:
        log.warning("RSS sampling is unavailable on this platform; reporting peak memory as 0")
        peak = 0
    converged = bool(getattr(result, "converged", True))
    return result, Telemetry(wall_time_s=elapsed, peak_mem_bytes=peak, converged=converged)
