"""Optimal-transport aligners.

``sinkhorn`` is the shared entropic OT kernel. ``parrot_lite_align`` runs
KL proximal-point steps on an RWR position cost; ``gw_align`` runs
entropic mirror descent on a Gromov-Wasserstein objective built from
parameter-free multi-hop propagation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import warnings

import numpy as np
import scipy.linalg as sla
from scipy.special import logsumexp

from .embedding import RWRConfig, anchor_descriptors, cosine_matrix
from .errors import InvalidInputError, NumericError
from .graph import AlignmentMatrix, AlignmentTask, Graph, degree_vector, ensure_dense_fits, normalize_adjacency

LOG_DOMAIN_BELOW = 0.01
# scaling sweeps before switching to Newton polishing of the same duals
NEWTON_AFTER = 100
# Newton needs a dense solve on the smaller side
NEWTON_MAX_SIDE = 2000


@dataclass(frozen=True)
class OTConfig:
    epsilon: float = 0.01
    prox_gamma: float = 0.01
    outer_iters: int = 50
    sinkhorn_iters: int = 500
    sinkhorn_tol: float = 1e-9
    restart_prob: float = 0.15
    anchor_bonus: float = 1.0

    def __post_init__(self):
        if self.epsilon <= 0 or self.prox_gamma < 0:
            raise InvalidInputError("epsilon must be positive and prox_gamma nonnegative")
        if self.outer_iters < 1 or self.sinkhorn_iters < 1 or self.sinkhorn_tol <= 0:
            raise InvalidInputError("iteration counts must be >= 1 and sinkhorn_tol positive")
        if not 0.0 < self.restart_prob < 1.0:
            raise InvalidInputError("restart_prob must lie in (0, 1)")
        if self.anchor_bonus < 0:
            raise InvalidInputError("anchor_bonus must be nonnegative")


@dataclass
class TransportPlan:
    plan: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    converged: bool = True
    iterations: int = 0
    violation: float = 0.0
    log_domain: bool = False
    # log-domain dual potentials divided by the regularizer
    duals: tuple = field(default=(), repr=False)


def marginal_violation(plan: np.ndarray, mu: np.ndarray, nu: np.ndarray) -> float:
    return max(np.abs(plan.sum(axis=1) - mu).max(initial=0.0), np.abs(plan.sum(axis=0) - nu).max(initial=0.0))


def _solve_log(log_k, mu, nu, tol, max_iter, init=None):
    log_mu, log_nu = np.log(mu), np.log(nu)
    f = np.zeros(len(mu)) if init is None else init[0]
    g = np.zeros(len(nu)) if init is None else init[1]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        lr = logsumexp(log_k + g[None, :], axis=1)
        if it > 1 and np.abs(np.exp(f + lr) - mu).max() < tol:
            converged = True
            it -= 1
            break
        f = log_mu - lr
        g = log_nu - logsumexp(log_k + f[:, None], axis=0)
    else:
        lr = logsumexp(log_k + g[None, :], axis=1)
        converged = np.abs(np.exp(f + lr) - mu).max() < tol
    plan = np.exp(f[:, None] + log_k + g[None, :])
    return plan, converged, it, (f, g)


def _solve_scaling(log_k, mu, nu, tol, max_iter, init=None):
    """Plain Sinkhorn-Knopp. Returns None when scaling breaks down."""
    shift = log_k.max()
    k = np.exp(log_k - shift)
    if init is None:
        u, v = np.ones(len(mu)), np.ones(len(nu))
    else:
        with np.errstate(over="ignore"):
            u, v = np.exp(init[0] + shift), np.exp(init[1])
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            u, v = np.ones(len(mu)), np.ones(len(nu))
    converged = False
    it = 0
    with np.errstate(all="ignore"):
        for it in range(1, max_iter + 1):
            kv = k @ v
            if it > 1 and np.abs(u * kv - mu).max() < tol:
                converged = True
                it -= 1
                break
            u = mu / kv
            ktu = k.T @ u
            v = nu / ktu
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
                return None
        else:
            converged = np.abs(u * (k @ v) - mu).max() < tol
        plan = u[:, None] * k * v[None, :]
    if not np.all(np.isfinite(plan)):
        return None
    with np.errstate(divide="ignore"):
        duals = (np.log(u) - shift, np.log(v))
    return plan, converged, it, duals


def _sweep(log_k, log_mu, log_nu, g):
    f = log_mu - logsumexp(log_k + g[None, :], axis=1)
    g = log_nu - logsumexp(log_k + f[:, None], axis=0)
    return f, g


def _dual(log_k, mu, nu, f, g) -> float:
    with np.errstate(all="ignore"):
        return float(f @ mu + g @ nu - np.exp(logsumexp(f[:, None] + log_k + g[None, :])))


def _solve_newton(log_k, mu, nu, tol, max_iter, init):
    """Damped Newton ascent on the entropic dual, each step followed by one
    scaling sweep so the column marginals stay exact.

    Converges quadratically where alternating scaling crawls (small
    regularizers). Only the ``n2 x n2`` Schur complement is factorized.
    The Levenberg-Marquardt damping ``lam`` scales the Hessian diagonal and
    adapts to whether full steps are accepted.
    """
    log_mu, log_nu = np.log(mu), np.log(nu)
    f, g = init
    n2 = len(nu)
    gauge = np.full((n2, n2), nu.mean() / n2)
    lam = 1e-6
    it = 0
    viol = np.inf
    for it in range(max_iter + 1):
        f, g = _sweep(log_k, log_mu, log_nu, g)
        r = np.exp(f + logsumexp(log_k + g[None, :], axis=1))
        viol = np.abs(r - mu).max()
        if viol < tol or it == max_iter:
            break
        p = np.exp(f[:, None] + log_k + g[None, :])
        rd = (1.0 + lam) * r
        schur = np.diag((1.0 + lam) * nu) - p.T @ (p / rd[:, None]) + gauge
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            try:
                dg = sla.solve(schur, -(p.T @ ((mu - r) / rd)), assume_a="sym", check_finite=False)
            except (sla.LinAlgError, ValueError):
                lam *= 10.0
                continue
        df = (mu - r - p @ dg) / rd
        base = _dual(log_k, mu, nu, f, g)
        slope = float((mu - r) @ df)
        t = 1.0
        while t > 1e-4 and not _dual(log_k, mu, nu, f + t * df, g + t * dg) >= base + 1e-4 * t * slope:
            t *= 0.5
        if t > 1e-4:
            f, g = f + t * df, g + t * dg
        # the sweep at the top of the loop still makes progress on rejection
        lam = max(lam / 4.0, 1e-12) if t == 1.0 else min(lam * 10.0, 1e6)
    plan = np.exp(f[:, None] + log_k + g[None, :])
    return plan, bool(viol < tol), it, (f, g)


def _newton_polish(log_k, mu, nu, tol, budget, duals):
    if budget < 1 or min(len(mu), len(nu)) > NEWTON_MAX_SIDE or (mu <= 0).any() or (nu <= 0).any():
        return None
    f, g = duals
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
        return None
    if len(nu) > len(mu):
        out = _solve_newton(log_k.T, nu, mu, tol, budget, (g, f))
        plan, ok, it, (g2, f2) = out
        return plan.T, ok, it, (f2, g2)
    return _solve_newton(log_k, mu, nu, tol, budget, (f, g))


def _sinkhorn_logk(log_k, mu, nu, reg, tol, max_iter, init=None) -> TransportPlan:
    if np.isnan(log_k).any():
        raise NumericError("NaN in Sinkhorn kernel")
    if not np.all(np.isfinite(log_k.max(axis=1))) or not np.all(np.isfinite(log_k.max(axis=0))):
        raise NumericError("Sinkhorn kernel has an all-zero row or column")
    warm = min(max_iter, NEWTON_AFTER)
    out = None
    log_domain = reg < LOG_DOMAIN_BELOW
    if not log_domain:
        out = _solve_scaling(log_k, mu, nu, tol, warm, init)
        if out is None:
            log_domain = True
    if out is None:
        if init is not None and not (np.all(np.isfinite(init[0])) and np.all(np.isfinite(init[1]))):
            init = None
        out = _solve_log(log_k, mu, nu, tol, warm, init)
    if not out[1] and max_iter > warm:
        polished = _newton_polish(log_k, mu, nu, tol, max_iter - warm, out[3])
        if polished is not None:
            out = polished[0], polished[1], warm + polished[2], polished[3]
            log_domain = True
        else:
            solve = _solve_log if log_domain else _solve_scaling
            rest = solve(log_k, mu, nu, tol, max_iter - warm, out[3])
            if rest is not None:
                out = rest[0], rest[1], warm + rest[2], rest[3]
    plan, converged, it, duals = out
    return TransportPlan(
        plan=plan, mu=mu, nu=nu, converged=bool(converged), iterations=it,
        violation=float(marginal_violation(plan, mu, nu)), log_domain=log_domain, duals=duals,
    )


def sinkhorn(cost, mu=None, nu=None, epsilon: float = 0.01, tol: float = 1e-9,
             max_iter: int = 1000) -> TransportPlan:
    """Entropic OT: ``plan = diag(u) exp(-cost / epsilon) diag(v)``.

    Iterates until the worst marginal violation is below ``tol``. Works in
    the log domain for ``epsilon < 0.01``. If alternating scaling has not
    converged after ``NEWTON_AFTER`` sweeps, the remaining budget goes to
    Newton steps on the same dual problem (same fixed point, much faster
    for small ``epsilon``). ``mu`` and ``nu`` default to
    uniform. A plan that has not converged comes back with
    ``converged=False``.
    """
    cost = np.asarray(cost, dtype=np.float64)
    n1, n2 = cost.shape
    mu = np.full(n1, 1.0 / n1) if mu is None else np.asarray(mu, dtype=np.float64)
    nu = np.full(n2, 1.0 / n2) if nu is None else np.asarray(nu, dtype=np.float64)
    if epsilon <= 0:
        raise InvalidInputError("epsilon must be positive")
    if not np.all(np.isfinite(cost)):
        raise NumericError("cost matrix must be finite")
    if abs(mu.sum() - 1) > 1e-9 or abs(nu.sum() - 1) > 1e-9 or (mu < 0).any() or (nu < 0).any():
        raise InvalidInputError("marginals must be probability vectors")
    return _sinkhorn_logk(-cost / epsilon, mu, nu, epsilon, tol, max_iter)


def _uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def _prox_step(cost, prev, eps, gamma, mu, nu, cfg: OTConfig, init=None) -> TransportPlan:
    """One KL-proximal entropic OT step:
    ``argmin <cost, T> + eps H(T) + gamma KL(T | prev)``.

    ``init`` takes the previous step's duals; near a fixed point of the
    proximal map they are exactly the duals of the next step.
    """
    reg = eps + gamma
    with np.errstate(divide="ignore"):
        log_k = (-cost + gamma * np.log(prev)) / reg
    return _sinkhorn_logk(log_k, mu, nu, reg, cfg.sinkhorn_tol, cfg.sinkhorn_iters, init)


def entropic_objective(cost: np.ndarray, plan: np.ndarray, eps: float) -> float:
    """``<cost, T> + eps * sum T log T`` (with 0 log 0 = 0)."""
    pos = plan > 0
    return float((cost * plan).sum() + eps * (plan[pos] * np.log(plan[pos])).sum())


def rwr_cost(task: AlignmentTask, cfg: OTConfig = OTConfig()) -> np.ndarray:
    """``1 - cosine`` of anchor-RWR descriptors, minus ``anchor_bonus`` on
    training anchors, clipped at 0."""
    e1, e2, _, _ = anchor_descriptors(task, RWRConfig(restart_prob=cfg.restart_prob))
    cost = 1.0 - cosine_matrix(e1, e2)
    a = task.train_anchors
    cost[a[:, 0], a[:, 1]] -= cfg.anchor_bonus
    return np.clip(cost, 0.0, None)


def parrot_lite_align(task: AlignmentTask, cfg: OTConfig = OTConfig()) -> AlignmentMatrix:
    """Proximal-point entropic OT on the RWR position cost.

    Starting from the uniform plan, each outer step solves Sinkhorn with
    cost ``C - gamma log T_prev`` and regularizer ``eps + gamma``.
    """
    n1, n2 = task.shape
    ensure_dense_fits(n1, n2, 6, "parrot-lite")
    cost = rwr_cost(task, cfg)
    mu, nu = _uniform(n1), _uniform(n2)
    plan = np.outer(mu, nu)
    objective = [entropic_objective(cost, plan, cfg.epsilon)]
    converged = True
    duals = None
    for _ in range(cfg.outer_iters):
        tp = _prox_step(cost, plan, cfg.epsilon, cfg.prox_gamma, mu, nu, cfg, duals)
        plan, duals = tp.plan, tp.duals
        converged &= tp.converged
        objective.append(entropic_objective(cost, plan, cfg.epsilon))
    return AlignmentMatrix(plan, converged=converged, info={"objective": objective})


def multihop_intra_sim(g: Graph, hops: int = 2) -> np.ndarray:
    """Intra-graph similarity from parameter-free propagation.

    ``F_0`` is the node attributes, or ``[degree, 1]`` without them;
    ``F_k = A_sym F_{k-1}``. The result is the mean of ``F_k F_k^T`` over
    ``k = 0..hops`` (rows of each ``F_k`` L2-normalized) plus the 0/1
    adjacency, divided by its maximum entry.
    """
    if hops < 1:
        raise InvalidInputError("hops must be >= 1")
    n = g.num_nodes
    if g.node_attrs is not None:
        f = np.array(g.node_attrs, dtype=np.float64)
    else:
        f = np.stack([degree_vector(g), np.ones(n)], axis=1)
    a_hat = normalize_adjacency(g, "symmetric")
    sim = np.zeros((n, n))
    for k in range(hops + 1):
        if k:
            f = np.asarray(a_hat @ f)
        norms = np.linalg.norm(f, axis=1, keepdims=True)
        fn = np.divide(f, norms, out=np.zeros_like(f), where=norms > 0)
        sim += fn @ fn.T
    sim /= hops + 1
    adj = g.adjacency.toarray() > 0
    sim += adj
    top = np.abs(sim).max(initial=0.0)
    return sim / top if top > 0 else sim


def gw_objective(a1: np.ndarray, a2: np.ndarray, plan: np.ndarray) -> float:
    """``sum_{ijkl} (a1[i,k] - a2[j,l])^2 T[i,j] T[k,l]``."""
    p, q = plan.sum(axis=1), plan.sum(axis=0)
    const = ((a1 ** 2) @ p)[:, None] + ((a2 ** 2) @ q)[None, :]
    return float(((const - 2.0 * a1 @ plan @ a2.T) * plan).sum())


# the GW gradient shrinks like 1/n under uniform marginals, so the default
# regularizer sits at the low end of the usual range
GW_DEFAULTS = OTConfig(epsilon=1e-3)


def _gw_entropic(a1: np.ndarray, a2: np.ndarray, plan: np.ndarray, eps: float, anchors, bonus: float) -> float:
    # the step direction G is the gradient of GW / 2, so this is the function
    # each step targets
    pos = plan > 0
    value = 0.5 * gw_objective(a1, a2, plan) + eps * float((plan[pos] * np.log(plan[pos])).sum())
    if len(anchors):
        value -= bonus * float(plan[anchors[:, 0], anchors[:, 1]].sum())
    return value


def gw_align(task: AlignmentTask, hops: int = 2, cfg: OTConfig = GW_DEFAULTS) -> AlignmentMatrix:
    """Entropic Gromov-Wasserstein alignment by proximal mirror descent.

    Each outer step linearizes the objective at the current plan,
    ``G = c1 - 2 A1 T A2^T``, and takes a KL-proximal Sinkhorn step on it.
    Training anchors, if any, lower ``G`` by ``anchor_bonus``.

    ``G`` is the gradient of ``GW / 2``, so the iteration targets
    ``GW / 2 + eps * sum T log T`` minus the anchor bonus mass
    (``info['entropic_objective']``). Each step is guaranteed to lower it
    when ``prox_gamma`` is at least the largest ``(A1[i, k] - A2[j, l]) ** 2``.
    """
    n1, n2 = task.shape
    if n1 == 0 or n2 == 0:
        raise InvalidInputError("both graphs must be nonempty")
    ensure_dense_fits(n1, n2, 6, "gw-align")
    a1 = multihop_intra_sim(task.g1, hops)
    a2 = multihop_intra_sim(task.g2, hops)
    mu, nu = _uniform(n1), _uniform(n2)
    const = ((a1 ** 2) @ mu)[:, None] + ((a2 ** 2) @ nu)[None, :]
    plan = np.outer(mu, nu)
    anchors = task.train_anchors
    objective = [gw_objective(a1, a2, plan)]
    entropic = [_gw_entropic(a1, a2, plan, cfg.epsilon, anchors, cfg.anchor_bonus)]
    converged = True
    duals = None
    for _ in range(cfg.outer_iters):
        grad = const - 2.0 * (a1 @ plan @ a2.T)
        if len(anchors):
            grad[anchors[:, 0], anchors[:, 1]] -= cfg.anchor_bonus
        tp = _prox_step(grad, plan, cfg.epsilon, cfg.prox_gamma, mu, nu, cfg, duals)
        plan, duals = tp.plan, tp.duals
        converged &= tp.converged
        objective.append(gw_objective(a1, a2, plan))
        entropic.append(_gw_entropic(a1, a2, plan, cfg.epsilon, anchors, cfg.anchor_bonus))
    info = {"objective": objective, "entropic_objective": entropic, "hops": hops}
    return AlignmentMatrix(plan, converged=converged, info=info)
