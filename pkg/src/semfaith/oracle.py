"""Slow, independent reference solvers for small instances.

Nothing here reuses the solver internals: the grid search enumerates the
feasible set directly, and the projected-gradient routines work with plain
Euclidean projections onto the constraint sets. They exist to check the
alternating/dual solvers, not to be fast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import QcaTriplet, kl_conditional
from .errors import DimensionError, InvalidInput, NonConvergence


@dataclass(frozen=True)
class OracleConfig:
    grid_resolution: int = 2001
    pgd_step: float = 0.5
    pgd_iters: int = 4000
    projection_tol: float = 1e-11
    n_starts: int = 5
    seed: int = 20240917
    # lower bound on every matrix entry during descent, keeps log terms finite
    floor: float = 1e-12
    max_projection_sweeps: int = 2000
    max_move: float = 0.25
    plateau_window: int = 100
    plateau_tol: float = 1e-12

    def __post_init__(self):
        if self.grid_resolution < 2 or self.pgd_iters < 1 or self.n_starts < 1:
            raise InvalidInput("oracle budgets must be positive")
        if not (self.pgd_step > 0 and self.projection_tol > 0):
            raise InvalidInput("pgd_step and projection_tol must be positive")


def closed_form_dmin(t: QcaTriplet) -> float:
    """KL(p_a || p_q).

    By the log-sum inequality ``D(A||Q) >= KL(p_c^T A || p_c^T Q)`` for any
    pair, and the rank-one pair ``A_i = p_a``, ``Q_i = p_q`` attains it.
    """
    pa = t.p_a.probs
    pq = t.p_q.probs
    s = pa > 0
    if np.any(s & (pq <= 0)):
        return float("inf")
    return float(np.sum(pa[s] * np.log(pa[s] / pq[s])))


# ---------------------------------------------------------------- grid search


def _n2_family(p_c, target, res):
    """All 2x2 row-stochastic X with ``p_c^T X = target`` on a uniform grid of X[0,0]."""
    c1, c2 = p_c
    lo = max(0.0, (target[0] - c2) / c1)
    hi = min(1.0, target[0] / c1)
    if hi < lo - 1e-12:
        raise InvalidInput("N=2 constraint set is empty")
    x = np.linspace(lo, min(max(hi, lo), 1.0), res)
    x21 = np.clip((target[0] - c1 * x) / c2, 0.0, 1.0)
    X = np.empty((res, 2, 2))
    X[:, 0, 0] = x
    X[:, 0, 1] = 1.0 - x
    X[:, 1, 0] = x21
    X[:, 1, 1] = 1.0 - x21
    return X


def grid_dmin_n2(t: QcaTriplet, cfg: OracleConfig = OracleConfig()) -> float:
    """Exhaustive minimum of D(A||Q) over the product grid of the two one-parameter families."""
    if t.n_topics != 2 or any(getattr(t, k).n_topics != 2 for k in ("p_q", "p_a")):
        raise DimensionError(f"grid oracle needs N=2, got N={t.n_topics}")
    pc = t.p_c.probs
    if np.any(pc <= 0):
        raise InvalidInput("grid oracle needs full-support p_c")
    A = _n2_family(pc, t.p_a.probs, cfg.grid_resolution)
    Q = _n2_family(pc, t.p_q.probs, cfg.grid_resolution)

    with np.errstate(divide="ignore", invalid="ignore"):
        logA = np.where(A > 0, np.log(A), 0.0)
        logQ = np.log(Q)
    total = np.zeros((A.shape[0], Q.shape[0]))
    for i in range(2):
        neg_h = np.sum(A[:, i, :] * logA[:, i, :], axis=1)
        # cross term sum_j A_ij log Q_ij, with 0 * log 0 = 0 and a * log 0 = -inf
        cross = np.zeros_like(total)
        for j in range(2):
            a = A[:, i, j][:, None]
            lq = logQ[:, i, j][None, :]
            with np.errstate(invalid="ignore"):
                cross += np.where(a > 0, a * lq, 0.0)
        total += pc[i] * (neg_h[:, None] - cross)
    return float(np.nanmin(total))


# ------------------------------------------------------ projected gradient


def _project_rows_simplex(Y, floor):
    """Euclidean projection of each last-axis row onto {x >= floor, sum x = 1}."""
    n = Y.shape[-1]
    budget = 1.0 - n * floor
    Z = Y - floor
    U = -np.sort(-Z, axis=-1)
    css = np.cumsum(U, axis=-1) - budget
    k = np.arange(1, n + 1)
    cond = U - css / k > 0
    rho = n - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1)
    return np.maximum(Z - theta, 0.0) + floor


def _project_affine(Y, w, m):
    """Projection onto {X 1 = 1, w^T X = m} (closed form, batched over leading axes)."""
    n = Y.shape[-1]
    r = Y.sum(axis=-1) - 1.0
    c = np.einsum("i,...ij->...j", w, Y) - m
    alpha = r / n
    a = (r @ w) / n
    beta = (c - a[..., None]) / (w @ w)
    return Y - alpha[..., :, None] - w[:, None] * beta[..., None, :]


def project_constraint_set(Y, w, m, floor=0.0, tol=1e-11, max_sweeps=20000):
    """Dykstra projection onto {rows on the simplex, entries >= floor, w^T X = m}.

    ``m`` broadcasts against the leading axes of ``Y`` (shape ``(..., N)``).
    Returns a point that is exactly row-stochastic with the marginal met to
    within ``tol``.
    """
    w = np.asarray(w, dtype=float)
    m = np.asarray(m, dtype=float)
    x = np.array(Y, dtype=float)
    p = np.zeros_like(x)
    for _ in range(max_sweeps):
        z = _project_rows_simplex(x + p, floor)
        p = x + p - z
        x = _project_affine(z, w, m)
        if np.max(np.abs(x - z)) <= tol:
            return z
    raise NonConvergence(f"Dykstra projection did not reach {tol:g} in {max_sweeps} sweeps")


def _random_feasible(rng, shape, w, m, cfg):
    """Interior feasible points: the rank-one point ``1 m^T`` plus a random
    direction from the constraints' null space, scaled so every entry keeps at
    least half of its rank-one value."""
    n = shape[-1]
    w = np.asarray(w, dtype=float)
    base = np.broadcast_to(np.asarray(m, dtype=float)[..., None, :], shape)
    G = rng.normal(size=shape)
    left = np.eye(n) - np.outer(np.ones(n), w)
    right = np.eye(n) - np.full((n, n), 1.0 / n)
    D = left @ G @ right
    with np.errstate(divide="ignore", invalid="ignore"):
        room = np.where(D < 0, 0.5 * base / -D, np.inf)
    lead = shape[:-2]
    scale = room.reshape(lead + (-1,)).min(axis=-1)
    scale = np.where(np.isfinite(scale), scale, 0.0)
    return base + scale[..., None, None] * D


def _require_support(**dists):
    for name, p in dists.items():
        if np.any(np.asarray(p) <= 0):
            raise InvalidInput(f"the gradient oracles need full support; {name} has a zero entry")


def _descend(f, grad, X0, w, m, cfg):
    """Batched accelerated projected gradient (FISTA) with backtracking.

    Each start keeps its own Lipschitz estimate. Momentum is reset whenever a
    step would raise the objective, so the accepted iterates are monotone,
    and the extrapolated point is pulled back inside the entry floor so the
    objective stays finite there. Stops once the best objective has moved
    less than ``plateau_tol`` over ``plateau_window`` iterations.
    """
    S = X0.shape[0]
    shape = (-1,) + (1,) * (X0.ndim - 1)
    flat = lambda Z: Z.reshape(S, -1)

    X = X0
    X_prev = X0
    fx = f(X)
    L = np.full(S, 1.0 / cfg.pgd_step)
    tk = np.ones(S)
    mark = fx.min()
    for it in range(1, cfg.pgd_iters + 1):
        if it % cfg.plateau_window == 0:
            if mark - fx.min() < cfg.plateau_tol:
                break
            mark = fx.min()

        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        beta = (tk - 1.0) / t_next
        D = X - X_prev
        with np.errstate(divide="ignore", invalid="ignore"):
            room = np.where(D < 0, (X - cfg.floor) / -D, np.inf)
        beta = np.minimum(beta, 0.99 * flat(room).min(axis=1))
        Y = X + beta.reshape(shape) * D
        fy = f(Y)
        G = grad(Y)
        gmax = flat(np.abs(G)).max(axis=1)
        # far trial points make Dykstra crawl; bound the raw move per entry
        L = np.maximum(L, gmax / cfg.max_move)

        done = np.zeros(S, dtype=bool)
        Xn = X.copy()
        for _ in range(60):
            try:
                trial = project_constraint_set(
                    Y - G / L.reshape(shape), w, m, cfg.floor, cfg.projection_tol, cfg.max_projection_sweeps
                )
            except NonConvergence:
                L = np.where(done, L, 2.0 * L)
                continue
            ft = f(trial)
            diff = flat(trial - Y)
            model = fy + np.sum(flat(G) * diff, axis=1) + 0.5 * L * np.sum(diff * diff, axis=1)
            ok = ~done & (ft <= model + 1e-15 * np.abs(fy))
            Xn = np.where(ok.reshape(shape), trial, Xn)
            done |= ok
            if done.all():
                break
            L = np.where(done, L, 2.0 * L)

        fn = f(Xn)
        better = done & (fn <= fx)
        X_prev = np.where(better.reshape(shape), X, X_prev)
        X = np.where(better.reshape(shape), Xn, X)
        fx = np.where(better, fn, fx)
        # restart: drop momentum where the step failed to descend
        X_prev = np.where(better.reshape(shape), X_prev, X)
        tk = np.where(better, t_next, 1.0)
        L = np.where(better, 0.9 * L, L)
    return X, fx


def pgd_dmin(t: QcaTriplet, cfg: OracleConfig = OracleConfig()) -> float:
    """Multi-start projected gradient on (A, Q) jointly; returns the best objective."""
    n = t.n_topics
    if not 2 <= n <= 5:
        raise DimensionError(f"pgd oracle supports 2 <= N <= 5, got N={n}")
    pc, pq, pa = t.p_c.probs, t.p_q.probs, t.p_a.probs
    _require_support(p_c=pc, p_q=pq, p_a=pa)
    rng = np.random.default_rng(cfg.seed)
    S = cfg.n_starts
    m = np.stack([pa, pq])  # slot 0 is A, slot 1 is Q
    X0 = _random_feasible(rng, (S, 2, n, n), pc, m, cfg)

    def f(X):
        A, Q = X[:, 0], X[:, 1]
        return np.einsum("i,sij->s", pc, A * np.log(A / Q))

    def grad(X):
        A, Q = X[:, 0], X[:, 1]
        gA = pc[None, :, None] * (np.log(A / Q) + 1.0)
        gQ = -pc[None, :, None] * A / Q
        return np.stack([gA, gQ], axis=1)

    X, fx = _descend(f, grad, X0, pc, m, cfg)
    best = int(np.argmin(fx))
    # re-evaluate through the shared primitive so both paths use one definition of D
    return kl_conditional(X[best, 0], X[best, 1], pc)


def pgd_sep(a_star, p_c, p_a, cfg: OracleConfig = OracleConfig()) -> float:
    """Multi-start projected gradient for the minimal total entropy production (nats)."""
    A = np.asarray(a_star, dtype=float)
    pc = np.asarray(p_c, dtype=float)
    pa = np.asarray(p_a, dtype=float)
    n = pc.size
    if not 2 <= n <= 5:
        raise DimensionError(f"pgd oracle supports 2 <= N <= 5, got N={n}")
    _require_support(p_c=pc, p_a=pa)
    P = pc[:, None] * A
    s = P > 0
    rng = np.random.default_rng(cfg.seed)
    # reverse matrices: rows are answer topics, weighted marginal p_a^T R = p_c
    R0 = _random_feasible(rng, (cfg.n_starts, 1, n, n), pa, pc[None, :], cfg)

    def f(X):
        Rt = np.swapaxes(X[:, 0], -1, -2)  # Rt[s, i, j] = R[s, j, i]
        rev = pa[None, None, :] * Rt
        terms = np.where(s[None], P[None] * np.log(np.where(s[None], P[None] / rev, 1.0)), 0.0)
        return terms.sum(axis=(1, 2))

    def grad(X):
        Rt = np.swapaxes(X[:, 0], -1, -2)
        g = np.where(s[None], -P[None] / Rt, 0.0)
        return np.swapaxes(g, -1, -2)[:, None]

    _, fx = _descend(f, grad, R0, pa, pc[None, :], cfg)
    return float(fx.min())
