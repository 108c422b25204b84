"""Coordinate ascent for the separable dual

    L(r, c) = sum_ij w_i M_ij log(r_i + c_j) - sum_i w_i r_i - sum_j m_j c_j + 1

whose maximiser gives the KL projection ``M_ij / (r_i + c_j)`` of the
row-stochastic matrix ``M`` onto {row sums 1, w^T X = m}. The Q-step uses
(w, m) = (p_c, p_q); the reverse-process bound uses (p_c, p_a).
"""

from __future__ import annotations

import numpy as np

from .errors import DualDomainViolation, NonConvergence

# minimum admissible r_i + c_j on the support
DOMAIN_FLOOR = 1e-12


def solve_reciprocal_sums(W, C, target, x0=None, max_iter=200):
    """Vectorised root-find of ``sum_k W[m,k] / (x[m] + C[m,k]) = target[m]``.

    Each left-hand side is convex and strictly decreasing on
    ``x > -min{C[m,k] : W[m,k] > 0}``, so Newton started left of the root
    climbs monotonically onto it without overshooting. Rows with no
    positive weight are returned as NaN.
    """
    W = np.asarray(W, dtype=float)
    C = np.asarray(C, dtype=float)
    t = np.asarray(target, dtype=float)
    active = W > 0
    has = active.any(axis=1) & (t > 0)
    Cm = np.where(active, C, np.inf)
    cmin = Cm.min(axis=1)

    with np.errstate(divide="ignore", invalid="ignore"):
        # a single term already reaches the target here, so f(x_lo) >= t
        x_lo = np.where(active, W / t[:, None] - C, -np.inf).max(axis=1)
        x = x_lo.copy()
        if x0 is not None:
            x0 = np.asarray(x0, dtype=float)
            ok = np.isfinite(x0) & (x0 + cmin > 0)
            f0 = np.where(active, W / (x0[:, None] + C), 0.0).sum(axis=1)
            use = ok & (f0 >= t) & (x0 > x_lo)
            x = np.where(use, x0, x)

    x = np.where(has, x, np.nan)
    todo = has.copy()
    for _ in range(max_iter):
        if not todo.any():
            break
        d = x[todo, None] + C[todo]
        Wt = W[todo]
        a = active[todo]
        inv = np.where(a, 1.0 / np.where(a, d, 1.0), 0.0)
        f = (Wt * inv).sum(axis=1) - t[todo]
        fp = -(Wt * inv * inv).sum(axis=1)
        step = -f / fp
        step = np.maximum(step, 0.0)  # rounding can only push us right of the root
        xn = x[todo] + step
        x[todo] = xn
        done = step <= 4 * np.finfo(float).eps * np.maximum(np.abs(xn), 1.0)
        idx = np.flatnonzero(todo)
        todo[idx[done]] = False
    return x


def dual_ascent(M, w, m, r0=None, c0=None, tol=1e-12, max_iter=20000, feas_tol=1e-9):
    """Maximise the dual by alternating exact block updates.

    Returns ``(r, c, X, sweeps)`` where ``X = M / (r[:, None] + c[None, :])``.
    Rows with ``w_i = 0`` carry no constraint; their ``r_i`` is NaN and the
    corresponding row of ``X`` is left for the caller to fill.
    """
    M = np.asarray(M, dtype=float)
    w = np.asarray(w, dtype=float)
    m = np.asarray(m, dtype=float)
    n = M.shape[0]
    live = w > 0
    wM = w[:, None] * M
    col_live = (wM > 0).any(axis=0)
    if np.any(~col_live & (m > 0)):
        j = int(np.flatnonzero(~col_live & (m > 0))[0])
        raise DualDomainViolation(f"target mass {m[j]:.3g} on column {j} has no supporting entry")

    r = np.ones(n) if r0 is None else np.array(r0, dtype=float)
    c = np.zeros(n) if c0 is None else np.array(c0, dtype=float)
    r[~live] = np.nan
    c[~col_live] = np.nan

    rows_W = np.where(live[:, None], M, 0.0)
    cols_W = wM.T
    support = wM > 0

    prev_den = None
    for sweep in range(1, max_iter + 1):
        cc = np.where(col_live, c, 0.0)
        r_new = solve_reciprocal_sums(rows_W, np.broadcast_to(cc, (n, n)), np.ones(n), x0=r)
        rr = np.where(live, r_new, 0.0)
        c_new = solve_reciprocal_sums(cols_W, np.broadcast_to(rr, (n, n)), m, x0=c)
        r, c = r_new, c_new

        den = np.where(support, np.nan_to_num(r)[:, None] + np.nan_to_num(c)[None, :], 1.0)
        if np.any(den[support] < DOMAIN_FLOOR) or not np.all(np.isfinite(den)):
            raise DualDomainViolation("dual iterate left the admissible domain")
        if prev_den is not None:
            change = np.max(np.abs(den - prev_den) / den)
            if change < tol:
                X = _recover(M, r, c, live, col_live)
                if _residual(X, w, m, live) <= feas_tol:
                    return r, c, X, sweep
        prev_den = den
    X = _recover(M, r, c, live, col_live)
    raise NonConvergence(
        f"dual ascent did not converge in {max_iter} sweeps (residual {_residual(X, w, m, live):.3g})",
        iterations=max_iter,
    )


def _recover(M, r, c, live, col_live):
    den = np.nan_to_num(r)[:, None] + np.nan_to_num(c)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        X = np.where(M > 0, M / den, 0.0)
    X[~live] = 0.0
    return X


def _residual(X, w, m, live) -> float:
    # column error is relative to the target so tiny marginals are held to the same standard
    rows = np.abs(X[live].sum(axis=1) - 1.0).max() if live.any() else 0.0
    cols = relative_marginal_error(w @ X, m)
    return float(max(rows, cols))


def relative_marginal_error(got, want) -> float:
    got = np.asarray(got, dtype=float)
    want = np.asarray(want, dtype=float)
    pos = want > 0
    err = np.abs(got[pos] - want[pos]) / want[pos]
    stray = np.abs(got[~pos])
    return float(max(err.max(initial=0.0), stray.max(initial=0.0)))
