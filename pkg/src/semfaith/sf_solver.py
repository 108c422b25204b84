"""Semantic Faithfulness: alternating KL projections between the answer and
question transition-matrix constraint sets.

    C_A = {A row-stochastic, p_c^T A = p_a}
    C_Q = {Q row-stochastic, p_c^T Q = p_q}

``D_min = min D(A || Q)`` over C_A x C_Q and ``F_S = 1 / (1 + D_min)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _dual
from .core import (
    QcaTriplet,
    SolverConfig,
    TopicDistribution,
    TransitionMatrix,
    kl_conditional,
    validate_triplet,
)
from .errors import AbsoluteContinuityViolation, InvalidInput, NonConvergence


@dataclass(frozen=True)
class SfResult:
    d_min: float
    f_s: float
    q_star: TransitionMatrix
    a_star: TransitionMatrix
    outer_iters: int
    objective_trace: tuple[float, ...]
    constraint_residual: float
    u_star: np.ndarray
    nu_star: np.ndarray  # row-normalisation multipliers of the Q-step
    xi_star: np.ndarray  # marginal multipliers of the Q-step
    inner_iters: tuple[tuple[int, int], ...] = field(default=())


def init_q_matrix(p_c: TopicDistribution, p_q: TopicDistribution) -> TransitionMatrix:
    """Rank-one start: every row equals ``p_q``; feasible by construction."""
    q = np.asarray(p_q, dtype=float)
    if np.asarray(p_c).size != q.size:
        raise InvalidInput("p_c and p_q differ in size")
    return TransitionMatrix(np.tile(q, (q.size, 1)))


def _a_step(Q, p_c, p_a, u0, tol, max_iter, feas_tol):
    """Fixed-point iteration for the column scalings ``u`` of the A-step."""
    n = Q.shape[0]
    u = np.ones(n) if u0 is None else np.array(u0, dtype=float)
    live_cols = p_a > 0
    u[~live_cols] = 0.0
    live_rows = p_c > 0
    reach = (p_c[:, None] * Q > 0).any(axis=0)
    if np.any(live_cols & ~reach):
        j = int(np.flatnonzero(live_cols & ~reach)[0])
        raise AbsoluteContinuityViolation(f"answer topic {j} has mass but Q gives it none")

    for sweep in range(1, max_iter + 1):
        s = Q @ u
        s_safe = np.where(s > 0, s, 1.0)
        col = (p_c / s_safe)[live_rows] @ Q[live_rows]
        u_new = np.where(live_cols, p_a / np.where(col > 0, col, 1.0), 0.0)
        ratio = u_new[live_cols] / u[live_cols]
        u = u_new
        if np.all(np.isfinite(ratio)) and ratio.size and ratio.max() / ratio.min() - 1.0 < tol:
            A = _a_from_u(Q, u)
            if _dual.relative_marginal_error(p_c @ A, p_a) <= feas_tol:
                return A, u, sweep
        # keep u on a fixed scale; the map is homogeneous of degree one
        u = u / u[live_cols].max()
    A = _a_from_u(Q, u)
    raise NonConvergence(
        f"A-step fixed point not reached in {max_iter} sweeps "
        f"(residual {np.abs(p_c @ A - p_a).max():.3g})",
        iterations=max_iter,
    )


def _a_from_u(Q, u):
    num = Q * u[None, :]
    s = num.sum(axis=1, keepdims=True)
    return num / np.where(s > 0, s, 1.0)


def a_step(Q, p_c, p_a, cfg: SolverConfig = SolverConfig(), u0=None):
    """I-projection of ``Q`` onto C_A. Returns ``(A, u)``."""
    Qa = np.asarray(Q, dtype=float)
    pc = np.asarray(p_c, dtype=float)
    pa = np.asarray(p_a, dtype=float)
    A, u, _ = _a_step(Qa, pc, pa, u0, cfg.tol_inner, cfg.max_inner_iters, cfg.feasibility_tol)
    A = _fill_dead_rows(A, pc, pa)
    return TransitionMatrix(A), u


def q_step(A, p_c, p_q, cfg: SolverConfig = SolverConfig(), nu0=None, xi0=None):
    """Reverse I-projection of ``A`` onto C_Q via the dual. Returns ``(Q, nu, xi)``."""
    Aa = np.asarray(A, dtype=float)
    pc = np.asarray(p_c, dtype=float)
    pq = np.asarray(p_q, dtype=float)
    nu, xi, Q, _ = _dual.dual_ascent(
        Aa, pc, pq, r0=nu0, c0=xi0, tol=cfg.tol_inner, max_iter=cfg.max_inner_iters,
        feas_tol=cfg.feasibility_tol,
    )
    Q = _fill_dead_rows(Q, pc, pq)
    return TransitionMatrix(Q), nu, xi


def _fill_dead_rows(X, p_c, marginal):
    # rows with zero context mass are unconstrained; pin them for determinism
    dead = p_c <= 0
    if dead.any():
        X = np.array(X)
        X[dead] = marginal
    return X


def _residuals(A, Q, pc, pa, pq) -> float:
    live = pc > 0
    return float(max(
        np.abs(pc @ A - pa).max(),
        np.abs(pc @ Q - pq).max(),
        np.abs(A[live].sum(axis=1) - 1).max(),
        np.abs(Q[live].sum(axis=1) - 1).max(),
    ))


def solve_sf(t: QcaTriplet, cfg: SolverConfig = SolverConfig(), q_init=None) -> SfResult:
    """Alternate A- and Q-projections until the objective settles."""
    findings = validate_triplet(t)
    if findings:
        raise InvalidInput(f"triplet {t.id!r} is invalid: " + "; ".join(findings), findings)
    eps = cfg.epsilon_smooth
    pc, pq, pa = t.p_c.smoothed(eps), t.p_q.smoothed(eps), t.p_a.smoothed(eps)

    if q_init is None:
        Q = np.tile(pq, (pq.size, 1))
    else:
        Q = np.array(q_init, dtype=float)

    u = nu = xi = None
    trace: list[float] = []
    inner: list[tuple[int, int]] = []
    prev = np.inf
    for k in range(1, cfg.max_outer_iters + 1):
        try:
            A, u, na = _a_step(Q, pc, pa, u, cfg.tol_inner, cfg.max_inner_iters, cfg.feasibility_tol)
            nu, xi, Q, nq = _dual.dual_ascent(
                A, pc, pq, r0=nu, c0=xi, tol=cfg.tol_inner, max_iter=cfg.max_inner_iters,
                feas_tol=cfg.feasibility_tol,
            )
        except NonConvergence as exc:
            raise NonConvergence(f"outer iteration {k}: {exc}", trace=trace, iterations=k) from exc
        inner.append((na, nq))
        d = kl_conditional(A, Q, pc)
        trace.append(d)
        if abs(prev - d) < cfg.tol_outer:
            break
        prev = d
    else:
        raise NonConvergence(
            f"objective still changing after {cfg.max_outer_iters} outer iterations",
            trace=trace, iterations=cfg.max_outer_iters,
        )

    A = _fill_dead_rows(A, pc, pa)
    Q = _fill_dead_rows(Q, pc, pq)
    d_min = max(trace[-1], 0.0)
    return SfResult(
        d_min=d_min,
        f_s=1.0 / (1.0 + d_min),
        q_star=TransitionMatrix(Q),
        a_star=TransitionMatrix(A),
        outer_iters=k,
        objective_trace=tuple(trace),
        constraint_residual=_residuals(A, Q, pc, pa, pq),
        u_star=u,
        nu_star=nu,
        xi_star=xi,
        inner_iters=tuple(inner),
    )
