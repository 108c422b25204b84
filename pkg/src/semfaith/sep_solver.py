"""Semantic entropy production (SEP): lower bound on total entropy production
of the context -> answer transition over all admissible reverse processes.

For the forward joint ``P_ij = p_c[i] A*_ij`` and a reverse matrix ``A^R``
(rows indexed by answer topic j) the total entropy production is

    S_tot = sum_ij P_ij log( P_ij / (p_a[j] A^R_ji) )

minimised over row-stochastic ``A^R`` with ``sum_j p_a[j] A^R_ji = p_c[i]``.
The minimisation runs in the dual (same block structure as the Q-step with
p_q replaced by p_a); the primal is recovered as

    A^R_ji = p_c[i] A*_ij / (p_a[j] (xi_i + nu_j)).

All values here are in nats; convert with :func:`semfaith.core.to_units`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _dual
from .core import SolverConfig, TopicDistribution, TransitionMatrix, shannon_entropy
from .errors import DomainError, InfeasibleReverse, InvalidInput
from .sf_solver import SfResult

# tolerance on p_c^T A* = p_a before the reverse problem is declared inconsistent
INPUT_MARGINAL_TOL = 1e-6
REVERSE_FEAS_TOL = 1e-7


@dataclass(frozen=True)
class SepResult:
    sep_total: float
    s_system: float
    s_medium: float
    d_forward_reverse: float
    a_reverse: TransitionMatrix
    xi_star: np.ndarray  # context-side multipliers
    nu_star: np.ndarray  # answer-side multipliers
    naive_sep: float | None
    first_order_sep: float | None
    reverse_residual: float
    dual_sweeps: int
    dual_value: float


def system_entropy_change(p_c, p_a, units="bits") -> float:
    """H[p_a] - H[p_c]; negative when the answer is more concentrated."""
    if np.asarray(p_c).size != np.asarray(p_a).size:
        raise InvalidInput("p_c and p_a differ in size")
    return shannon_entropy(p_a, units) - shannon_entropy(p_c, units)


def naive_sep(f_s: float) -> float:
    if not f_s > 0:
        raise DomainError(f"F_S must be positive, got {f_s}")
    return 1.0 / f_s - 1.0


def first_order_sep(sf: SfResult, p_q, p_a) -> float:
    """Dual value of the reverse problem evaluated at the Q-step optimum.

    Uses the Q-step multipliers on the marginal constraint (``sf.xi_star``):
    those are the ones paired with ``p_q`` in the Q-step dual and with
    ``p_a`` in the reverse dual.
    """
    pq = np.asarray(p_q, dtype=float)
    pa = np.asarray(p_a, dtype=float)
    mult = np.nan_to_num(np.asarray(sf.xi_star, dtype=float))
    return naive_sep(sf.f_s) + float(mult @ (pq - pa))


def _dual_value(P, xi, nu, p_c, p_a) -> float:
    den = np.nan_to_num(xi)[:, None] + np.nan_to_num(nu)[None, :]
    s = P > 0
    return float(np.sum(P[s] * np.log(den[s])) - p_c @ np.nan_to_num(xi) - p_a @ np.nan_to_num(nu) + 1.0)


def solve_sep(a_star, p_c, p_a, cfg: SolverConfig = SolverConfig(), sf: SfResult | None = None,
              p_q=None) -> SepResult:
    """Minimise total entropy production over feasible reverse matrices.

    ``sf`` and ``p_q`` are optional; when given, the two closed-form
    approximations are filled in.
    """
    A = np.asarray(a_star, dtype=float)
    raw_c = np.asarray(p_c, dtype=float)
    raw_a = np.asarray(p_a, dtype=float)
    if A.shape != (raw_c.size, raw_c.size) or raw_a.size != raw_c.size:
        raise InvalidInput("a_star, p_c and p_a must share N")
    eps = cfg.epsilon_smooth
    pc = TopicDistribution(raw_c).smoothed(eps)
    pa = TopicDistribution(raw_a).smoothed(eps)

    mismatch = np.abs(pc @ A - pa).max()
    if mismatch > INPUT_MARGINAL_TOL:
        raise InfeasibleReverse(
            f"p_c^T A* misses p_a by {mismatch:.3g}; no reverse matrix can match both marginals"
        )

    xi, nu, M, sweeps = _dual.dual_ascent(
        A, pc, pa, tol=cfg.tol_inner, max_iter=cfg.max_inner_iters, feas_tol=cfg.feasibility_tol,
    )
    P = pc[:, None] * A
    # M_ij = A*_ij / (xi_i + nu_j) is the reverse joint divided by the forward context mass
    joint_rev = pc[:, None] * M
    with np.errstate(divide="ignore", invalid="ignore"):
        AR = np.where(pa[None, :] > 0, joint_rev / pa[None, :], 0.0).T
    dead = pa <= 0
    if dead.any():
        AR[dead] = pc

    resid = max(
        float(np.abs(AR[~dead].sum(axis=1) - 1).max(initial=0.0)),
        float(np.abs(pa @ AR - pc).max()),
    )
    if resid > REVERSE_FEAS_TOL:
        raise InfeasibleReverse(f"recovered reverse matrix violates its constraints by {resid:.3g}")

    s = P > 0
    ARt = AR.T
    sep_total = float(np.sum(P[s] * np.log(P[s] / (pa[None, :] * ARt)[s])))
    d_fr = float(np.sum(P[s] * np.log(A[s] / ARt[s])))
    s_sys = system_entropy_change(raw_c, raw_a, units="nats")

    naive = first = None
    if sf is not None:
        naive = naive_sep(sf.f_s)
        if p_q is not None:
            first = first_order_sep(sf, p_q, raw_a)

    return SepResult(
        sep_total=sep_total,
        s_system=s_sys,
        s_medium=sep_total - s_sys,
        d_forward_reverse=d_fr,
        a_reverse=TransitionMatrix(AR, tol=REVERSE_FEAS_TOL),
        xi_star=xi,
        nu_star=nu,
        naive_sep=naive,
        first_order_sep=first,
        reverse_residual=resid,
        dual_sweeps=sweeps,
        dual_value=_dual_value(P, xi, nu, pc, pa),
    )
