"""Domain types and the entropy / KL primitives everything else is built on.

All internal quantities are in nats. ``units="bits"`` only changes the log
base of the returned value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Mapping, Sequence

import numpy as np

from .errors import AbsoluteContinuityViolation, EmptyText, InvalidInput

Units = Literal["bits", "nats"]

RENORM_WINDOW = 1e-6
SUM_TOL = 1e-9


def _frozen(x: np.ndarray) -> np.ndarray:
    x = np.array(x, dtype=float)
    x.setflags(write=False)
    return x


class TopicDistribution:
    """Probability vector over ``n_topics`` shared topics.

    The default constructor enforces the invariants: entries must be
    non-negative and sum to one within ``RENORM_WINDOW``; anything inside
    the window is renormalised. ``check=False`` keeps the raw values so
    that malformed inputs can still be carried to :func:`validate_triplet`.
    """

    __slots__ = ("probs",)

    def __init__(self, probs: Sequence[float] | np.ndarray, check: bool = True):
        p = np.asarray(probs, dtype=float).reshape(-1)
        if check:
            if p.size == 0:
                raise InvalidInput("empty distribution")
            if not np.all(np.isfinite(p)):
                raise InvalidInput("distribution has non-finite entries")
            if np.any(p < 0):
                raise InvalidInput(f"distribution has negative entries: min={p.min():.3g}")
            s = p.sum()
            if abs(s - 1.0) > RENORM_WINDOW:
                raise InvalidInput(f"distribution sums to {s:.12g}, not 1")
            p = p / s
        object.__setattr__(self, "probs", _frozen(p))

    def __setattr__(self, name, value):
        raise AttributeError("TopicDistribution is immutable")

    @property
    def n_topics(self) -> int:
        return int(self.probs.size)

    def __len__(self) -> int:
        return self.n_topics

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TopicDistribution):
            return NotImplemented
        return self.probs.shape == other.probs.shape and bool(np.array_equal(self.probs, other.probs))

    def __hash__(self) -> int:
        return hash(self.probs.tobytes())

    def __repr__(self) -> str:
        return f"TopicDistribution({np.array2string(self.probs, precision=4)})"

    @classmethod
    def uniform(cls, n: int) -> "TopicDistribution":
        return cls(np.full(n, 1.0 / n))

    def smoothed(self, eps: float) -> np.ndarray:
        """Entries floored by ``eps`` and renormalised (plain array)."""
        if eps == 0:
            return np.array(self.probs)
        p = self.probs + eps
        return p / p.sum()


class TransitionMatrix:
    """Row-stochastic N x N matrix; row = source topic, column = destination."""

    __slots__ = ("rows",)

    def __init__(self, rows: Sequence[Sequence[float]] | np.ndarray, check: bool = True, tol: float = SUM_TOL):
        m = np.asarray(rows, dtype=float)
        if check:
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise InvalidInput(f"transition matrix must be square, got shape {m.shape}")
            if not np.all(np.isfinite(m)):
                raise InvalidInput("transition matrix has non-finite entries")
            if np.any(m < 0):
                raise InvalidInput("transition matrix has negative entries")
            dev = np.abs(m.sum(axis=1) - 1.0).max()
            if dev > tol:
                raise InvalidInput(f"transition matrix rows deviate from 1 by {dev:.3g}")
        object.__setattr__(self, "rows", _frozen(m))

    def __setattr__(self, name, value):
        raise AttributeError("TransitionMatrix is immutable")

    @property
    def n_topics(self) -> int:
        return int(self.rows.shape[0])

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.rows, dtype=dtype)

    def __repr__(self) -> str:
        return f"TransitionMatrix(n={self.n_topics})"

    def tolist(self) -> list[list[float]]:
        return self.rows.tolist()


@dataclass(frozen=True)
class QcaTriplet:
    id: str
    p_q: TopicDistribution
    p_c: TopicDistribution
    p_a: TopicDistribution
    metadata: Mapping[str, str] = field(default_factory=dict)

    @property
    def n_topics(self) -> int:
        return self.p_c.n_topics

    @classmethod
    def from_arrays(cls, id: str, p_q, p_c, p_a, metadata=None, check: bool = True) -> "QcaTriplet":
        return cls(
            id=id,
            p_q=TopicDistribution(p_q, check=check),
            p_c=TopicDistribution(p_c, check=check),
            p_a=TopicDistribution(p_a, check=check),
            metadata=dict(metadata or {}),
        )

    def permuted(self, perm: Sequence[int]) -> "QcaTriplet":
        perm = np.asarray(perm)
        return QcaTriplet(
            id=self.id,
            p_q=TopicDistribution(self.p_q.probs[perm]),
            p_c=TopicDistribution(self.p_c.probs[perm]),
            p_a=TopicDistribution(self.p_a.probs[perm]),
            metadata=dict(self.metadata),
        )


@dataclass(frozen=True)
class SolverConfig:
    tol_outer: float = 1e-9
    tol_inner: float = 1e-12
    max_outer_iters: int = 500
    max_inner_iters: int = 20000
    epsilon_smooth: float = 1e-12
    report_units: Units = "bits"
    # max absolute marginal / row-sum violation accepted from an inner solve
    feasibility_tol: float = 1e-9

    def __post_init__(self):
        if not (self.tol_outer > 0 and self.tol_inner > 0 and self.feasibility_tol > 0):
            raise InvalidInput("tolerances must be positive")
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            raise InvalidInput("iteration budgets must be positive")
        if not (0.0 <= self.epsilon_smooth <= 1e-6):
            raise InvalidInput("epsilon_smooth must lie in [0, 1e-6]")
        if self.report_units not in ("bits", "nats"):
            raise InvalidInput(f"unknown units {self.report_units!r}")

    def as_dict(self) -> dict:
        return {
            "tol_outer": self.tol_outer,
            "tol_inner": self.tol_inner,
            "max_outer_iters": self.max_outer_iters,
            "max_inner_iters": self.max_inner_iters,
            "epsilon_smooth": self.epsilon_smooth,
            "report_units": self.report_units,
            "feasibility_tol": self.feasibility_tol,
        }


def to_units(value_nats: float, units: Units) -> float:
    return value_nats / math.log(2) if units == "bits" else value_nats


def shannon_entropy(p: TopicDistribution | np.ndarray, units: Units = "bits") -> float:
    """-sum p log p with 0 log 0 = 0."""
    x = np.asarray(p, dtype=float)
    nz = x[x > 0]
    h = float(-(nz * np.log(nz)).sum())
    # -0.0 and tiny negative rounding on degenerate inputs
    h = max(h, 0.0)
    return to_units(h, units)


def kl_conditional(A, Q, p_c) -> float:
    """Context-weighted KL divergence ``sum_i p_c[i] KL(A[i] || Q[i])`` in nats.

    Raises AbsoluteContinuityViolation if some ``p_c[i] * A[i, j] > 0`` has
    ``Q[i, j] == 0``.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    w = np.asarray(p_c, dtype=float)
    if A.shape != Q.shape or A.shape[0] != w.size:
        raise InvalidInput(f"shape mismatch: A{A.shape}, Q{Q.shape}, p_c({w.size},)")
    mass = w[:, None] * A
    support = mass > 0
    if np.any(support & (Q <= 0)):
        i, j = np.argwhere(support & (Q <= 0))[0]
        raise AbsoluteContinuityViolation(f"Q[{i},{j}] = 0 where p_c[{i}] * A[{i},{j}] > 0")
    ratio = np.ones_like(A)
    ratio[support] = A[support] / Q[support]
    return float(np.sum(mass[support] * np.log(ratio[support])))


def _distribution_findings(name: str, p: TopicDistribution) -> list[str]:
    x = p.probs
    out = []
    if x.size == 0:
        return [f"{name}: empty distribution"]
    if not np.all(np.isfinite(x)):
        out.append(f"{name}: non-finite entries")
        return out
    if np.any(x < 0):
        idx = np.flatnonzero(x < 0).tolist()
        out.append(f"{name}: negative entries at indices {idx}")
    s = float(x.sum())
    if abs(s - 1.0) > SUM_TOL:
        out.append(f"{name}: sums to {s:.12g} (deviation {abs(s - 1.0):.3g})")
    return out


def validate_triplet(t: QcaTriplet) -> list[str]:
    """Return one human-readable finding per violated invariant (empty if valid)."""
    findings = []
    for name in ("p_q", "p_c", "p_a"):
        findings.extend(_distribution_findings(name, getattr(t, name)))
    sizes = {name: getattr(t, name).n_topics for name in ("p_q", "p_c", "p_a")}
    if len(set(sizes.values())) > 1:
        detail = ", ".join(f"{k}={v}" for k, v in sizes.items())
        findings.append(f"dimension mismatch: {detail}")
    return findings


def from_cluster_counts(counts: Sequence[int], n_topics: int) -> TopicDistribution:
    """Normalise per-topic sentence counts into a topic distribution."""
    c = np.asarray(counts)
    if c.ndim != 1 or c.size != n_topics:
        raise InvalidInput(f"expected {n_topics} counts, got {c.size}")
    if not np.issubdtype(c.dtype, np.integer):
        if not np.all(np.mod(c, 1) == 0):
            raise InvalidInput("counts must be integers")
        c = c.astype(np.int64)
    if np.any(c < 0):
        raise InvalidInput("counts must be non-negative")
    total = int(c.sum())
    if total == 0:
        raise EmptyText("all cluster counts are zero")
    return TopicDistribution(c / total)
