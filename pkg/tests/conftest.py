import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from semfaith.core import QcaTriplet

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# lines collected by test_acceptance.py and echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_triplet(rng, n, tid="t", alpha=1.0, floor=1e-3):
    """Full-support triplet with every entry at least ``floor`` before renormalising."""
    p = rng.dirichlet(np.full(n, alpha), size=3) + floor
    p /= p.sum(axis=1, keepdims=True)
    return QcaTriplet.from_arrays(tid, p[0], p[1], p[2])


def perturbed_feasible(rng, w, m, spread=0.5):
    """Row-stochastic X with w^T X = m, away from the rank-one point ``1 m^T``."""
    n = len(m)
    base = np.tile(m, (n, 1))
    G = rng.normal(size=(n, n))
    D = (np.eye(n) - np.outer(np.ones(n), w)) @ G @ (np.eye(n) - np.full((n, n), 1.0 / n))
    with np.errstate(divide="ignore", invalid="ignore"):
        room = np.where(D < 0, base / -D, np.inf).min()
    return base + spread * min(room, 1e6) * D


@st.composite
def distributions(draw, n, min_value=1e-3):
    w = draw(st.lists(st.floats(min_value, 1.0), min_size=n, max_size=n))
    p = np.asarray(w)
    return p / p.sum()


@st.composite
def triplets(draw, min_n=1, max_n=6, min_value=1e-3):
    n = draw(st.integers(min_n, max_n))
    return QcaTriplet.from_arrays(
        "h",
        draw(distributions(n, min_value)),
        draw(distributions(n, min_value)),
        draw(distributions(n, min_value)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
