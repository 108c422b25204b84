"""Semantic Faithfulness and Semantic Entropy Production scores for
question/context/answer topic distributions."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    QcaTriplet,
    SolverConfig,
    TopicDistribution,
    TransitionMatrix,
    from_cluster_counts,
    kl_conditional,
    shannon_entropy,
    validate_triplet,
)
from .sep_solver import SepResult, solve_sep  # noqa: E402
from .sf_solver import SfResult, solve_sf  # noqa: E402

__all__ = [
    "QcaTriplet",
    "SolverConfig",
    "TopicDistribution",
    "TransitionMatrix",
    "from_cluster_counts",
    "kl_conditional",
    "shannon_entropy",
    "validate_triplet",
    "SepResult",
    "SfResult",
    "solve_sep",
    "solve_sf",
]
