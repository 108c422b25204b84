import json

import numpy as np
import pytest

from semfaith import plotting
from semfaith.cache import ResultCache, cache_key
from semfaith.core import QcaTriplet, SolverConfig
from semfaith.synthetic import SynthConfig, run_study

T = QcaTriplet.from_arrays("a", [0.2, 0.8], [0.5, 0.5], [0.4, 0.6], metadata={"k": "v"})


def test_key_ignores_id_metadata_and_units():
    other = QcaTriplet.from_arrays("b", [0.2, 0.8], [0.5, 0.5], [0.4, 0.6], metadata={"k": "w"})
    assert cache_key(T, SolverConfig()) == cache_key(other, SolverConfig())
    assert cache_key(T, SolverConfig()) == cache_key(T, SolverConfig(report_units="nats"))


def test_key_covers_distributions_and_solver():
    base = cache_key(T, SolverConfig())
    assert base != cache_key(T, SolverConfig(tol_outer=1e-8))
    assert base != cache_key(T, SolverConfig(epsilon_smooth=0.0))
    moved = QcaTriplet.from_arrays("a", [0.2, 0.8], [0.5, 0.5], [0.4 + 1e-12, 0.6 - 1e-12])
    assert base != cache_key(moved, SolverConfig())
    assert len(base) == 64 and base == cache_key(T, SolverConfig())


def test_cache_round_trip(tmp_path):
    c = ResultCache(tmp_path)
    assert c.get("k") is None
    c.put("k", {"x": 0.1, "m": [[1.0]]})
    assert c.get("k") == {"x": 0.1, "m": [[1.0]]}


def test_cache_rejects_mismatched_entry(tmp_path, caplog):
    c = ResultCache(tmp_path)
    (tmp_path / "k.json").write_text(json.dumps({"key": "other", "values": {}}))
    assert c.get("k") is None
    assert "recomputing" in caplog.text


@pytest.mark.skipif(not plotting.available(), reason="matplotlib not installed")
def test_study_figures_are_reproducible(tmp_path):
    rep = run_study(SynthConfig(n_triplets=5, n_topics=4))
    a = plotting.study_figures(rep, tmp_path / "a")
    b = plotting.study_figures(rep, tmp_path / "b")
    assert [p.name for p in a] == ["fs_vs_sep.png", "sep_components.png", "hq_vs_fs.png"]
    for pa, pb in zip(a, b):
        assert pa.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
        assert pa.read_bytes() == pb.read_bytes()


@pytest.mark.skipif(not plotting.available(), reason="matplotlib not installed")
def test_triplet_figures(tmp_path):
    m = {"q_star": np.eye(2), "a_star": np.eye(2), "a_reverse": np.eye(2)}
    paths = plotting.triplet_figures("x/y", [0.5, 0.5], [0.2, 0.8], [1.0, 0.0], m, tmp_path)
    assert sorted(p.name for p in paths) == ["x_y_marginals.png", "x_y_matrices.png"]
    assert all(p.stat().st_size > 0 for p in paths)
