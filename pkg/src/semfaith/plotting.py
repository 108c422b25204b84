"""Matplotlib figures for ``semfaith synth`` and ``semfaith score --figures``.

Needs the optional ``plot`` extra. Figures are drawn on the Agg canvas
without touching pyplot global state, and PNGs are written with fixed
metadata so identical inputs give identical files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

try:
    from matplotlib.backends.backend_agg import FigureCanvasAgg
    from matplotlib.figure import Figure
except ImportError:  # pragma: no cover - exercised only without the extra
    Figure = None

# Software/date stamps would make the bytes depend on the matplotlib build
_PNG_META = {"Software": None}


def available() -> bool:
    return Figure is not None


def _require():
    if Figure is None:
        raise RuntimeError("figures need matplotlib; install the 'plot' extra: pip install artifact[plot]")


def _new(width=5.0, height=3.8, ncols=1):
    _require()
    fig = Figure(figsize=(width * ncols, height), dpi=100)
    FigureCanvasAgg(fig)
    axes = [fig.add_subplot(1, ncols, k + 1) for k in range(ncols)]
    return fig, axes


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_PNG_META)
    return path


def study_figures(report, out_dir) -> list[Path]:
    """Scatter of SEP against F_S, SEP components, and question entropy.

    Everything is plotted in nats so SEP and the naive curve share an axis.
    """
    out_dir = Path(out_dir)
    recs = report.records
    fs = np.array([r.f_s for r in recs])
    sep = np.array([r.sep_total for r in recs])
    paths = []

    fig, (ax,) = _new()
    ax.scatter(fs, sep, s=14, color="tab:blue", label="SEP")
    if report.naive_curve_points:
        curve = np.array(report.naive_curve_points)
        ax.plot(curve[:, 0], curve[:, 1], color="tab:gray", ls="--", lw=1, label="1/F_S - 1")
    if report.ols_slope is not None and fs.size:
        xs = np.linspace(fs.min(), fs.max(), 50)
        ax.plot(xs, report.ols_slope * xs + report.ols_intercept, color="tab:red", lw=1,
                label=f"OLS slope {report.ols_slope:.3g}")
    r = "absent" if report.pearson_r is None else f"{report.pearson_r:.3f}"
    ax.set_title(f"Pearson r = {r}", fontsize=10)
    ax.set_xlabel("F_S")
    ax.set_ylabel("entropy production [nats]")
    ax.legend(fontsize=8)
    paths.append(_save(fig, out_dir / "fs_vs_sep.png"))

    fig, (ax,) = _new()
    idx = np.array([r.index for r in recs])
    ax.plot(idx, [r.s_system for r in recs], ".", label="system change")
    ax.plot(idx, [r.s_medium for r in recs], ".", label="medium")
    ax.plot(idx, sep, ".", label="total")
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("triplet index")
    ax.set_ylabel("[nats]")
    ax.legend(fontsize=8)
    paths.append(_save(fig, out_dir / "sep_components.png"))

    fig, (ax,) = _new()
    ax.scatter([r.h_q for r in recs], fs, s=14, color="tab:green")
    ax.set_xlabel("H(p_q) [nats]")
    ax.set_ylabel("F_S")
    paths.append(_save(fig, out_dir / "hq_vs_fs.png"))
    return paths


def triplet_figures(tid: str, p_q, p_c, p_a, matrices: dict, out_dir) -> list[Path]:
    """Marginal bar chart and heatmaps of the solved transition matrices."""
    out_dir = Path(out_dir)
    safe = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in tid)
    paths = []

    fig, (ax,) = _new(width=6.0)
    n = len(p_q)
    x = np.arange(n)
    w = 0.27
    ax.bar(x - w, p_q, w, label="question")
    ax.bar(x, p_c, w, label="context")
    ax.bar(x + w, p_a, w, label="answer")
    ax.set_xlabel("topic")
    ax.set_ylabel("probability")
    ax.set_title(tid, fontsize=10)
    ax.legend(fontsize=8)
    paths.append(_save(fig, out_dir / f"{safe}_marginals.png"))

    names = [k for k in ("q_star", "a_star", "a_reverse") if k in matrices]
    if names:
        fig, axes = _new(width=3.6, height=3.4, ncols=len(names))
        for ax, name in zip(axes, names):
            im = ax.imshow(np.asarray(matrices[name]), vmin=0.0, vmax=1.0, cmap="viridis")
            ax.set_title(name, fontsize=9)
            ax.set_xticks([])
            ax.set_yticks([])
        fig.colorbar(im, ax=axes, shrink=0.8)
        # tight_layout does not cope with the shared colorbar
        out = out_dir / f"{safe}_matrices.png"
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, format="png", metadata=_PNG_META)
        paths.append(out)
    return paths
