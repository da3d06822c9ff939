"""Figures written next to the CSV/JSON reports (Agg backend, PNG files)."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden = (np.sqrt(5) - 1.0) / 2.0
fig_width = 5.0
STYLE = {
    "figure.figsize": (fig_width, fig_width * golden),
    "figure.dpi": 100,
    "savefig.dpi": 120,
    "font.size": 8,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "lines.linewidth": 1.0,
    "lines.markersize": 3,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "lindyn",
}
# strip the version string from PNG metadata so files depend only on their content
_META = {"Software": None}


def _save(fig, path: Path) -> str:
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path.name


def density_figure(path, curves: Sequence, title: str = "") -> str:
    """Density curves (N on a log axis) with their estimates in the legend."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for c in curves:
            ax.semilogx(c.Ns, c.values, marker="o" if len(c.Ns) < 64 else None,
                        label=f"{c.label} (est {c.estimate:.4g})")
        ax.set_xlabel("window length N")
        ax.set_ylabel("density")
        ax.set_ylim(-0.02, 1.02)
        ax.set_title(title)
        ax.legend(loc="best")
        return _save(fig, Path(path))


def return_raster(path, cells: Sequence[dict], horizon: int, title: str = "") -> str:
    """One row per grid cell, a tick at every return time."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(fig_width, max(1.5, 0.22 * len(cells) + 0.8)))
        for row, cell in enumerate(cells):
            elems = np.asarray(cell["returns"])
            ax.plot(elems, np.full(len(elems), row), "|", markersize=4, color="C0")
        ax.set_yticks(range(len(cells)))
        ax.set_yticklabels([f"k0={c['k0']}, eps={c['eps']:.3g}" for c in cells])
        ax.set_xlim(0, horizon)
        ax.set_xlabel("n")
        ax.set_title(title)
        ax.grid(False)
        return _save(fig, Path(path))


def coordinate_figure(path, values: np.ndarray, title: str = "", max_points: int = 4096) -> str:
    """Stem-like plot of the first coordinates of a vector."""
    v = np.real(np.asarray(values[:max_points]))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.vlines(np.arange(1, len(v) + 1), 0, v, linewidth=0.6)
        ax.set_xlabel("j")
        ax.set_ylabel("x_j")
        ax.set_title(title)
        return _save(fig, Path(path))


def mass_figure(path, components: Sequence[dict], title: str = "") -> str:
    """Ball mass against witnessed window density per basis neighbourhood."""
    idx = np.arange(len(components))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.bar(idx - 0.2, [c["witness_density"] for c in components], 0.4, label="window density")
        ax.bar(idx + 0.2, [c["ball_mass_float"] for c in components], 0.4, label="ball mass")
        ax.set_xticks(idx)
        ax.set_xticklabels([f"{c['k0']}/{c['eps']:.2g}" for c in components], rotation=45)
        ax.set_xlabel("k0 / eps")
        ax.set_title(title)
        ax.legend(loc="best")
        return _save(fig, Path(path))
