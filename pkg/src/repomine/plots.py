"""Static SVG charts rendered from the study tables."""

from __future__ import annotations

import os
from typing import Mapping, Optional, Sequence

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402

_RC = {
    "svg.hashsalt": "repomine",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.figsize": (6.0, 3.6),
}


def _save(fig, path: str, meta: Optional[str]) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    metadata = {"Date": None, "Creator": "repomine"}
    if meta:
        metadata["Description"] = meta
    fig.savefig(path, format="svg", metadata=metadata)
    plt.close(fig)
    return path


def series_chart(path: str, title: str, series: Mapping[str, Sequence[float]],
                 xlabel: str = "window", ylabel: str = "", meta: Optional[str] = None) -> str:
    """One line per variant over window indices."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for name in sorted(series):
            ys = list(series[name])
            ax.plot(range(len(ys)), ys, marker="o", markersize=3, linewidth=1.2, label=name)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if series:
            ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path, meta)


def hierarchy_scatter(path: str, rows: Sequence[tuple[int, float, str]], title: str = "",
                      meta: Optional[str] = None) -> str:
    """Clustering against degree on log-log axes, coloured by role."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for role, colour in (("core", "tab:red"), ("peripheral", "tab:blue"), ("", "tab:gray")):
            pts = [(d, c) for d, c, r in rows if r == role and c > 0]
            if pts:
                ax.scatter([p[0] for p in pts], [p[1] for p in pts], s=12, c=colour,
                           label=role or "unclassified", alpha=0.7)
        if any(c > 0 for _, c, _ in rows):
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlabel("degree")
        ax.set_ylabel("clustering coefficient")
        ax.set_title(title)
        if rows:
            ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path, meta)


def regression_chart(path: str, xs: Sequence[float], ys: Sequence[float],
                     curves: Mapping[str, Sequence[float]], title: str = "",
                     xlabel: str = "team size (transformed)", ylabel: str = "",
                     meta: Optional[str] = None) -> str:
    """Observed points plus fitted polynomial curves given by coefficient lists."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.scatter(xs, ys, s=14, c="tab:gray", label="windows")
        if xs:
            lo, hi = min(xs), max(xs)
            grid = [lo + (hi - lo) * i / 50.0 for i in range(51)]
            for name in sorted(curves):
                coefs = curves[name]
                ax.plot(grid, [sum(c * x ** k for k, c in enumerate(coefs)) for x in grid],
                        linewidth=1.2, label=name)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path, meta)
