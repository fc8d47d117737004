"""Static PNG figures rendered from the same arrays that go into the CSVs."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str | None = None
    color: str | None = None
    style: str = "-"


@dataclass
class Panel:
    xlabel: str
    ylabel: str
    series: list[Series] = field(default_factory=list)
    title: str | None = None
    logx: bool = False
    xlim: tuple[float, float] | None = None

    def add(self, x, y, label=None, color=None, style="-") -> "Panel":
        self.series.append(Series(np.asarray(x), np.asarray(y), label, color, style))
        return self


def render(path, panels: list[Panel], suptitle: str | None = None,
           ncols: int | None = None) -> Path:
    """Draw panels on a grid and save as PNG."""
    n = len(panels)
    ncols = ncols or (2 if n > 1 else 1)
    nrows = int(np.ceil(n / ncols))
    fig, axes = plt.subplots(nrows, ncols, figsize=(5.0 * ncols, 3.6 * nrows), squeeze=False)
    for ax, panel in zip(axes.flat, panels):
        for s in panel.series:
            ax.plot(s.x, s.y, s.style, color=s.color, label=s.label, lw=1.2, ms=4)
        ax.set_xlabel(panel.xlabel)
        ax.set_ylabel(panel.ylabel)
        if panel.title:
            ax.set_title(panel.title, fontsize=10)
        if panel.logx:
            ax.set_xscale("log")
        if panel.xlim:
            ax.set_xlim(*panel.xlim)
        if any(s.label for s in panel.series):
            ax.legend(fontsize=8, frameon=False)
        ax.grid(alpha=0.3)
    for ax in list(axes.flat)[n:]:
        ax.set_visible(False)
    if suptitle:
        fig.suptitle(suptitle)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path
