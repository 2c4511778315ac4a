"""Static SVG line plots of emitted tables (deterministic output)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def line_plot(path: Path, x, ys: dict, xlabel: str, ylabel: str, logx: bool = False,
              logy: bool = False, title: str = "") -> Path:
    """One SVG with a line per entry of ``ys``; no timestamps, fixed hash salt."""
    with plt.rc_context({"svg.hashsalt": "legendrian-lab", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for label, y in ys.items():
            ax.plot(x, y, marker="o", ms=3, label=label)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(ys) > 1:
            ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return Path(path)
