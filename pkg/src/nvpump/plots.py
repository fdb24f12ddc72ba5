"""Self-contained SVG line plots for the sweep and protocol datasets."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "nvpump"

import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["line_plot"]

_LEVEL_STYLES = ["-", "--", "-.", ":"]


def line_plot(path, x, series, xlabel: str, ylabel: str,
              logx: bool = False, logy: bool = False,
              title: str | None = None) -> None:
    """Write one figure with the given (label, y) series to an SVG file.

    The output embeds no external assets and carries no timestamp, so
    repeated runs produce stable files.
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for i, (label, y) in enumerate(series):
        ax.plot(x, y, _LEVEL_STYLES[i % len(_LEVEL_STYLES)], label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
