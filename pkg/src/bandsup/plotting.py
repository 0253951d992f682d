"""Static figures from tidy ``(figure, series, x, y)`` records, rendered off-screen."""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def render_figure(path, records, title: str = "", xlabel: str = "x", ylabel: str = "y",
                  logy: bool = False, markers: bool = True):
    """One axes per distinct ``figure`` value, one line per ``series``."""
    panels = defaultdict(lambda: defaultdict(list))
    for fig_name, series, x, y in records:
        panels[fig_name][series].append((float(x), float(y)))
    names = sorted(panels)
    fig, axes = plt.subplots(1, max(1, len(names)), figsize=(5.0 * max(1, len(names)), 4.0),
                             squeeze=False)
    for ax, name in zip(axes[0], names):
        for series in sorted(panels[name]):
            pts = sorted(panels[name][series])
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o" if markers else None,
                    ms=3, lw=1.2, label=series)
        ax.set_title(name if len(names) > 1 or not title else title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if logy:
            ax.set_yscale("log")
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
    if title and len(names) > 1:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path
