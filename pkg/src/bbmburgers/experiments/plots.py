"""Static SVG charts of log-norms against time."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping

import numpy as np


def log_norm_svg(series: Mapping[str, tuple[Any, Any]], path: str | Path, ylabel: str = "norm") -> None:
    """Semilog line chart, one line per entry; non-positive values are dropped."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, (x, y) in series.items():
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        keep = y > 0
        ax.semilogy(x[keep], y[keep], label=label, linewidth=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    if series:
        ax.legend()
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": "bbm"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
