"""Decay-curve figures written to SVG or PNG."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .decay import DecayCurve  # noqa: E402


def plot_decay(curve: DecayCurve | None, points, path, reference=None, title: str | None = None) -> None:
    """Scatter of (F_ST, rho), LOESS curve with its 95% band, dashed linear fit and labelled reference points.

    ``reference`` is an iterable of ``(label, fst, rho)``; rows with a
    missing rho are skipped. Output is deterministic for a given input.
    """
    pts = list(points)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    if pts:
        ax.scatter([p.fst for p in pts], [p.rho for p in pts], s=6, color="0.55", alpha=0.6,
                   linewidths=0, label="resampled splits")
    if curve is not None and curve.loess is not None:
        ax.fill_between(curve.grid, curve.lower, curve.upper, color="tab:blue", alpha=0.2, linewidth=0)
        ax.plot(curve.grid, curve.mean, color="tab:blue", label="LOESS")
        ax.plot(curve.grid, curve.rho_l(curve.grid), color="tab:red", linestyle="--", label="linear")
    for label, fst, rho in reference or ():
        if rho is None or not np.isfinite(rho):
            continue
        ax.plot([fst], [rho], marker="o", color="black", markersize=4)
        ax.annotate(str(label), (fst, rho), textcoords="offset points", xytext=(4, 4), fontsize=7)
    ax.set_xlabel("F_ST")
    ax.set_ylabel("predictive correlation")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8, frameon=False)
    fig.tight_layout()
    with plt.rc_context({"svg.hashsalt": "decaykit", "svg.fonttype": "none"}):
        fig.savefig(path, metadata=_metadata(path))
    plt.close(fig)


def _metadata(path) -> dict:
    s = str(path).lower()
    if s.endswith(".svg"):
        return {"Date": None, "Creator": None}
    if s.endswith(".png"):
        return {"Software": None}
    if s.endswith(".pdf"):
        return {"CreationDate": None, "Creator": None, "Producer": None}
    return {}
