"""Figures for rate fits and bound comparisons (written next to the delimited outputs)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiments import BoundComparison  # noqa: E402
from .records import RateFit  # noqa: E402

plt.rcParams.update({
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.4,
    "grid.linewidth": 0.5,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "savefig.bbox": "tight",
})


def rate_figure(fit: RateFit, path, title: str = "") -> Path:
    """Left: ``W_p`` against ``n`` on log axes with a slope -1/2 guide.  Right: ``sqrt(n) W_p``."""
    recs = fit.records
    n = np.array([r.n for r in recs], dtype=float)
    w = np.array([r.wp_estimate for r in recs])
    se = np.array([r.std_error if r.std_error is not None else np.nan for r in recs])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.2))

    ax1.loglog(n, w, "o-", ms=4, label=f"estimate (slope {fit.fitted_slope:.3f})")
    ax1.loglog(n, w[-1] * np.sqrt(n[-1] / n), "k--", lw=0.8, label="slope -1/2")
    ax1.set_xlabel("n")
    ax1.set_ylabel("W_p")
    ax1.legend()

    scaled = np.sqrt(n) * w
    if np.any(np.isfinite(se)):
        ax2.errorbar(n, scaled, yerr=2 * np.sqrt(n) * np.nan_to_num(se), fmt="o-", ms=4, capsize=2, label="sqrt(n) W_p")
    else:
        ax2.plot(n, scaled, "o-", ms=4, label="sqrt(n) W_p")
    ax2.set_xscale("log", base=2)
    ax2.axhline(fit.fitted_constant, color="C1", lw=0.8, label=f"plateau {fit.fitted_constant:.4f}")
    colors = iter(["C2", "C3", "C4", "C5"])
    for key in ("corollary_constant", "lattice_printed", "lattice_regrouped", "lattice_quoted_lower_bound"):
        if key in fit.extras:
            ax2.axhline(fit.extras[key], color=next(colors), ls=":", lw=1.0, label=f"{key} {fit.extras[key]:.4f}")
    ax2.set_xlabel("n")
    ax2.legend(fontsize=7)
    if title:
        fig.suptitle(title)
    out = Path(path).with_suffix(".png")
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def bound_figure(cmp: BoundComparison, path, title: str = "") -> Path:
    """Bound terms and total against ``n`` with the empirical estimate overlaid."""
    rows = [r for r in cmp.rows if r.get("status") == "ok"]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    if rows:
        n = np.array([r["n"] for r in rows], dtype=float)
        for key in ("term_leading", "term_lattice", "term_mixed", "term_tail"):
            vals = np.array([r[key] for r in rows])
            if np.any(vals > 0):
                ax.plot(n, np.where(vals > 0, vals, np.nan), "-", lw=1.0, label=key)
        ax.plot(n, [r["total"] for r in rows], "C7-", lw=2.0, label="total")
        ax.plot(n, [r["wp"] for r in rows], "ko-", ms=3, label="empirical W_p")
        ax.set_xscale("log", base=2)
        ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.legend(fontsize=7)
    if title:
        ax.set_title(title)
    out = Path(path).with_suffix(".png")
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
