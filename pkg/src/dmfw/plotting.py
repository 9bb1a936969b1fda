"""Static figures of seed-averaged metric curves."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden_mean = (np.sqrt(5) - 1.0) / 2.0
fig_width = 7.1

params = {
    "axes.labelsize": 9,
    "font.size": 8,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.1,
    "svg.hashsalt": "dmfw",  # stable ids so repeated runs write identical files
}

PANELS = (
    ("fw_gap", "FW-gap $g_k$"),
    ("subopt", r"$F(\bar x_k) - F^*$"),
    ("consensus_err", r"$\max_i \|\hat x_k^i - \bar x_k\|$"),
    ("tracking_err_sq", r"$\|\bar P_k - \bar y_k\|^2$"),
)

COLORS = {"dmfw": "#08589e", "mshfw": "#e34a33", "sfw": "#31a354", "defw": "#756bb1"}


def _series(rows, algo, col):
    sel = [r for r in rows if r["algorithm"] == algo]
    k = np.array([r["k"] for r in sel], dtype=float)
    mean = np.array([r[f"{col}_mean"] for r in sel], dtype=float)
    std = np.array([r[f"{col}_std"] for r in sel], dtype=float)
    return k, mean, std


def plot_summary(per_k_rows, outdir, stem="metrics", fmt="svg"):
    """Four log-log panels, one curve per algorithm with a +-1 std band.

    Returns the written path, or ``None`` when there is nothing to draw.
    """
    if not per_k_rows:
        return None
    algos = list(dict.fromkeys(r["algorithm"] for r in per_k_rows))
    with plt.rc_context(params):
        fig, axes = plt.subplots(2, 2, figsize=(fig_width, fig_width * golden_mean))
        for ax, (col, label) in zip(axes.flat, PANELS):
            drawn = False
            for algo in algos:
                k, mean, std = _series(per_k_rows, algo, col)
                ok = np.isfinite(mean) & (mean > 0)
                if not ok.any():
                    continue
                c = COLORS.get(algo)
                ax.plot(k[ok], mean[ok], color=c, label=algo.upper())
                lo = np.clip(mean - std, mean * 1e-3, None)
                ax.fill_between(k[ok], lo[ok], (mean + std)[ok], color=c, alpha=0.15, linewidth=0)
                drawn = True
            if drawn:
                ax.set_xscale("log")
                ax.set_yscale("log")
                ax.legend(frameon=False)
            else:
                ax.text(0.5, 0.5, "n/a", ha="center", va="center", transform=ax.transAxes)
            ax.set_xlabel("iteration $k$")
            ax.set_ylabel(label)
        fig.tight_layout()
        path = Path(outdir) / f"{stem}.{fmt}"
        fig.savefig(path, metadata={"Date": None} if fmt == "svg" else None)
        plt.close(fig)
    return path
