"""Matplotlib renderings saved next to the delimited reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .learn import LearnDiagnostics
from .metrics import MatchReport
from .model import Dictionary


def save_diagnostics_figure(diag: LearnDiagnostics, path) -> None:
    """Objective and dictionary-change curves over outer iterations."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.2))
    it = np.arange(1, diag.n_iters + 1)
    axes[0].plot(it, diag.objective, "o-", ms=3)
    axes[0].set_xlabel("outer iteration")
    axes[0].set_ylabel("objective")
    axes[0].set_yscale("log")
    axes[1].plot(it, diag.rel_dict_change, "o-", ms=3, color="tab:orange")
    axes[1].set_xlabel("outer iteration")
    axes[1].set_ylabel("relative dictionary change")
    axes[1].set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_match_figure(report: MatchReport, learned: Dictionary,
                      truth: Dictionary, path, max_pairs: int = 16) -> None:
    """Matched learned/true trace pairs overlaid, one panel per pair."""
    pairs = report.assignment[:max_pairs]
    n = len(pairs)
    if n == 0:
        return
    ncols = min(4, n)
    nrows = -(-n // ncols)
    fig, axes = plt.subplots(nrows, ncols, figsize=(3.2 * ncols, 1.9 * nrows),
                             squeeze=False, sharex=True)
    for idx, (a, b) in enumerate(pairs):
        ax = axes[idx // ncols][idx % ncols]
        lt = learned.traces[:, a]
        tt = truth.traces[:, b]
        ax.plot(tt / (np.abs(tt).max() or 1.0), color="k", lw=0.8, label="true")
        ax.plot(lt / (np.abs(lt).max() or 1.0), color="tab:green", lw=0.8,
                alpha=0.8, label="learned")
        ax.set_title(f"{a}->{b}  r={report.trace_correlations[idx]:.3f}",
                     fontsize=8)
        ax.tick_params(labelsize=6)
    for idx in range(n, nrows * ncols):
        axes[idx // ncols][idx % ncols].axis("off")
    axes[0][0].legend(fontsize=6, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
