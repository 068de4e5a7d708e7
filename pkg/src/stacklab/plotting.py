"""Matplotlib figures for the sweep curves; written to files, never shown."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {"figure.dpi": 120, "axes.grid": True, "grid.alpha": 0.3, "axes.spines.top": False, "axes.spines.right": False}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_loss_curve(rows, path, title=None):
    """Leader cost under both plans (left) and their gap (right) against n.

    ``rows`` are dicts with keys ``n, j_leader_opt, j_leader_major, loss``.
    """
    n = np.array([r["n"] for r in rows])
    with plt.rc_context(STYLE):
        fig, (ax, ax_loss) = plt.subplots(1, 2, figsize=(9, 3.6))
        ax.plot(n, [r["j_leader_major"] for r in rows], "o-", ms=3, label="leader-major optimal")
        ax.plot(n, [r["j_leader_opt"] for r in rows], "s-", ms=3, label="leader optimal")
        ax.set_xlabel("number of minor followers N")
        ax.set_ylabel("leader's expected cost")
        ax.legend(frameon=False)
        ax_loss.plot(n, [r["loss"] for r in rows], "o-", ms=3, color="C3")
        ax_loss.set_xlabel("number of minor followers N")
        ax_loss.set_ylabel("performance loss")
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def plot_gain_growth(rows, path, fit=None, title=None):
    """``|gain|`` against n on log-log axes, with the fitted power law if given."""
    n = np.array([r["n"] for r in rows], dtype=float)
    g = np.abs([r["gain"] for r in rows])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.6))
        ax.loglog(n, g, "o-", ms=4, label="|gain|")
        if fit is not None:
            ax.loglog(n, fit.constant * n**fit.slope, "--", color="0.4",
                      label=f"fit: slope {fit.slope:.3f} ({fit.verdict})")
        ax.set_xlabel("N")
        ax.set_ylabel("|incentive gain|")
        ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_parameters(rows, names, path, title=None):
    """One line per coefficient in ``names`` against n (log x-axis when the grid spans decades)."""
    n = np.array([r["n"] for r in rows], dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.6))
        for name in names:
            ax.plot(n, [r[name] for r in rows], "o-", ms=3, label=name)
        if n.min() > 0 and n.max() / n.min() >= 100:
            ax.set_xscale("log")
        ax.set_xlabel("N")
        ax.set_ylabel("coefficient")
        ax.legend(frameon=False, ncol=2)
        if title:
            ax.set_title(title)
        return _save(fig, path)
