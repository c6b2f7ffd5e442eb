"""Figure rendering for the report paths of the command-line tools.

Every report command writes its delimited output first; these helpers render
the companion plots (gain curves, error curves, residual history, error
versus order) to image files next to it.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finite(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = np.isfinite(y)
    return x[mask], y[mask]


def save_gain_figure(path, grid, gain_full, gain_reduced, title=None):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.loglog(*_finite(grid.points, gain_full), label="full model")
    ax.loglog(*_finite(grid.points, gain_reduced), "--", label="reduced model")
    ax.set_xlabel(r"frequency $\omega$ (rad/s)")
    ax.set_ylabel(r"$\|H(j\omega)\|_2$")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_error_figure(path, grid, errors, title=None):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    x, y = _finite(grid.points, errors)
    positive = y > 0
    if positive.any():
        ax.loglog(x[positive], y[positive])
    else:
        ax.semilogx(x, y)
    ax.set_xlabel(r"frequency $\omega$ (rad/s)")
    ax.set_ylabel(r"$\|H(j\omega) - H_m(j\omega)\|_2$")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_history_figure(path, history, title=None):
    iters = [rec.iteration for rec in history]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.semilogy(iters, [max(rec.res_right, 1e-300) for rec in history],
                marker="o", label="right residual")
    ax.semilogy(iters, [max(rec.res_left, 1e-300) for rec in history],
                marker="s", label="left residual")
    ax.set_xlabel("iteration")
    ax.set_ylabel("residual norm")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_compare_figure(path, m_values, errors, title=None):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.semilogy(m_values, [max(e, 1e-300) for e in errors], marker="o")
    ax.set_xlabel("iterations m")
    ax.set_ylabel("sampled worst-case error")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
