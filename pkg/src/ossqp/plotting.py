"""Figures for the solve and estimate reports.

Figures are built on the Agg canvas directly so that nothing touches the
pyplot state machine or needs a display.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

GRID_KWARGS = dict(linestyle="-", color="black", linewidth=0.5, alpha=0.3)
BOUND_KWARGS = dict(linestyle="--", color="black", linewidth=1.0)
FIGSIZE = (6.4, 6.8)
DPI = 110


def _new_figure(nrows: int):
    fig = Figure(figsize=FIGSIZE, dpi=DPI)
    FigureCanvasAgg(fig)
    axes = fig.subplots(nrows, 1, sharex=True)
    for ax in axes:
        ax.grid(True, **GRID_KWARGS)
        ax.spines["right"].set_visible(False)
        ax.spines["top"].set_visible(False)
    return fig, axes


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    # No Software / date metadata so reruns write identical bytes.
    fig.savefig(path, metadata={"Software": None})
    return path


def plot_solve_trace(traces: Sequence, path, theta: float | None = None, delta: float | None = None) -> Path:
    """Three panels over k: mu and gap, neighborhood ratio, OSS residual ratio."""
    if len(traces) == 0:
        raise ValueError("nothing to plot")
    k = np.array([t.k for t in traces])
    mu = np.array([t.mu for t in traces])
    gap = np.array([t.gap for t in traces])
    dist = np.array([t.neighborhood_distance for t in traces])
    res = np.array([t.residual_norm / t.rc_norm if t.rc_norm > 0 else 0.0 for t in traces])

    fig, (ax0, ax1, ax2) = _new_figure(3)
    ax0.semilogy(k, gap, label="gap $x^Ts$")
    ax0.semilogy(k, mu, label=r"$\mu$")
    ax0.legend(loc="best", frameon=False)
    ax0.set_ylabel("duality measure")

    if theta is not None:
        ax1.plot(k, dist / (theta * mu))
        ax1.axhline(1.0, **BOUND_KWARGS)
        ax1.set_ylabel(r"$\|XSe-\mu e\| / \theta\mu$")
    else:
        ax1.plot(k, dist / mu)
        ax1.set_ylabel(r"$\|XSe-\mu e\| / \mu$")

    ax2.plot(k, res)
    if delta is not None:
        ax2.axhline(delta, **BOUND_KWARGS)
    ax2.set_ylabel(r"$\|r\| / \|r_c\|$")
    ax2.set_xlabel("iteration $k$")
    return _save(fig, path)


def plot_cost_report(report, path) -> Path:
    """Three panels over k: kappa_M against its bound, omega/|M|_F, unit cost."""
    rows = report.rows
    if len(rows) == 0:
        raise ValueError("nothing to plot")
    k = np.array([r.k for r in rows])
    fig, (ax0, ax1, ax2) = _new_figure(3)
    ax0.semilogy(k, [r.kappa_M for r in rows], label=r"$\kappa_M$")
    ax0.semilogy(k, [r.kappa_bound for r in rows], label="bound")
    ax0.legend(loc="best", frameon=False)
    ax0.set_ylabel("condition number")

    ax1.plot(k, [r.omega_ratio for r in rows])
    ax1.axhline(2.0, **BOUND_KWARGS)
    ax1.set_ylabel(r"$\omega / \|M\|_F$")

    ax2.semilogy(k, [r.iter_cost_units for r in rows], label="iteration")
    ax2.axhline(report.theorem1_bound_units, label="theorem bound", **BOUND_KWARGS)
    ax2.legend(loc="best", frameon=False)
    ax2.set_ylabel("units")
    ax2.set_xlabel("iteration $k$")
    return _save(fig, path)
