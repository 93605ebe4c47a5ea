"""Figure rendering for completed runs (PNG files next to the CSV output)."""

from __future__ import annotations

import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .snapshots import load_series

__all__ = ["render_report"]


def _finite(t, y):
    m = np.isfinite(y)
    return t[m], y[m]


def render_report(run_dir: str):
    """Render conservation, entropy, distance and saturation figures."""
    series = load_series(os.path.join(run_dir, "series.csv"))
    meta_path = os.path.join(run_dir, "run.json")
    gamma = None
    if os.path.exists(meta_path):
        with open(meta_path) as fh:
            meta = json.load(fh)
        try:
            gamma = json.loads(meta["config"])["kernel"]["gamma"]
        except (KeyError, json.JSONDecodeError):
            gamma = None
    t = series["t"]
    written = []

    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
    for ax, (name, label) in zip(
        axes, [("rho", "mass"), ("E", "energy parameter"), ("ux", "bulk velocity x")]
    ):
        y = series[name]
        ax.plot(t, y - y[0], lw=1.2)
        ax.set_xlabel("t")
        ax.set_ylabel(f"{label} drift")
        ax.ticklabel_format(axis="y", style="sci", scilimits=(-2, 2))
    fig.tight_layout()
    path = os.path.join(run_dir, "conservation.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    tt, hh = _finite(t, series["H_rel"])
    pos = hh > 0
    if pos.any():
        ax.loglog(1.0 + tt[pos], hh[pos], "o-", ms=3, lw=1.0, label="relative entropy")
        if gamma:
            ref = hh[pos][0] * ((1.0 + tt[pos]) / (1.0 + tt[pos][0])) ** (-1.0 / gamma)
            ax.loglog(1.0 + tt[pos], ref, "--", lw=1.0,
                      label=f"(1+t)^(-1/{gamma:g}) envelope")
        ax.legend(fontsize=8)
    ax.set_xlabel("1 + t")
    ax.set_ylabel("H_rel")
    fig.tight_layout()
    path = os.path.join(run_dir, "entropy_decay.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    tt, dd = _finite(t, series["l1k2_dist"])
    pos = dd > 0
    if pos.any():
        ax.loglog(1.0 + tt[pos], dd[pos], "s-", ms=3, lw=1.0,
                  label="weighted L1 distance to equilibrium")
        if gamma:
            ref = dd[pos][0] * ((1.0 + tt[pos]) / (1.0 + tt[pos][0])) ** (
                -1.0 / (2.0 * gamma)
            )
            ax.loglog(1.0 + tt[pos], ref, "--", lw=1.0,
                      label=f"(1+t)^(-1/(2*{gamma:g})) envelope")
        ax.legend(fontsize=8)
    ax.set_xlabel("1 + t")
    ax.set_ylabel("distance")
    fig.tight_layout()
    path = os.path.join(run_dir, "distance_decay.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax1 = plt.subplots(figsize=(5.2, 3.6))
    ax1.plot(t, series["sup_f"], "C0-", lw=1.2)
    ax1.set_xlabel("t")
    ax1.set_ylabel("sup f", color="C0")
    ax2 = ax1.twinx()
    ax2.plot(t, series["kappa_min"], "C1-", lw=1.2)
    ax2.set_ylabel("min(1 - eps f)", color="C1")
    fig.tight_layout()
    path = os.path.join(run_dir, "saturation.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written
