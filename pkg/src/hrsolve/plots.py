"""Figure rendering for the CLI report paths (file output only, Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_monitor(traj, path):
    """Norm series per component: L2/L4/L6/Linf and the H1 seminorms."""
    fig, axes = plt.subplots(2, 2, figsize=(10, 7), sharex=True)
    t = traj.times
    for ax, kind in zip(axes.flat, ("L2", "L4", "L6", "H1")):
        for comp in "uvw":
            ax.plot(t, traj.column(kind + comp), label=comp, lw=0.8)
        ax.set_ylabel(kind)
        ax.legend(fontsize=8)
    for ax in axes[1]:
        ax.set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_probe(traj, path):
    fig, axes = plt.subplots(3, 1, figsize=(10, 6), sharex=True)
    t = traj.probe[:, 0]
    for ax, (i, name) in zip(axes, enumerate("uvw", start=1)):
        ax.plot(t, traj.probe[:, i], lw=0.6)
        ax.set_ylabel(name)
    axes[-1].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_verification(report, path):
    """Weighted norm against its decaying envelope, with violations flagged."""
    fig, ax = plt.subplots(figsize=(9, 5))
    ax.plot(report.times, report.weighted, lw=0.8, label="weighted norm")
    ax.plot(report.times, (1.0 + report.slack) * report.envelope, lw=0.8,
            ls="--", label=f"(1+{report.slack:g}) envelope")
    bad = ~report.ok
    if bad.any():
        ax.plot(report.times[bad], report.weighted[bad], "rx", ms=4, label="violation")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("C1*|u|^2 + |v|^2 + |w|^2")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_convergence(rows, path):
    """Log-log error ladders; rows: (label, steps, errors, slope)."""
    fig, ax = plt.subplots(figsize=(7, 5))
    for label, hs, es, slope in rows:
        ax.loglog(hs, es, "o-", label=f"{label} (slope {slope:.2f})")
    ax.set_xlabel("step size")
    ax.set_ylabel("error")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
