"""Figure rendering for the command-line report paths.

Every function writes a PNG next to the delimited output it illustrates and
returns the path.  The Agg backend is forced so rendering works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .charts import lambert_inverse
from .manifolds import EUCLIDEAN, SPHERE

__all__ = [
    "save_trace_figure",
    "save_positions_figure",
    "save_limits_figure",
    "save_verify_figure",
]


def save_trace_figure(path, trace):
    """Log-posterior and intercept traces with the burn-in boundary marked."""
    fig, axes = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    axes[0].plot(trace.iteration, trace.log_posterior, lw=0.6, color="tab:blue")
    axes[0].set_ylabel("log posterior")
    axes[1].plot(trace.iteration, trace.alpha, lw=0.6, color="tab:orange")
    axes[1].set_ylabel("alpha")
    axes[1].set_xlabel("iteration")
    for ax in axes:
        if trace.burn_in:
            ax.axvline(trace.burn_in, color="gray", ls="--", lw=0.8)
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_positions_figure(path, manifold, positions, graph=None):
    """Latent positions in the base-point equal-area chart, edges drawn."""
    positions = np.asarray(positions, dtype=float)
    if manifold.kind == EUCLIDEAN:
        coords = positions[:, :2]
    else:
        coords = lambert_inverse(manifold, positions)
    fig, ax = plt.subplots(figsize=(6, 6))
    if graph is not None:
        for i, j in graph.edges:
            ax.plot(
                [coords[i, 0], coords[j, 0]],
                [coords[i, 1], coords[j, 1]],
                color="gray", lw=0.7, zorder=1,
            )
    ax.scatter(coords[:, 0], coords[:, 1], s=40, color="tab:blue", zorder=2)
    for idx, (x, y) in enumerate(coords[:, :2]):
        ax.annotate(str(idx), (x, y), fontsize=8,
                    textcoords="offset points", xytext=(4, 4))
    if manifold.kind == SPHERE:
        theta = np.linspace(0.0, 2.0 * np.pi, 256)
        for radius, style in ((2.0 * manifold.scale, "-"),
                              (np.sqrt(2.0) * manifold.scale, "--")):
            ax.plot(radius * np.cos(theta), radius * np.sin(theta),
                    color="gray", ls=style, lw=0.8)
    ax.set_aspect("equal")
    ax.set_xlabel("chart x")
    ax.set_ylabel("chart y")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_limits_figure(path, scales, deviations, labels=None):
    """Deviation-vs-curvature-scale curves on log-log axes: flattening toward
    the plane shows as a steady downward slope."""
    scales = np.asarray(scales, dtype=float)
    deviations = np.atleast_2d(np.asarray(deviations, dtype=float))
    fig, ax = plt.subplots(figsize=(7, 5))
    for row in range(deviations.shape[0]):
        label = labels[row] if labels else None
        ax.plot(scales, deviations[row], marker="o", lw=0.8, alpha=0.6,
                label=label)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("curvature scale")
    ax.set_ylabel("chart deviation of wrap(u) from u")
    if labels:
        ax.legend(fontsize=7)
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_verify_figure(path, entries):
    """One bar per check: measured value against its tolerance (ratio scale),
    colored by pass/fail."""
    names = [e["name"] for e in entries]
    ratios = []
    for e in entries:
        tol = abs(e["tolerance"]) if e["tolerance"] else 1.0
        val = abs(e["value"])
        ratios.append(max(val / tol, 1e-12))
    colors = ["tab:green" if e["passed"] else "tab:red" for e in entries]
    fig, ax = plt.subplots(figsize=(8, 0.45 * len(entries) + 1.5))
    y = np.arange(len(entries))
    ax.barh(y, ratios, color=colors)
    ax.axvline(1.0, color="black", lw=1.0)
    ax.set_yticks(y)
    ax.set_yticklabels(names, fontsize=8)
    ax.set_xscale("log")
    ax.set_xlabel("measured / tolerance (checks with '>=' invert)")
    ax.invert_yaxis()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
