"""Figure rendering for the command-line front end.

Every plotting helper writes a PNG next to the delimited output it
illustrates and returns the path.  The Agg backend is forced so the
functions work headless.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "plot_shares", "plot_scaling_path", "plot_qvar", "plot_beta_report",
    "plot_rows",
]

_COLORS = plt.rcParams["axes.prop_cycle"].by_key()["color"]


def _save(fig, path) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return str(path)


def plot_shares(x, shares, path, xlabel: str = "step",
                title: Optional[str] = None) -> str:
    """Per-agent share paths against steps or time."""
    shares = np.asarray(shares)
    fig, ax = plt.subplots(figsize=(7, 4))
    for i in range(shares.shape[1]):
        ax.plot(x, shares[:, i], lw=1.2, label=f"agent {i + 1}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("share")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_scaling_path(sp, path, title: Optional[str] = None) -> str:
    """Z / M / H / quadratic-variation panels of a ScalingPath."""
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    panels = [("mean path Z", sp.Z), ("noise M", sp.M),
              ("drift correction H", sp.H), ("quadratic variation", sp.qvar)]
    for ax, (name, block) in zip(axes.ravel(), panels):
        if block is None:
            ax.text(0.5, 0.5, "not computed", ha="center", va="center",
                    transform=ax.transAxes, color="gray")
        else:
            block = np.asarray(block)
            for i in range(block.shape[1]):
                ax.plot(sp.times, block[:, i], lw=1.0,
                        color=_COLORS[i % len(_COLORS)])
        ax.set_title(name, fontsize=9)
    for ax in axes[1]:
        ax.set_xlabel("t")
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def plot_qvar(qv, path) -> str:
    """Per-agent quadratic-variation values with error whiskers."""
    A = len(qv.values)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    err = qv.abs_error + qv.tail_bound
    ax.bar(np.arange(1, A + 1), qv.values,
           yerr=err, capsize=4, color=_COLORS[:A])
    ax.set_xticks(np.arange(1, A + 1))
    ax.set_xlabel("agent")
    ax.set_ylabel(f"<M>({qv.T:g})")
    ax.set_title("quadratic variation (whisker = quad error + tail bound)",
                 fontsize=9)
    return _save(fig, path)


def plot_beta_report(rep, path) -> str:
    """Rescaled empirical path against the first/second-order laws."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for i in range(rep.empirical.shape[1]):
        ax.plot(rep.times, rep.empirical[:, i], lw=0.9, alpha=0.8,
                color=_COLORS[i % len(_COLORS)], label=f"agent {i + 1}")
        ax.plot(rep.times, rep.lln_line(rep.times)[:, i], ls="--", lw=1.0,
                color=_COLORS[i % len(_COLORS)])
    ax.set_xlabel("t")
    ax.set_ylabel("rescaled increment")
    ax.set_title(f"beta={rep.beta:g}, N={rep.N}, regime={rep.regime}",
                 fontsize=9)
    ax.legend(loc="best", fontsize=8)
    return _save(fig, path)


def plot_rows(header: Sequence[str], rows, path,
              title: Optional[str] = None) -> str:
    """Generic view of a small data table.

    Numeric first column becomes the x axis with the remaining numeric
    columns as lines; otherwise the table renders as grouped bars.
    """
    cols = list(zip(*rows)) if rows else []
    numeric = []
    for c in cols:
        try:
            numeric.append(np.asarray([float(v) for v in c]))
        except (TypeError, ValueError):
            numeric.append(None)
    fig, ax = plt.subplots(figsize=(7, 4))
    drew = False
    if len(cols) >= 2 and numeric[0] is not None and len(rows) > 1:
        for j in range(1, len(cols)):
            if numeric[j] is None:
                continue
            marker = "o" if len(rows) <= 40 else None
            ax.plot(numeric[0], numeric[j], lw=1.1, marker=marker, ms=3,
                    label=str(header[j]))
            drew = True
        ax.set_xlabel(str(header[0]))
    if not drew:
        labels = [str(r[0]) for r in rows]
        vals = [v for v in (numeric[j] for j in range(1, len(cols)))
                if v is not None]
        if not vals:
            plt.close(fig)
            return ""
        width = 0.8 / len(vals)
        xs = np.arange(len(labels))
        for j, v in enumerate(vals):
            ax.bar(xs + j * width, v, width, label=str(header[j + 1]))
        ax.set_xticks(xs + 0.4 - width / 2)
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title, fontsize=10)
    return _save(fig, path)
