"""SVG chart rendering for benchmark reports.

Everything goes through the Agg backend so suites run headless; charts are
written as standalone SVG next to the delimited data they visualize.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def save_line_chart(path, x, series, xlabel, ylabel, title,
                    logx=False, logy=False, ylim=None):
    """One panel of labeled lines with optional error bars.

    series: {label: (y values, yerr or None)}; x is shared.
    """
    fig, ax = plt.subplots(figsize=(5.0, 3.4), dpi=100)
    for label, (y, yerr) in series.items():
        if yerr is not None:
            ax.errorbar(x, y, yerr=yerr, marker="o", markersize=3.5,
                        capsize=2.5, linewidth=1.2, label=label)
        else:
            ax.plot(x, y, marker="o", markersize=3.5, linewidth=1.2,
                    label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    if ylim is not None:
        ax.set_ylim(*ylim)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title, fontsize=10)
    ax.grid(True, alpha=0.3)
    if len(series) > 1:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def save_trace_chart(path, trace, title):
    """Constraint value and loss against cumulative wall time."""
    t = []
    acc = 0.0
    for rec in trace:
        acc += rec.seconds
        t.append(acc)
    deltas = [max(rec.delta, 1e-16) for rec in trace]
    losses = [rec.loss for rec in trace]
    fig, ax = plt.subplots(figsize=(5.0, 3.4), dpi=100)
    ax.plot(t, deltas, marker="o", markersize=3, linewidth=1.2,
            color="tab:blue", label="constraint bound")
    ax.set_yscale("log")
    ax.set_xlabel("wall time (s)")
    ax.set_ylabel("constraint bound", color="tab:blue")
    ax2 = ax.twinx()
    ax2.plot(t, losses, marker="s", markersize=3, linewidth=1.0,
             color="tab:orange", label="loss")
    ax2.set_ylabel("loss", color="tab:orange")
    ax.set_title(title, fontsize=10)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path
