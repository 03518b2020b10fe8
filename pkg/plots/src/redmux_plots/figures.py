"""The three figure kinds: weight evolution, safety metrics, path overlay.

Figures are pure functions of the CSV: fixed style, fixed dpi, no
timestamps, user rc customization ignored, so the same file always produces
the same PNG bytes.  Single-record logs render as markers instead of lines.
"""

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .logfile import LogFormatError, read_log

DPI = 100
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
# one linestyle per parent subtask, cycled
GROUP_STYLES = ("solid", "dashed", "dashdot", "dotted")
PNG_META = {"Software": None}  # keep the version string out of the bytes


def _load(csv, window):
    matplotlib.rcdefaults()
    table = read_log(csv)
    if window is not None:
        table = table.window(window[0], window[1])
    return table


def _line(ax, x, y, **kw):
    if np.size(x) == 1:
        kw.pop("linestyle", None)
        ax.plot(x, y, marker="o", linestyle="none", **kw)
    else:
        ax.plot(x, y, **kw)


def _save(fig, out):
    fig.savefig(out, format="png", dpi=DPI, metadata=PNG_META)


def _style_by_parent(metrics, l):
    """Map subtask column -> linestyle, grouped by the metric that names it."""
    style = {}
    for g, (_, cols) in enumerate(sorted(metrics.items(), key=lambda kv: kv[1][0])):
        for j, _ in cols:
            style[j] = GROUP_STYLES[g % len(GROUP_STYLES)]
    return style


def plot_weights(csv, out, window=None) -> Figure:
    """One panel per redundancy, one weight line per subtask column."""
    table = _load(csv, window)
    A = table.allocation()
    t = table.col("t")
    records, r, l = A.shape
    style = _style_by_parent(table.metrics(), l)
    fig = Figure(figsize=(8.0, 2.2 * r), dpi=DPI)
    axes = fig.subplots(r, 1, sharex=True, squeeze=False)[:, 0]
    top = float(A.max())
    for i, ax in enumerate(axes):
        for j in range(l):
            _line(ax, t, A[:, i, j], color=PALETTE[j % len(PALETTE)],
                  linestyle=style.get(j, "solid"), label=f"s{j}")
        ax.set_ylabel(f"redundancy {i}")
        ax.set_ylim(-0.05 * top - 1e-3, 1.15 * top + 1e-3)
    axes[0].legend(ncol=min(l, 6), fontsize=8, loc="upper right")
    axes[-1].set_xlabel("t [s]")
    fig.suptitle("subtask weights")
    _save(fig, out)
    return fig


def plot_margins(csv, out, window=None) -> Figure:
    """One panel per metric kind, every trace against its zero limit line."""
    table = _load(csv, window)
    metrics = table.metrics()
    if not metrics:
        raise LogFormatError("missing columns aux_<metric>_i*")
    t = table.col("t")
    ordered = sorted(metrics.items(), key=lambda kv: kv[1][0])
    fig = Figure(figsize=(8.0, 2.4 * len(ordered)), dpi=DPI)
    axes = fig.subplots(len(ordered), 1, sharex=True, squeeze=False)[:, 0]
    for ax, (metric, cols) in zip(axes, ordered):
        for k, (j, name) in enumerate(cols):
            _line(ax, t, table.col(name), color=PALETTE[k % len(PALETTE)],
                  label=f"{metric}[{j}]")
        ax.axhline(0.0, color="black", linewidth=1.0,
                   linestyle=(0, (2, 2)), label="limit")
        ax.set_ylabel(metric)
        ax.legend(ncol=4, fontsize=8, loc="upper right")
    axes[-1].set_xlabel("t [s]")
    fig.suptitle("subtask safety metrics")
    _save(fig, out)
    return fig


def plot_path(csv, out, window=None) -> Figure:
    """Reference vs. actual workspace paths with the worst deviation named."""
    table = _load(csv, window)
    traces = table.traces()
    planar = {
        k: roles for k, roles in sorted(traces.items())
        if {"x", "y"} <= roles.get("ref", {}).keys()
        and {"x", "y"} <= roles.get("act", {}).keys()
    }
    if not planar:
        raise LogFormatError("missing columns aux_ref*_x/aux_act*_x")
    fig = Figure(figsize=(6.4, 6.0), dpi=DPI)
    ax = fig.subplots()
    worst = 0.0
    for k, roles in planar.items():
        rx, ry = table.col(roles["ref"]["x"]), table.col(roles["ref"]["y"])
        ax_, ay_ = table.col(roles["act"]["x"]), table.col(roles["act"]["y"])
        worst = max(worst, float(np.max(np.hypot(rx - ax_, ry - ay_))))
        color = PALETTE[k % len(PALETTE)]
        _line(ax, rx, ry, color="black", linestyle="dashed",
              linewidth=1.0, label=f"reference {k}")
        _line(ax, ax_, ay_, color=color, linewidth=1.5, label=f"actual {k}")
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.legend(fontsize=8, loc="lower right")
    ax.text(0.02, 0.98, f"max deviation {worst:.3e} m",
            transform=ax.transAxes, va="top", fontsize=9)
    fig.suptitle("primary task path")
    _save(fig, out)
    return fig
