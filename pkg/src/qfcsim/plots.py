"""Static SVG plots for decay histograms, pulse correlations, and sweeps.

Figures are drawn without pyplot so no global state leaks between runs, and
saved with a fixed hash salt and no date metadata so rerunning a scenario
reproduces the SVG byte for byte.
"""

from __future__ import annotations

import numpy as np
from matplotlib import rc_context
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

_SVG_METADATA = {"Date": None}


def _new_axes(width=6.4, height=4.2):
    fig = Figure(figsize=(width, height), dpi=100)
    FigureCanvasSVG(fig)
    return fig, fig.add_subplot(111)


def _save(fig, path, salt):
    with rc_context({"svg.hashsalt": str(salt), "svg.fonttype": "path"}):
        fig.savefig(path, format="svg", metadata=_SVG_METADATA, bbox_inches="tight")


def plot_decay(hist, fit, path, title):
    """Folded arrival-time histogram in rate units with its exponential fit."""
    t_ns = hist.bin_centers_ps / 1000.0
    y = hist.rate_values()
    fig, ax = _new_axes()
    pos = y > 0
    ax.semilogy(t_ns[pos], y[pos], ".", ms=2.5, color="C0", label="data")
    if fit is not None:
        a, tau, b = (fit.params[k] for k in ("amplitude", "tau_ns", "background"))
        tt = np.linspace(t_ns[0], t_ns[-1], 512)
        ax.semilogy(tt, a * np.exp(-tt / tau) + b, "-", color="C3", lw=1.2,
                    label=f"fit: tau = {tau:.2f} ns")
        ax.legend(loc="upper right", frameon=False)
    ax.set_xlabel("time after pulse (ns)")
    ax.set_ylabel("count rate (cts/s)")
    ax.set_title(title)
    _save(fig, path, title)


def plot_g2(g2, fit, path, title):
    """Normalized pulse-wise correlation with the bunching fit."""
    fig, ax = _new_axes()
    ax.plot(g2.pulse_sep, g2.g2, "o", ms=3.0, color="C0", label="data")
    if fit is not None and np.isfinite(fit.params.get("tau_pulses", np.nan)):
        a, tau = fit.params["amplitude"], fit.params["tau_pulses"]
        nn = np.linspace(g2.pulse_sep.min(), g2.pulse_sep.max(), 513)
        ax.plot(nn, 1.0 + a * np.exp(-np.abs(nn) / tau), "-", color="C3", lw=1.2,
                label=f"fit: A = {a:.2f}, tau = {tau:.1f} pulses")
    ax.axhline(1.0, color="0.6", lw=0.8, ls=":")
    ax.annotate(f"g2(0) = {g2.zero_value:.3f}", xy=(0, g2.zero_value),
                xytext=(5, -12), textcoords="offset points", fontsize=9)
    ax.legend(loc="upper right", frameon=False)
    ax.set_xlabel("pulse separation")
    ax.set_ylabel("g2")
    ax.set_title(title)
    _save(fig, path, title)


def plot_sweep(x, y, yerr, curves, path, title, xlabel, ylabel, hline=None):
    """Sweep points with optional error bars and overlaid model curves.

    ``curves`` is a list of (x, y, label) tuples drawn as lines.
    """
    fig, ax = _new_axes()
    if yerr is not None:
        ax.errorbar(x, y, yerr=yerr, fmt="o", ms=3.5, color="C0", lw=1.0,
                    capsize=2.0, label="data")
    else:
        ax.plot(x, y, "o", ms=3.5, color="C0", label="data")
    for i, (cx, cy, label) in enumerate(curves):
        ax.plot(cx, cy, "-", lw=1.2, color=f"C{i + 3}", label=label)
    if hline is not None:
        ax.axhline(hline, color="0.6", lw=0.8, ls=":")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(loc="best", frameon=False)
    _save(fig, path, title)
