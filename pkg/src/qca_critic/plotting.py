"""SVG figures with byte-stable output (no date stamp, fixed element ids)."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .criticality import ALPHA_DP, ALPHA_QCP, effective_exponent  # noqa: E402

__all__ = ["figure_to_svg", "phase_diagram_svg", "series_svg", "effective_exponent_svg", "overlay_svg"]

_STYLE = {"svg.hashsalt": "qca-critic", "svg.fonttype": "path", "figure.figsize": (6.0, 4.2)}


def figure_to_svg(fig):
    buf = io.StringIO()
    with matplotlib.rc_context(_STYLE):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def _figure():
    with matplotlib.rc_context(_STYLE):
        return plt.subplots()


def phase_diagram_svg(diagram, records=None):
    fig, ax = _figure()
    mesh = ax.pcolormesh(diagram.p2_grid, diagram.p1_grid, diagram.n_stationary, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=r"stationary $\langle n\rangle$")
    if records:
        for order, marker in (("continuous", "o"), ("discontinuous", "x")):
            pts = [(r.p2_crit, r.p1) for r in records if r.order == order]
            if pts:
                x, y = zip(*pts)
                ax.plot(x, y, marker, color="white", ms=3, ls="none", label=order)
        ax.legend(loc="lower right", fontsize=8)
    ax.set_xlabel(r"$p_2$")
    ax.set_ylabel(r"$p_1$")
    return figure_to_svg(fig)


def series_svg(curves, loglog=True):
    """``curves``: iterable of ``(label, TimeSeries)``."""
    fig, ax = _figure()
    for label, s in curves:
        t = np.asarray(s.times, dtype=float)
        m = (t > 0) & (s.n_mean > 0) if loglog else np.ones_like(t, dtype=bool)
        ax.plot(t[m], s.n_mean[m], label=label, lw=1)
    if loglog:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\langle n(t)\rangle$")
    ax.legend(fontsize=7)
    return figure_to_svg(fig)


def effective_exponent_svg(curves, title=None):
    """``curves``: iterable of ``(label, TimeSeries)``; reference exponents drawn as dashed lines."""
    fig, ax = _figure()
    for label, s in curves:
        c = effective_exponent(s)
        ax.plot(c.t, c.alpha, label=label, lw=1)
    ax.axhline(ALPHA_DP[0], color="k", ls="--", lw=0.8)
    ax.annotate(f"DP {ALPHA_DP[0]}", (0.99, ALPHA_DP[0]), xycoords=("axes fraction", "data"), ha="right",
                va="bottom", fontsize=7)
    qcp = ALPHA_QCP[0][0]
    ax.axhline(qcp, color="gray", ls=":", lw=0.8)
    ax.annotate(f"QCP {qcp}", (0.99, qcp), xycoords=("axes fraction", "data"), ha="right", va="bottom", fontsize=7)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\alpha(t)$")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7)
    return figure_to_svg(fig)


def overlay_svg(record):
    fig, ax = _figure()
    ax.plot(record.times, record.n_mean_lindblad, label="master equation", lw=1.5)
    ax.plot(record.times, record.n_mean_qca, "--", label=f"QCA, $\\gamma\\delta t$={record.gamma_dt}", lw=1)
    ax.set_xlabel(r"$\gamma t$")
    ax.set_ylabel(r"$\langle n\rangle$")
    ax.set_title(f"L={record.l}, $\\Omega/\\gamma$={record.omega_over_gamma}, max diff {record.max_abs_diff:.3g}",
                 fontsize=9)
    ax.legend(fontsize=8)
    return figure_to_svg(fig)
