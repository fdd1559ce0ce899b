"""SVG figures for the CLI reports.

Figures are built on bare matplotlib Figure objects (no pyplot state) and written
with a fixed hash salt and no date stamp, so identical data gives identical files.
"""
from __future__ import annotations

import math

import matplotlib
import numpy as np
from matplotlib.figure import Figure

_RC = {
    "svg.hashsalt": "nilgeo",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def _figure(ncols=1, width=6.0, height=3.6):
    fig = Figure(figsize=(width, height))
    axes = fig.subplots(1, ncols, squeeze=False)[0]
    return fig, axes


def _save(fig, path):
    with matplotlib.rc_context(_RC):
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": "nilgeo"})
    return path


def _styled(build):
    def wrapper(*args, **kwargs):
        with matplotlib.rc_context(_RC):
            return build(*args, **kwargs)

    wrapper.__name__ = build.__name__
    wrapper.__doc__ = build.__doc__
    return wrapper


@_styled
def plot_spectrum(thetas, moduli, path, title="pencil moduli"):
    """Eigenvalue moduli of the unit pencil against theta."""
    fig, (ax,) = _figure()
    moduli = np.atleast_2d(moduli)
    for k in range(moduli.shape[1]):
        ax.plot(thetas, moduli[:, k], lw=1.2, label=f"w{k + 1}")
    ax.set_xlabel("theta")
    ax.set_ylabel("modulus")
    ax.set_xlim(0, 2 * math.pi)
    ax.set_title(title)
    ax.legend(frameon=False)
    return _save(fig, path)


@_styled
def plot_slices(report, path, title="angular slices"):
    """W(theta) and the cut radius A(theta) of a density report."""
    fig, (a1, a2) = _figure(2, width=8.0)
    th = np.array([row.theta for row in report.per_theta])
    a1.plot(th, [row.value for row in report.per_theta], "-", lw=1.2)
    a1.set_xlabel("theta")
    a1.set_ylabel("W(theta)")
    a2.plot(th, [row.cut for row in report.per_theta], "-", lw=1.2, color="C1")
    a2.set_xlabel("theta")
    a2.set_ylabel("A(theta)")
    fig.suptitle(f"{title}  (V = {report.volume:.10g})")
    return _save(fig, path)


@_styled
def plot_field(points, path, axis=0, title="density field"):
    """f_SP along one parameter coordinate, with error bars."""
    fig, (ax,) = _figure()
    good = [pt for pt in points if pt.report is not None]
    x = [pt.xi[axis] for pt in good]
    y = [pt.report.f_SP for pt in good]
    e = [pt.report.f_SP * pt.report.rel_err for pt in good]
    ax.errorbar(x, y, yerr=e, fmt="o-", ms=3, lw=1.0, capsize=2)
    ax.set_xlabel(f"xi{axis + 1}")
    ax.set_ylabel("f_SP")
    ax.set_title(title)
    return _save(fig, path)


@_styled
def plot_regularity(rep, path):
    """Values along the crossing path and one-sided defects against the step."""
    fig, (a1, a2) = _figure(2, width=8.0)
    a1.plot(rep.ts, rep.values, ".-", lw=1.0)
    a1.set_xlabel("t")
    a1.set_ylabel(rep.quantity)
    h = rep.step_sequence
    for d, floor, lab in ((rep.c1_defect, rep.c1_floor, "C1"), (rep.c2_defect, rep.c2_floor, "C2")):
        line = a2.loglog(h, np.maximum(d, 1e-300), "o-", ms=3, label=f"{lab} defect")[0]
        a2.axhline(floor, ls=":", color=line.get_color(), label=f"{lab} floor")
    a2.set_xlabel("h")
    a2.set_ylabel("|left - right|")
    a2.legend(frameon=False, fontsize=7)
    fig.suptitle(f"C1 {rep.verdict_c1}, C2 {rep.verdict_c2}")
    return _save(fig, path)


@_styled
def plot_vanishing(rep, path):
    """log f(z, A(z)) against log ||q(z)|| per ray."""
    fig, (ax,) = _figure()
    for i in range(len(rep.rays)):
        ax.loglog(rep.q_norms[i], np.abs(rep.f_values[i]), "o-", ms=3, lw=1.0, label=f"ray {i}")
    q = np.array([rep.q_norms.min(), rep.q_norms.max()])
    ref = np.abs(rep.f_values).max() * (q / q[1]) ** 2
    ax.loglog(q, ref, "k--", lw=0.8, label="slope 2")
    ax.set_xlabel("||q||")
    ax.set_ylabel("|f(z, A(z))|")
    ax.set_title(f"fitted exponent {rep.f_exponent:.3f}")
    ax.legend(frameon=False, fontsize=7)
    return _save(fig, path)
