"""Render result tables as matplotlib figures.

Each experiment kind has one renderer working off the (meta, columns, rows)
triple that the harness writes, so figures can also be regenerated from a
result file on disk.  Figures are drawn without pyplot to stay backend- and
thread-agnostic.
"""

from __future__ import annotations

import numpy as np
from matplotlib.figure import Figure


def _column(columns, rows, name, dtype=float):
    idx = list(columns).index(name)
    raw = [row[idx] for row in rows]
    if dtype is bool:
        return np.array([str(v).lower() == "true" if isinstance(v, str) else bool(v)
                         for v in raw])
    return np.array([dtype(v) for v in raw])


def _new_axes(title):
    fig = Figure(figsize=(7.0, 4.5), dpi=130)
    ax = fig.subplots()
    ax.set_title(title)
    ax.grid(alpha=0.3)
    return fig, ax


def _render_run(meta, columns, rows):
    fig, ax = _new_axes(f"absorption run ({meta.get('kind')})")
    t = _column(columns, rows, "time_s")
    cum = _column(columns, rows, "cumulative_fraction")
    ax.plot(t, cum, label="simulated", lw=1.2)
    if "analytic_cumulative" in columns:
        ax.plot(t, _column(columns, rows, "analytic_cumulative"),
                "k--", label="analytic", lw=1.0)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("cumulative absorbed fraction")
    ax.legend()
    return fig


def _render_calibration_line(meta, columns, rows):
    fig, ax = _new_axes("1D boundary-shift calibration")
    alpha = _column(columns, rows, columns[0])
    metric = _column(columns, rows, columns[1])
    err = _column(columns, rows, columns[2])
    ax.errorbar(alpha, metric, yerr=np.where(np.isfinite(err), err, 0.0),
                fmt="o", ms=4, capsize=2, label="scaled absorption index")
    slope = float(meta.get("fit_slope", "nan"))
    intercept = float(meta.get("fit_intercept", "nan"))
    if np.isfinite(slope):
        xs = np.linspace(alpha.min(), alpha.max(), 100)
        ax.plot(xs, slope * xs + intercept, "r-", lw=1.0,
                label=f"fit, root={float(meta.get('alpha_opt', 'nan')):.4f}")
    ax.axhline(0.0, color="k", lw=0.6)
    ax.set_xlabel("alpha")
    ax.set_ylabel("absorption index / sqrt(D dt)")
    ax.legend()
    return fig


def _render_parabola(meta, columns, rows):
    fig, ax = _new_axes("ISDCD vs alpha")
    alpha = _column(columns, rows, "alpha")
    metric = _column(columns, rows, "isdcd_mean")
    err = _column(columns, rows, "isdcd_stderr")
    ax.errorbar(alpha, metric, yerr=np.where(np.isfinite(err), err, 0.0),
                fmt="o", ms=4, capsize=2, label="ISDCD")
    a = float(meta.get("fit_a", "nan"))
    b = float(meta.get("fit_b", "nan"))
    c = float(meta.get("fit_c", "nan"))
    if np.isfinite(a):
        xs = np.linspace(alpha.min(), alpha.max(), 200)
        ax.plot(xs, a * xs ** 2 + b * xs + c, "r-", lw=1.0,
                label=f"parabola, vertex={float(meta.get('alpha_opt', 'nan')):.3f}")
    ax.set_xlabel("alpha")
    ax.set_ylabel("ISDCD")
    ax.legend()
    return fig


def _render_noise(meta, columns, rows):
    fig, ax = _new_axes("per-step count scatter vs Poisson noise")
    t = _column(columns, rows, "time_s")
    measured = _column(columns, rows, "measured_std")
    predicted = _column(columns, rows, "poisson_std")
    band = _column(columns, rows, "band_halfwidth")
    ax.fill_between(t, predicted - band, predicted + band, alpha=0.25,
                    color="tab:red", label="sampling-error band")
    # thin the scatter so the band stays readable
    ax.plot(t[::5], measured[::5], "o", ms=2.5, label="measured std")
    ax.plot(t, predicted, "r-", lw=1.0, label="Poisson prediction")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("std of absorbed counts")
    ax.legend()
    return fig


def _render_inaccuracy(meta, columns, rows):
    fig, ax = _new_axes("relative inaccuracy vs step length")
    ratio = _column(columns, rows, "step_length_ratio")
    rel = _column(columns, rows, "relative_inaccuracy")
    Rs = _column(columns, rows, "R_um")
    Ls = _column(columns, rows, "L_um")
    Ds = _column(columns, rows, "D_um2_per_s")
    for key in sorted(set(zip(Rs, Ls, Ds))):
        mask = (Rs == key[0]) & (Ls == key[1]) & (Ds == key[2])
        ax.plot(ratio[mask], rel[mask], "o-", ms=4,
                label=f"R={key[0]:g}, L={key[1]:g}, D={key[2]:g}")
    ax.axvline(1.0, color="k", lw=0.8, ls=":", label="locality cutoff")
    ax.set_yscale("log")
    ax.set_xlabel("sqrt(2 D dt) / (L - R)")
    ax.set_ylabel("relative inaccuracy")
    ax.legend(fontsize=8)
    return fig


def _render_hit_rates(meta, columns, rows):
    fig, ax = _new_axes("hitting rate: simulation vs analytic")
    Ls = _column(columns, rows, "L_um")
    t = _column(columns, rows, "time_s")
    anl = _column(columns, rows, "analytic_hit_rate")
    eg = _column(columns, rows, "egmc_hit_rate")
    mc = _column(columns, rows, "mc_hit_rate")
    for L in sorted(set(Ls)):
        m = Ls == L
        ax.plot(t[m], eg[m], ".", ms=2, label=f"boundary-shifted, L={L:g}")
        ax.plot(t[m], mc[m], "x", ms=2, alpha=0.5, label=f"plain MC, L={L:g}")
        ax.plot(t[m], anl[m], "k-", lw=0.8)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("hit rate [1/s]")
    ax.legend(fontsize=7)
    return fig


def _render_alpha_summary(meta, columns, rows):
    fig, ax = _new_axes("calibrated alpha per configuration")
    n = len(rows)
    alpha = _column(columns, rows, "alpha_opt")
    err = _column(columns, rows, "alpha_stderr")
    labels = [f"({row[list(columns).index('R_um')]},"
              f"{row[list(columns).index('L_um')]},"
              f"{row[list(columns).index('D_um2_per_s')]},"
              f"{row[list(columns).index('n_steps')]})" for row in rows]
    xs = np.arange(n)
    ax.errorbar(xs, alpha, yerr=err, fmt="o", capsize=3, label="alpha_opt")
    mean = float(meta.get("weighted_alpha_mean", "nan"))
    if np.isfinite(mean):
        ax.axhline(mean, color="r", lw=1.0, label=f"weighted mean {mean:.3f}")
    ax.set_xticks(xs)
    ax.set_xticklabels(labels, rotation=20, fontsize=7)
    ax.set_ylabel("alpha")
    ax.legend()
    return fig


def render(meta, columns, rows, out_path):
    """Pick the renderer for this table and write a PNG next to it."""
    kind = str(meta.get("kind", ""))
    figure = str(meta.get("figure", ""))
    if kind in ("run1d", "run3d"):
        fig = _render_run(meta, columns, rows)
    elif kind == "calibrate1d" or figure == "fig4":
        fig = _render_calibration_line(meta, columns, rows)
    elif kind == "calibrate3d" or figure == "fig6":
        fig = _render_parabola(meta, columns, rows)
    elif kind == "noise" or figure == "fig7":
        fig = _render_noise(meta, columns, rows)
    elif kind == "inaccuracy" or figure == "fig9":
        fig = _render_inaccuracy(meta, columns, rows)
    elif figure == "fig5":
        fig = _render_hit_rates(meta, columns, rows)
    elif figure == "fig8":
        fig = _render_alpha_summary(meta, columns, rows)
    else:
        raise ValueError(f"no renderer for kind={kind!r} figure={figure!r}")
    fig.tight_layout()
    fig.savefig(out_path)
    return out_path
