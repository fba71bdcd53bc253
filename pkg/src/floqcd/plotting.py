"""Figure rendering for experiment reports.

Each report writer in the CLI pairs its CSV output with a rendered PNG so a
run directory is self-contained.  Figures are deliberately plain matplotlib;
styling beyond readability is left to downstream users of the CSVs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_ARM_STYLES = {
    "unassisted": dict(color="black", linestyle="--"),
    "optimized_anneal": dict(color="tab:green", linestyle="-."),
    "analytical_floquet": dict(color="tab:blue", linestyle=":"),
    "exact_cd": dict(color="tab:purple", linestyle="-"),
    "caffeine": dict(color="tab:red", linestyle="-"),
}


def _save(fig, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def plot_state_prep(report, path: Path) -> None:
    """Instantaneous-eigenstate fidelity against time for every arm."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for arm in report.arms:
        if arm.record is None or arm.instantaneous_fidelity is None:
            continue
        style = _ARM_STYLES.get(arm.name, {})
        ts = arm.record.times / arm.record.times[-1]
        ax1.plot(ts, arm.instantaneous_fidelity, label=arm.name, **style)
        ax2.semilogy(ts, np.maximum(1e-16, 1.0 - arm.target_fidelity_series),
                     label=arm.name, **style)
    ax1.set_xlabel("t / tau")
    ax1.set_ylabel("instantaneous fidelity")
    ax1.legend(fontsize=8)
    ax2.set_xlabel("t / tau")
    ax2.set_ylabel("1 - F(target)")
    fig.tight_layout()
    _save(fig, path)


def plot_landscape(params: np.ndarray, costs: np.ndarray, axis_label: str,
                   path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    x = params[:, 0]
    ax.semilogy(x, np.maximum(costs, 1e-16), color="tab:red", lw=1)
    i = int(np.argmin(costs))
    ax.axvline(x[i], color="gray", lw=0.8, linestyle=":")
    ax.set_xlabel(axis_label)
    ax.set_ylabel("cost (1 - F)")
    ax.set_title(f"minimum {costs[i]:.3e} at {x[i]:+.3f}")
    _save(fig, path)


def plot_learning(report, path: Path) -> None:
    """Learned piecewise-constant coefficients against the closed-form curve."""
    fig, ax = plt.subplots(figsize=(7, 4))
    if report.analytic_curve is not None:
        ax.plot(report.analytic_curve[:, 0] / report.analytic_curve[-1, 0],
                report.analytic_curve[:, 2], "k--", lw=1, label="analytic")
    if report.segments:
        n = len(report.segments)
        for s in report.segments:
            t0, t1 = (s.index - 1) / n, s.index / n
            color = "tab:orange" if s.flagged else "tab:red"
            ax.hlines(s.learned[0], t0, t1, color=color, lw=2)
        ax.hlines([], [], [], color="tab:red", lw=2, label="learned")
    ax.set_xlabel("t / tau")
    ax.set_ylabel("beta_1 (units of omega_0)")
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_ising(report, path: Path) -> None:
    """Final-state energy gap versus system size, one series per (arm, N_k, N_tau)."""
    fig, ax = plt.subplots(figsize=(7, 4))
    series: dict[tuple, list] = {}
    for row in report.rows:
        key = (row.arm, row.n_harmonics, row.n_segments)
        series.setdefault(key, []).append((row.n_sites, row.energy_gap))
    markers = ["o", "s", "D", "h", "^", "v"]
    for i, (key, pts) in enumerate(sorted(series.items())):
        arm, nk, ntau = key
        pts.sort()
        label = arm if arm == "unassisted" else f"{arm} N_k={nk} N_tau={ntau}"
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                marker=markers[i % len(markers)], label=label)
    ax.set_xlabel("N")
    ax.set_ylabel("E - E_T (units of J)")
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_exact_cd(report, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    ts = report.record.times / report.record.times[-1]
    ax.semilogy(ts, np.maximum(1e-16, 1.0 - report.instantaneous_fidelity),
                color="tab:purple")
    ax.set_xlabel("t / tau")
    ax.set_ylabel("1 - F(instantaneous)")
    _save(fig, path)
