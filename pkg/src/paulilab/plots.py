"""Figure rendering for scenario reports.

Every diagnostic that emits a table can also render a companion figure;
figures are written next to the delimited output and listed in the run
manifest.  They are presentation artifacts only: no acceptance check
reads them back.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def flow_portrait(traj, path):
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    d = traj.dim
    if d == 1:
        axes[0].plot(traj.points[:, 1], traj.points[:, 0], lw=0.9)
        axes[0].set_xlabel("x")
        axes[0].set_ylabel("p")
    else:
        axes[0].plot(traj.points[:, d], traj.points[:, d + 1], lw=0.6)
        axes[0].set_xlabel("x1")
        axes[0].set_ylabel("x2")
    axes[0].set_title("orbit")
    axes[1].semilogy(traj.times, np.abs(traj.energies - traj.energies[0]) + 1e-18)
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("|H(t) - H(0)|")
    axes[1].set_title("energy drift")
    return _save(fig, path)


def transport_components(times, quats, path):
    fig, ax = plt.subplots(figsize=(7, 3.6))
    labels = ["q0", "q1", "q2", "q3"]
    for i in range(4):
        ax.plot(times, quats[:, i], lw=0.9, label=labels[i])
    ax.set_xlabel("t")
    ax.set_ylabel("quaternion components")
    ax.legend(loc="upper right", ncol=4, fontsize=8)
    ax.set_title("spin transport")
    return _save(fig, path)


def ergodic_trend(stats, path):
    t = [s.t_final for s in stats]
    fig, ax = plt.subplots(figsize=(6, 3.8))
    ax.loglog(t, [s.mean_deviation for s in stats], "o-", label="mean")
    ax.loglog(t, [s.max_deviation for s in stats], "s--", label="max")
    ax.loglog(t, [s.mean_group_spread for s in stats], "^:", label="group spread")
    ax.set_xlabel("averaging time T")
    ax.set_ylabel("Birkhoff deviation")
    ax.legend()
    return _save(fig, path)


def deviation_ladder(hbars, values, ylabel, path, reference_power=None):
    fig, ax = plt.subplots(figsize=(6, 3.8))
    ax.loglog(hbars, values, "o-", label=ylabel)
    if reference_power is not None:
        scale = values[0] / hbars[0] ** reference_power
        ax.loglog(hbars, [scale * h ** reference_power for h in hbars], "k--",
                  lw=0.8, label=f"hbar^{reference_power:g}")
    ax.set_xlabel("hbar")
    ax.set_ylabel(ylabel)
    ax.invert_xaxis()
    ax.legend()
    return _save(fig, path)


def spectrum_window(energies_by_hbar, window_of, path):
    fig, ax = plt.subplots(figsize=(6, 3.8))
    for i, (hbar, energies) in enumerate(sorted(energies_by_hbar.items())):
        ax.plot(np.full(len(energies), hbar), energies, "_", ms=14)
        win = window_of(hbar)
        ax.plot([hbar, hbar], [win.lo, win.hi], lw=6, alpha=0.2, color="C1")
    ax.set_xlabel("hbar")
    ax.set_ylabel("window eigenvalues")
    return _save(fig, path)


def husimi_heatmap(field, path):
    fig, ax = plt.subplots(figsize=(5.4, 4.2))
    tr = np.trace(field.values, axis1=-2, axis2=-1).real
    g = field.grid
    ax.imshow(tr, origin="lower", aspect="auto",
              extent=[g.midpoint_axis[0], g.midpoint_axis[-1],
                      g.p_axis[0], g.p_axis[-1]],
              cmap="viridis")
    ax.set_xlabel("x")
    ax.set_ylabel("p")
    ax.set_title(f"tr {field.kind} field")
    return _save(fig, path)


def expectation_scatter(points_by_hbar, target, path, ylabel):
    fig, ax = plt.subplots(figsize=(6, 3.8))
    for hbar, (energies, values) in sorted(points_by_hbar.items()):
        ax.plot(energies, values, "o", ms=3, label=f"hbar={hbar:g}")
    ax.axhline(target, color="k", lw=0.8, ls="--")
    ax.set_xlabel("E_k")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    return _save(fig, path)
