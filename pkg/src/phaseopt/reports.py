"""Figure rendering for scenario reports.

Every scenario writes its figures next to the CSV artifacts so a run
directory is self-contained.  Uses the Agg backend; nothing here opens a
display.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .units import ENERGY_HARTREE_PER_WAVENUMBER, TIME_AU_PER_FS


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def phase_figure(spectral, fit, path: Path) -> Path:
    w_cm = spectral.grid.omegas() / ENERGY_HARTREE_PER_WAVENUMBER
    fig, ax1 = plt.subplots(figsize=(6.4, 4.0))
    ax1.plot(w_cm, spectral.phase, "b-", lw=1.2, label="optimized phase")
    if fit is not None and not fit.zero_curvature:
        w = spectral.grid.omegas()
        model = fit.offset + 0.5 * fit.beta0 * (w - fit.omega_c) ** 2
        ax1.plot(w_cm, model, "r--", lw=1.0,
                 label=f"quadratic fit ({fit.beta0_fs2:.0f} fs$^2$)")
    ax1.set_xlabel("frequency (cm$^{-1}$)")
    ax1.set_ylabel("phase (rad)")
    ax2 = ax1.twinx()
    ax2.plot(w_cm, spectral.amplitude, "k:", lw=0.8, alpha=0.6)
    ax2.set_ylabel("amplitude (a.u.)")
    ax1.legend(loc="upper center", fontsize=8)
    ax1.grid(alpha=0.3)
    return _save(fig, path)


def populations_figure(record, path: Path) -> Path:
    t_fs = record.stored_times() / TIME_AU_PER_FS
    pops = record.populations()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for n in range(pops.shape[1]):
        ax.plot(t_fs, pops[:, n], lw=1.2, label=f"$|{n + 1}\\rangle$")
    ax.set_xlabel("time (fs)")
    ax.set_ylabel("population")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="center left", fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def robustness_figure(scan, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    infid = np.maximum(scan.infidelities, 1e-16)
    ax.semilogy(scan.e0_values, infid, "o-", lw=1.2, ms=4)
    ax.axhline(1e-4, color="gray", ls="--", lw=0.8)
    ax.set_xlabel("field strength $\\mathcal{E}_0$ (a.u.)")
    ax.set_ylabel("infidelity $1 - P$")
    ax.grid(alpha=0.3, which="both")
    return _save(fig, path)


def history_figure(state, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    if state.history:
        its = [row[0] for row in state.history]
        objs = [row[2] for row in state.history]
        ax.semilogy(its, np.maximum(1.0 - np.array(objs), 1e-16), "-", lw=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("infidelity $1 - P$")
    ax.grid(alpha=0.3, which="both")
    return _save(fig, path)


def adiabatic_figure(trace, path: Path) -> Path:
    t_fs = trace.times / TIME_AU_PER_FS
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(t_fs, trace.adiabatic_populations[:, 0], lw=1.2, label="$|-\\rangle$")
    ax.plot(t_fs, trace.adiabatic_populations[:, 1], lw=1.2, label="$|+\\rangle$")
    ax.set_xlabel("time (fs)")
    ax.set_ylabel("adiabatic population")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def time_frequency_figure(tfmap, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    t_fs = tfmap.times / TIME_AU_PER_FS
    w_cm = tfmap.omegas / ENERGY_HARTREE_PER_WAVENUMBER
    mesh = ax.pcolormesh(t_fs, w_cm, tfmap.intensity.T, shading="auto",
                         cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="intensity")
    ax.set_xlabel("time (fs)")
    ax.set_ylabel("frequency (cm$^{-1}$)")
    return _save(fig, path)


def render_scenario_figures(figdir, spectral, field, record, state, scan, fit,
                            trace=None, tfmap=None) -> list[Path]:
    figdir = Path(figdir)
    paths = [
        phase_figure(spectral, fit, figdir / "phase.png"),
        populations_figure(record, figdir / "populations.png"),
        robustness_figure(scan, figdir / "robustness.png"),
        history_figure(state, figdir / "history.png"),
    ]
    if trace is not None:
        paths.append(adiabatic_figure(trace, figdir / "adiabatic.png"))
    if tfmap is not None:
        paths.append(time_frequency_figure(tfmap, figdir / "time_frequency.png"))
    return paths
