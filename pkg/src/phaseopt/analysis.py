"""Post-optimization analysis: robustness scans, chirp extraction, adiabatic
frame decomposition and time-frequency maps."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    PropagationRecord,
    QuantumSystem,
    final_transfer_probability,
)
from .pulses import ChirpedPulseParams, SpectralField, TemporalField, synthesize
from .units import ENERGY_HARTREE_PER_WAVENUMBER, TIME_AU_PER_FS, TimeGrid


@dataclass(frozen=True)
class RobustnessScan:
    """Transfer probability against field-strength rescaling, phase fixed."""

    e0_values: np.ndarray
    probabilities: np.ndarray

    @property
    def infidelities(self) -> np.ndarray:
        return 1.0 - self.probabilities


def scan_robustness(
    system: QuantumSystem,
    spectral: SpectralField,
    tgrid: TimeGrid,
    initial: int,
    target: int,
    e0_values,
) -> RobustnessScan:
    """Propagate the fixed phase at each rescaled field strength."""
    e0_values = np.asarray(e0_values, dtype=float)
    if np.any(e0_values <= 0):
        raise ValueError("e0 values must be positive")
    probs = np.empty_like(e0_values)
    for k, e0 in enumerate(e0_values):
        scaled = spectral.scaled(e0 / spectral.e0)
        probs[k] = final_transfer_probability(
            system, synthesize(scaled, tgrid), initial, target
        )
    return RobustnessScan(e0_values, probs)


@dataclass(frozen=True)
class QuadraticFit:
    """Weighted quadratic fit of the phase: beta0/2 (w - omega_c)^2 + offset."""

    omega_c: float
    beta0: float
    phi1: float
    offset: float
    residual: float
    band: tuple[float, float]
    zero_curvature: bool = False

    @property
    def beta0_fs2(self) -> float:
        return self.beta0 / TIME_AU_PER_FS**2

    @property
    def omega_c_invcm(self) -> float:
        return self.omega_c / ENERGY_HARTREE_PER_WAVENUMBER


def fit_quadratic_phase(
    spectral: SpectralField,
    amplitude_threshold: float = 1e-3,
) -> QuadraticFit:
    """Fit phi(w) to a quadratic over the band where the amplitude lives.

    Least squares against {1, (w-w0), (w-w0)^2} with weights A(w)^2, then
    completed to the beta0/2 (w - omega_c)^2 form.  The residual is the
    weighted RMS over the band.
    """
    amp = spectral.amplitude
    band_mask = amp >= amplitude_threshold * np.max(amp)
    if int(np.sum(band_mask)) < 5:
        raise ValueError("amplitude band contains fewer than 5 points")
    w = spectral.grid.omegas()
    x = w[band_mask] - spectral.omega0
    y = spectral.phase[band_mask]
    wgt = amp[band_mask] ** 2
    design = np.stack([np.ones_like(x), x, x * x], axis=1)
    wd = design * wgt[:, None]
    coeffs = np.linalg.solve(design.T @ wd, wd.T @ y)
    c0, c1, c2 = (float(c) for c in coeffs)
    resid = y - design @ coeffs
    rms = float(np.sqrt(np.sum(wgt * resid**2) / np.sum(wgt)))
    band = (float(w[band_mask][0]), float(w[band_mask][-1]))
    beta0 = 2.0 * c2
    curvature_scale = abs(c0) + abs(c1) * np.max(np.abs(x)) + 1e-300
    if abs(c2) * np.max(x) ** 2 < 1e-12 * curvature_scale:
        return QuadraticFit(math.nan, 0.0, c1, c0, rms, band, zero_curvature=True)
    omega_c = spectral.omega0 - c1 / beta0
    offset = c0 - c1**2 / (2.0 * beta0)
    return QuadraticFit(omega_c, beta0, c1, offset, rms, band)


@dataclass(frozen=True)
class AdiabaticTrace:
    """Rotating-frame adiabatic decomposition of a two-level propagation."""

    times: np.ndarray
    detuning: np.ndarray
    rabi: np.ndarray
    mixing_angle: np.ndarray
    adiabatic_energies: np.ndarray   # (n, 2): E-, E+
    adiabatic_populations: np.ndarray  # (n, 2): |<-|psi>|^2, |<+|psi>|^2
    adiabaticity_ratio: np.ndarray

    @property
    def ground_population(self) -> np.ndarray:
        return self.adiabatic_populations[:, 0]


def adiabatic_decompose(
    system: QuantumSystem,
    chirp,
    record: PropagationRecord,
    e0: float,
    tau0: float,
) -> AdiabaticTrace:
    """Project a two-level propagation onto the instantaneous dressed states.

    `chirp` is a ChirpedPulseParams or a QuadraticFit; its quadratic
    coefficient fixes the linear sweep of the instantaneous carrier
    frequency, and a fitted linear component is honored as the time
    translation it physically is.  The lab-frame states are rotated with
    the full carrier phase, the rotating-wave Hamiltonian

        H = hbar/2 [[-Delta(t), Omega(t)], [Omega(t), Delta(t)]]

    is diagonalized at each stored time, and populations of its lower (|->)
    and upper (|+>) eigenvectors are reported.  The detuning convention is
    Delta(t) = delta - beta (t - t_shift) with delta the transition-minus-
    carrier offset, so a positive chirp sweeps the (1,1) entry from above
    to below resonance.
    """
    if system.n_levels != 2:
        raise ValueError("adiabatic decomposition is defined for two-level systems")
    beta0 = chirp.beta0
    if hasattr(chirp, "phi1") and beta0 != 0.0:
        # quadratic fit: recover the spectrum-centered expansion.  The
        # linear term translates the envelope in time by phi1 and the
        # constant offsets the carrier.
        phi1 = chirp.phi1
        omega_center = chirp.omega_c + phi1 / beta0
        phi0 = chirp.offset + phi1**2 / (2.0 * beta0)
    else:
        phi1 = 0.0
        omega_center = chirp.omega0 if hasattr(chirp, "omega0") else chirp.omega_c
        phi0 = 0.0
    params = ChirpedPulseParams(e0=e0, tau0=tau0, beta0=beta0, omega0=omega_center)
    t = record.stored_times()
    ts = t - phi1
    beta = params.beta
    delta = float(system.energies[1] - system.energies[0]) - omega_center
    detuning = delta - beta * ts
    mu12 = float(system.dipole[0, 1])
    e0_eff = e0 * params.f
    rabi = -mu12 * e0_eff * np.exp(-(ts**2) / (2.0 * params.tau**2))
    mixing = 0.5 * np.arctan2(np.abs(rabi), detuning)
    esplit = 0.5 * np.sqrt(rabi**2 + detuning**2)
    energies = np.stack([-esplit, esplit], axis=1)

    # the frame rotation absorbs the full carrier phase (including the
    # closed-form varphi and the fitted constant), which leaves a real
    # rotating-wave coupling
    phi_t = omega_center * t + 0.5 * beta * ts**2 + params.varphi - phi0
    a1 = record.states[:, 0]
    a2 = record.states[:, 1] * np.exp(1j * phi_t)

    pops = np.empty((t.size, 2))
    for k in range(t.size):
        h = 0.5 * np.array(
            [[-detuning[k], rabi[k]],
             [rabi[k], detuning[k]]]
        )
        vals, vecs = np.linalg.eigh(h)
        amp_minus = np.conj(vecs[:, 0]) @ np.array([a1[k], a2[k]])
        amp_plus = np.conj(vecs[:, 1]) @ np.array([a1[k], a2[k]])
        pops[k, 0] = abs(amp_minus) ** 2
        pops[k, 1] = abs(amp_plus) ** 2

    absr = np.abs(rabi)
    drdt = absr * (-ts / params.tau**2)
    denom2 = detuning**2 + rabi**2
    with np.errstate(invalid="ignore", divide="ignore"):
        theta_dot = (detuning * drdt + absr * beta) / (2.0 * denom2)
        ratio = np.abs(theta_dot) / np.sqrt(denom2)
    ratio = np.where(denom2 > 0, ratio, np.inf)
    return AdiabaticTrace(t, detuning, rabi, mixing, energies, pops, ratio)


@dataclass(frozen=True)
class TimeFrequencyMap:
    """Gabor (windowed Fourier) intensity map of a real field."""

    times: np.ndarray
    omegas: np.ndarray
    intensity: np.ndarray  # (n_times, n_omegas)

    def total_energy(self) -> float:
        """Trapezoid integral over both axes; normalized to Int E^2 dt."""
        inner = np.trapezoid(self.intensity, self.omegas, axis=1)
        return float(np.trapezoid(inner, self.times))


def time_frequency_map(
    field: TemporalField,
    window_width: float,
    out_times: np.ndarray | None = None,
    out_omegas: np.ndarray | None = None,
    n_times: int = 160,
    n_omegas: int = 240,
) -> TimeFrequencyMap:
    """Gabor transform with a unit-energy Gaussian window of std window_width.

    The intensity is |STFT|^2 / pi so that integrating the map over its full
    time-frequency extent reproduces the field energy Int E^2 dt (the
    positive-frequency half carries half of Parseval's 2 pi Int E^2, and the
    window is L2-normalized).
    """
    if window_width <= 0:
        raise ValueError("window_width must be positive")
    t = field.grid.times()
    dt = field.grid.dt
    if out_times is None:
        out_times = np.linspace(t[0], t[-1], n_times)
    if out_omegas is None:
        spectrum = np.fft.rfft(field.values)
        freqs = 2.0 * math.pi * np.fft.rfftfreq(t.size, d=dt)
        mag = np.abs(spectrum)
        peak = int(np.argmax(mag))
        keep = np.nonzero(mag > 1e-3 * mag[peak])[0]
        lo, hi = freqs[keep[0]], freqs[keep[-1]]
        center, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        out_omegas = np.linspace(max(0.0, center - 1.5 * half),
                                 center + 1.5 * half, n_omegas)
    norm = (math.pi * window_width**2) ** -0.25
    support = int(math.ceil(6.0 * window_width / dt))
    intensity = np.empty((out_times.size, out_omegas.size))
    for k, tc in enumerate(out_times):
        center_idx = int(round((tc - t[0]) / dt))
        lo = max(0, center_idx - support)
        hi = min(t.size, center_idx + support + 1)
        x = t[lo:hi] - tc
        windowed = field.values[lo:hi] * norm * np.exp(-(x**2) / (2.0 * window_width**2))
        kernel = np.exp(1j * np.outer(out_omegas, t[lo:hi]))
        stft = kernel @ windowed * dt
        intensity[k] = np.abs(stft) ** 2 / math.pi
    return TimeFrequencyMap(out_times, out_omegas, intensity)


def robustness_to_csv(scan: RobustnessScan, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["e0_au", "probability", "infidelity"])
        for e0, p in zip(scan.e0_values, scan.probabilities):
            w.writerow([repr(float(e0)), repr(float(p)), repr(float(1.0 - p))])


def fit_to_csv(fit: QuadraticFit, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega_c_invcm", "beta0_fs2", "phi1", "offset", "residual"])
        w.writerow([repr(fit.omega_c_invcm), repr(fit.beta0_fs2),
                    repr(fit.phi1), repr(fit.offset), repr(fit.residual)])


def adiabatic_to_csv(trace: AdiabaticTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_fs", "pop_minus", "pop_plus", "mixing_angle",
                    "adiabaticity_ratio"])
        for k in range(trace.times.size):
            w.writerow([
                repr(float(trace.times[k] / TIME_AU_PER_FS)),
                repr(float(trace.adiabatic_populations[k, 0])),
                repr(float(trace.adiabatic_populations[k, 1])),
                repr(float(trace.mixing_angle[k])),
                repr(float(trace.adiabaticity_ratio[k])),
            ])


def map_to_csv(tfmap: TimeFrequencyMap, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_fs", "omega_invcm", "intensity"])
        for i, tc in enumerate(tfmap.times):
            for j, om in enumerate(tfmap.omegas):
                w.writerow([
                    repr(float(tc / TIME_AU_PER_FS)),
                    repr(float(om / ENERGY_HARTREE_PER_WAVENUMBER)),
                    repr(float(tfmap.intensity[i, j])),
                ])
