"""Spectral fields with a fixed amplitude and a shapeable phase.

The real temporal field is the positive-frequency integral

    E(t) = Re  Int_0^inf  A(w) exp(i phi(w)) exp(-i w t) dw,

evaluated by trapezoid quadrature on the frequency grid.  Because both grids
are uniform the quadrature sum is a chirp z-transform, which scipy evaluates
exactly (to roundoff) in O(n log n).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import czt

from .units import (
    ENERGY_HARTREE_PER_WAVENUMBER,
    TIME_AU_PER_FS,
    FrequencyGrid,
    TimeGrid,
)

EDGE_AMPLITUDE_FRACTION = 1e-6


@dataclass(frozen=True)
class SpectralField:
    """Spectral amplitude and phase samples on a frequency grid.

    The amplitude is fixed at construction; phase-only shaping goes through
    :meth:`with_phase`, which returns a new field sharing the amplitude.
    """

    grid: FrequencyGrid
    amplitude: np.ndarray
    phase: np.ndarray
    omega0: float
    delta_omega: float
    e0: float

    def __post_init__(self) -> None:
        amp = np.asarray(self.amplitude, dtype=float)
        ph = np.asarray(self.phase, dtype=float)
        if amp.shape != (self.grid.n_points,) or ph.shape != (self.grid.n_points,):
            raise ValueError("amplitude/phase length must match the grid")
        if not np.all(np.isfinite(amp)) or not np.all(np.isfinite(ph)):
            raise ValueError("amplitude and phase must be finite")
        if np.any(amp < 0):
            raise ValueError("amplitude must be non-negative")
        amp = amp.copy()
        ph = ph.copy()
        amp.flags.writeable = False
        ph.flags.writeable = False
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "phase", ph)

    def with_phase(self, phase: np.ndarray) -> "SpectralField":
        """Return a new field with the same amplitude and the given phase."""
        return SpectralField(self.grid, self.amplitude, phase,
                             self.omega0, self.delta_omega, self.e0)

    def scaled(self, factor: float) -> "SpectralField":
        """Rescale the amplitude uniformly (field-strength variation)."""
        if factor < 0:
            raise ValueError("scale factor must be non-negative")
        return SpectralField(self.grid, self.amplitude * factor, self.phase,
                             self.omega0, self.delta_omega, self.e0 * factor)


def set_phase(spectral: SpectralField, phase: np.ndarray) -> SpectralField:
    """Replace the spectral phase, keeping the amplitude untouched."""
    return spectral.with_phase(phase)


@dataclass(frozen=True)
class TemporalField:
    """Real electric-field samples on a uniform time grid."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_steps,):
            raise ValueError("values length must match the time grid")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def energy(self) -> float:
        """Trapezoid integral of E^2 over the window."""
        return float(np.sum(self.grid.trapezoid_weights() * self.values**2))


def gaussian_amplitude(
    e0: float,
    omega0: float,
    delta_omega: float,
    grid: FrequencyGrid,
) -> SpectralField:
    """Gaussian spectral amplitude of unit mass times e0, with zero phase.

    A(w) = e0 * sqrt(1 / (2 pi dW^2)) * exp(-(w - w0)^2 / (2 dW^2)), so the
    zero-phase temporal field is e0 * exp(-t^2/(2 tau0^2)) * cos(w0 t) with
    tau0 = 1/dW.
    """
    if e0 <= 0:
        raise ValueError("e0 must be positive")
    if delta_omega <= 0:
        raise ValueError("delta_omega must be positive")
    w = grid.omegas()
    amp = e0 * math.sqrt(1.0 / (2.0 * math.pi * delta_omega**2)) * np.exp(
        -((w - omega0) ** 2) / (2.0 * delta_omega**2)
    )
    return SpectralField(grid, amp, np.zeros(grid.n_points), omega0, delta_omega, e0)


def synthesize_at(spectral: SpectralField, times: np.ndarray) -> np.ndarray:
    """Evaluate the synthesized field at arbitrary time points (direct sum)."""
    w = spectral.grid.omegas()
    x = spectral.grid.trapezoid_weights() * spectral.amplitude
    t = np.atleast_1d(np.asarray(times, dtype=float))
    # E(t) = sum_j w_j A_j cos(w_j t - phi_j)
    return np.cos(np.outer(t, w) - spectral.phase[None, :]) @ x


def _czt_time_sum(x: np.ndarray, fgrid: FrequencyGrid, tgrid: TimeGrid,
                  n_out: int, t0: float) -> np.ndarray:
    """sum_j x_j exp(-i w_j t_k) for t_k = t0 + k*dt, k = 0..n_out-1."""
    dt = tgrid.dt
    dw = fgrid.domega
    t = t0 + np.arange(n_out) * dt
    out = czt(x, m=n_out, w=np.exp(-1j * dw * dt), a=np.exp(1j * dw * t0))
    return np.exp(-1j * fgrid.omega_min * t) * out


def synthesize(spectral: SpectralField, tgrid: TimeGrid) -> TemporalField:
    """Synthesize the real temporal field on a time grid.

    Warns when the spectral amplitude at the band edges exceeds
    EDGE_AMPLITUDE_FRACTION of its peak, since the positive-frequency
    integral is then visibly truncated.
    """
    amp = spectral.amplitude
    peak = float(np.max(amp))
    if peak > 0 and max(amp[0], amp[-1]) > EDGE_AMPLITUDE_FRACTION * peak:
        warnings.warn(
            "spectral amplitude is not negligible at the grid edges; "
            "the synthesized field is truncated in frequency",
            stacklevel=2,
        )
    x = spectral.grid.trapezoid_weights() * amp * np.exp(1j * spectral.phase)
    values = _czt_time_sum(x, spectral.grid, tgrid, tgrid.n_steps, tgrid.t_start).real
    return TemporalField(tgrid, values)


def synthesize_midpoints(spectral: SpectralField, tgrid: TimeGrid) -> np.ndarray:
    """Field values at the n_steps-1 midpoints of a time grid."""
    x = spectral.grid.trapezoid_weights() * spectral.amplitude * np.exp(1j * spectral.phase)
    t0 = tgrid.t_start + 0.5 * tgrid.dt
    return _czt_time_sum(x, spectral.grid, tgrid, tgrid.n_steps - 1, t0).real


@dataclass(frozen=True)
class ChirpedPulseParams:
    """Closed-form parameters of a Gaussian pulse with quadratic phase.

    beta0 is the quadratic spectral phase coefficient phi(w) =
    beta0/2 (w - omega0)^2; tau0 the transform-limited duration.  Derived
    quantities follow from sqrt(tau0^2/(tau0^2 - i beta0)) = f exp(-i varphi).
    """

    e0: float
    tau0: float
    beta0: float
    omega0: float

    def __post_init__(self) -> None:
        if self.tau0 <= 0:
            raise ValueError("tau0 must be positive")

    @property
    def beta(self) -> float:
        """Temporal chirp rate beta = beta0 / (tau0^4 + beta0^2)."""
        return self.beta0 / (self.tau0**4 + self.beta0**2)

    @property
    def tau(self) -> float:
        """Stretched duration tau = tau0 sqrt(1 + beta0^2 / tau0^4)."""
        return self.tau0 * math.sqrt(1.0 + (self.beta0 / self.tau0**2) ** 2)

    @property
    def f(self) -> float:
        """Peak reduction factor (1 + beta0^2/tau0^4)^(-1/4)."""
        return (1.0 + (self.beta0 / self.tau0**2) ** 2) ** -0.25

    @property
    def varphi(self) -> float:
        """Carrier phase offset, principal branch: atan2(-beta0, tau0^2)/2."""
        return 0.5 * math.atan2(-self.beta0, self.tau0**2)


def chirped_field(params: ChirpedPulseParams, tgrid: TimeGrid) -> TemporalField:
    """Closed-form chirped field E0 f exp(-t^2/2 tau^2) cos[(beta/2 t + w0) t + varphi]."""
    t = tgrid.times()
    envelope = params.e0 * params.f * np.exp(-(t**2) / (2.0 * params.tau**2))
    values = envelope * np.cos((0.5 * params.beta * t + params.omega0) * t + params.varphi)
    return TemporalField(tgrid, values)


def spectral_to_csv(spectral: SpectralField, path) -> None:
    with open(path, "w", newline="") as fh:
        wcsv = csv.writer(fh)
        wcsv.writerow(["omega_invcm", "amplitude_au", "phase_rad"])
        for w, a, p in zip(spectral.grid.omegas(), spectral.amplitude, spectral.phase):
            wcsv.writerow([repr(float(w / ENERGY_HARTREE_PER_WAVENUMBER)),
                           repr(float(a)), repr(float(p))])


def temporal_to_csv(field: TemporalField, path) -> None:
    with open(path, "w", newline="") as fh:
        wcsv = csv.writer(fh)
        wcsv.writerow(["time_fs", "field_au"])
        for t, v in zip(field.grid.times(), field.values):
            wcsv.writerow([repr(float(t / TIME_AU_PER_FS)), repr(float(v))])
