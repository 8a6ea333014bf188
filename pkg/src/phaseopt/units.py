"""Unit conversions and the coupled time/frequency grids.

Everything downstream works in Hartree atomic units (hbar = 1), so energies
and angular frequencies are interchangeable.  Conversions to the lab units
used in configs and output files (femtoseconds, wavenumbers) happen only at
the edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: atomic units of time per femtosecond
TIME_AU_PER_FS = 41.341374575751

#: Hartree per cm^-1 (hbar = 1, so this is also angular frequency in a.u.)
ENERGY_HARTREE_PER_WAVENUMBER = 4.5563352529e-6


@dataclass(frozen=True)
class UnitConstants:
    time_au_per_fs: float = TIME_AU_PER_FS
    energy_hartree_per_wavenumber: float = ENERGY_HARTREE_PER_WAVENUMBER


UNITS = UnitConstants()


def to_atomic_time(value_fs: float) -> float:
    """Convert a time from femtoseconds to atomic units."""
    return value_fs * TIME_AU_PER_FS


def from_atomic_time(value_au: float) -> float:
    """Convert a time from atomic units to femtoseconds."""
    return value_au / TIME_AU_PER_FS


def wavenumber_to_angular_frequency(value_invcm: float) -> float:
    """Convert an energy/frequency from cm^-1 to atomic units."""
    return value_invcm * ENERGY_HARTREE_PER_WAVENUMBER


def angular_frequency_to_wavenumber(value_au: float) -> float:
    """Convert an angular frequency from atomic units to cm^-1."""
    return value_au / ENERGY_HARTREE_PER_WAVENUMBER


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid over [t_start, t_end] with n_steps points.

    The spacing is dt = (t_end - t_start) / (n_steps - 1) and every node is
    generated by index arithmetic, t_k = t_start + k*dt, never by
    accumulation.
    """

    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self) -> None:
        if not (self.t_end > self.t_start):
            raise ValueError("t_end must exceed t_start")
        if self.n_steps < 2:
            raise ValueError("n_steps must be at least 2")

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / (self.n_steps - 1)

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def times(self) -> np.ndarray:
        return self.t_start + np.arange(self.n_steps) * self.dt

    def midpoints(self) -> np.ndarray:
        return self.t_start + (np.arange(self.n_steps - 1) + 0.5) * self.dt

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n_steps, self.dt)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid of angular frequencies, restricted to omega >= 0."""

    omega_min: float
    omega_max: float
    n_points: int

    def __post_init__(self) -> None:
        if self.omega_min < 0:
            raise ValueError("omega_min must be non-negative")
        if not (self.omega_max > self.omega_min):
            raise ValueError("omega_max must exceed omega_min")
        if self.n_points < 2:
            raise ValueError("n_points must be at least 2")

    @property
    def domega(self) -> float:
        return (self.omega_max - self.omega_min) / (self.n_points - 1)

    def omegas(self) -> np.ndarray:
        return self.omega_min + np.arange(self.n_points) * self.domega

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n_points, self.domega)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w


def make_grids(
    total_duration: float,
    n_steps: int,
    omega_center: float,
    omega_halfwidth: float,
    n_freq: int,
) -> tuple[TimeGrid, FrequencyGrid]:
    """Build the symmetric time window and the matching frequency band.

    The time grid is centered at t = 0 and spans [-T/2, +T/2]; the frequency
    grid spans [max(0, omega_center - omega_halfwidth), omega_center +
    omega_halfwidth].  All quantities are in atomic units.
    """
    if total_duration <= 0:
        raise ValueError("total_duration must be positive")
    if omega_center <= 0 or omega_halfwidth <= 0:
        raise ValueError("omega_center and omega_halfwidth must be positive")
    tgrid = TimeGrid(-0.5 * total_duration, 0.5 * total_duration, n_steps)
    fgrid = FrequencyGrid(
        max(0.0, omega_center - omega_halfwidth),
        omega_center + omega_halfwidth,
        n_freq,
    )
    return tgrid, fgrid
