"""N-level quantum systems and Schrodinger propagation through a pulse.

The propagator is piecewise constant: over each time step the Hamiltonian is
frozen at H0 - mu * E_mid (E_mid the mean of the two adjacent field samples)
and applied through its exact eigendecomposition exponential.  Each step is
unitary to roundoff, so norm is conserved over any number of steps; accuracy
in dt is second order.  No rotating-wave approximation anywhere here.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .units import ENERGY_HARTREE_PER_WAVENUMBER, TIME_AU_PER_FS, TimeGrid
from .pulses import TemporalField

#: target number of stored state snapshots when no stride is given
DEFAULT_SNAPSHOTS = 2000


@dataclass(frozen=True)
class QuantumSystem:
    """Level energies and the (real, symmetric, zero-diagonal) dipole matrix."""

    energies: np.ndarray
    dipole: np.ndarray

    def __post_init__(self) -> None:
        en = np.asarray(self.energies, dtype=float)
        mu = np.asarray(self.dipole, dtype=float)
        n = en.shape[0]
        if n < 2:
            raise ValueError("need at least two levels")
        if mu.shape != (n, n):
            raise ValueError("dipole matrix shape must match the level count")
        if not np.allclose(mu, mu.T, rtol=0, atol=1e-14):
            raise ValueError("dipole matrix must be symmetric")
        if np.max(np.abs(np.diag(mu))) > 1e-14:
            raise ValueError("dipole matrix must have zero diagonal")
        en = en.copy(); en.flags.writeable = False
        mu = mu.copy(); mu.flags.writeable = False
        object.__setattr__(self, "energies", en)
        object.__setattr__(self, "dipole", mu)

    @property
    def n_levels(self) -> int:
        return self.energies.shape[0]

    def hamiltonian0(self) -> np.ndarray:
        return np.diag(self.energies)

    def transition_frequency(self, a: int, b: int) -> float:
        """omega_ab = |E_b - E_a| in atomic units."""
        return abs(float(self.energies[b] - self.energies[a]))


def two_level_system(transition_invcm: float = 12500.0, mu12: float = 1.0) -> QuantumSystem:
    """Abstract two-level system: E1 = 0, E2 = transition, mu12 symmetric."""
    e2 = transition_invcm * ENERGY_HARTREE_PER_WAVENUMBER
    return QuantumSystem(np.array([0.0, e2]),
                         np.array([[0.0, mu12], [mu12, 0.0]]))


def rubidium_system() -> QuantumSystem:
    """Rb-87 5s/5p three-level system; the 2<->3 transition is dipole forbidden."""
    e = np.array([0.0, 12578.95, 12816.55]) * ENERGY_HARTREE_PER_WAVENUMBER
    mu = np.array([
        [0.0, 2.9931, 4.2275],
        [2.9931, 0.0, 0.0],
        [4.2275, 0.0, 0.0],
    ])
    return QuantumSystem(e, mu)


def normalize_state(system: QuantumSystem, initial) -> np.ndarray:
    """Accept a level index or coefficient vector; return a checked state vector."""
    if np.isscalar(initial):
        idx = int(initial)
        if not 0 <= idx < system.n_levels:
            raise IndexError("initial level index out of range")
        psi = np.zeros(system.n_levels, dtype=complex)
        psi[idx] = 1.0
        return psi
    psi = np.asarray(initial, dtype=complex)
    if psi.shape != (system.n_levels,):
        raise ValueError("state vector length must match the level count")
    norm = float(np.sum(np.abs(psi) ** 2))
    if abs(norm - 1.0) > 1e-10:
        raise ValueError("initial state must be normalized")
    return psi.copy()


@dataclass(frozen=True)
class PropagationRecord:
    """States stored on a strided subset of the grid plus the final unitary."""

    grid: TimeGrid
    store_indices: np.ndarray
    states: np.ndarray          # (n_stored, N) complex
    final_unitary: np.ndarray   # (N, N) complex
    initial: np.ndarray         # (N,) complex

    def stored_times(self) -> np.ndarray:
        return self.grid.times()[self.store_indices]

    def populations(self) -> np.ndarray:
        return np.abs(self.states) ** 2

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _midpoint_fields(field: TemporalField) -> np.ndarray:
    v = field.values
    return 0.5 * (v[:-1] + v[1:])


def _step_eigensystems(system: QuantumSystem, e_mid: np.ndarray):
    """Batched eigendecomposition of H0 - mu*E for every step."""
    h = system.hamiltonian0()[None, :, :] - system.dipole[None, :, :] * e_mid[:, None, None]
    return np.linalg.eigh(h)


def _step_unitaries(lam: np.ndarray, vec: np.ndarray, dt: float) -> np.ndarray:
    phases = np.exp(-1j * lam * dt)
    return np.einsum("kab,kb,kcb->kac", vec, phases, vec)


def _prefix_products(u: np.ndarray) -> np.ndarray:
    """p[k] = u[k] @ u[k-1] @ ... @ u[0] for every step k."""
    p = np.empty_like(u)
    p[0] = u[0]
    for k in range(1, u.shape[0]):
        np.matmul(u[k], p[k - 1], out=p[k])
    return p


def _final_unitary(u: np.ndarray, n: int) -> np.ndarray:
    p = np.eye(n, dtype=complex)
    for k in range(u.shape[0]):
        p = u[k] @ p
    return p


def default_stride(n_steps: int) -> int:
    return max(1, (n_steps - 1) // DEFAULT_SNAPSHOTS)


def propagate(
    system: QuantumSystem,
    field: TemporalField,
    initial,
    store_stride: int | None = None,
) -> PropagationRecord:
    """Propagate through the field, recording strided states and U(t_f, t_i)."""
    psi0 = normalize_state(system, initial)
    tgrid = field.grid
    stride = default_stride(tgrid.n_steps) if store_stride is None else int(store_stride)
    if stride < 1:
        raise ValueError("store_stride must be positive")
    lam, vec = _step_eigensystems(system, _midpoint_fields(field))
    u = _step_unitaries(lam, vec, tgrid.dt)
    n = system.n_levels
    m = u.shape[0]
    idx = np.arange(0, m + 1, stride)
    if idx[-1] != m:
        idx = np.append(idx, m)
    states = np.empty((idx.size, n), dtype=complex)
    states[0] = psi0
    p = np.eye(n, dtype=complex)
    pos = 1
    for k in range(m):
        p = u[k] @ p
        if pos < idx.size and idx[pos] == k + 1:
            states[pos] = p @ psi0
            pos += 1
    return PropagationRecord(tgrid, idx, states, p, psi0)


def transfer_probability(record: PropagationRecord, target_index: int) -> float:
    """|<target| U(t_f, t_i) |initial>|^2."""
    n = record.final_unitary.shape[0]
    if not 0 <= target_index < n:
        raise IndexError("target level index out of range")
    amp = record.final_unitary[target_index] @ record.initial
    return float(abs(amp) ** 2)


def final_transfer_probability(
    system: QuantumSystem,
    field: TemporalField,
    initial,
    target_index: int,
) -> float:
    """Propagate without storing history and return P_{i->f}(t_f)."""
    psi0 = normalize_state(system, initial)
    lam, vec = _step_eigensystems(system, _midpoint_fields(field))
    u = _step_unitaries(lam, vec, field.grid.dt)
    uf = _final_unitary(u, system.n_levels)
    return float(abs(uf[target_index] @ psi0) ** 2)


def analytic_rabi_probability(
    e0: float,
    mu12: float,
    tau0: float,
    tgrid: TimeGrid,
) -> float:
    """Resonant Rabi transfer for a transform-limited Gaussian pulse.

    The pulse area is Theta = mu12 * e0 * Int exp(-t^2/(2 tau0^2)) dt over the
    window, and P = sin^2(Theta/2); a pi pulse (Theta = pi) inverts fully.
    The window integral is evaluated with erf, which for the usual T = 100
    tau0 window is the complete Gaussian integral.
    """
    s = math.sqrt(2.0) * tau0
    integral = tau0 * math.sqrt(2.0 * math.pi) * 0.5 * (
        math.erf(tgrid.t_end / s) - math.erf(tgrid.t_start / s)
    )
    theta = e0 * mu12 * integral
    return math.sin(theta / 2.0) ** 2


def pi_pulse_strength(mu12: float, tau0: float) -> float:
    """Field strength whose pulse area is exactly pi (complete inversion)."""
    return math.pi / (mu12 * math.sqrt(2.0 * math.pi) * tau0)


def record_to_csv(record: PropagationRecord, path) -> None:
    pops = record.populations()
    n = pops.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_fs"] + [f"pop_{k + 1}" for k in range(n)])
        for t, row in zip(record.stored_times(), pops):
            w.writerow([repr(float(t / TIME_AU_PER_FS))] + [repr(float(x)) for x in row])
