"""Constrained, filtered gradient flow over the spectral phase.

Each iteration assembles the objective and constraint gradient densities,
smooths them with a Gaussian frequency kernel, combines them through the
inverse of the 3x3 Gram matrix so that the two field-endpoint equality
constraints are preserved to first order, and takes an Euler step whose size
is controlled by a monotonic backtracking line search.  Euler steps preserve
the constraints only to first order, so after every trial step a small
Newton correction along the raw constraint gradients restores the endpoint
values to well inside the drift budget; a step is accepted only if the
restored phase does not decrease the objective.

The flow direction is invariant under positive rescaling of the kernel and
of the direction itself, so the implementation normalizes the direction to
unit peak and lets the step length carry the scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from functools import lru_cache

import numpy as np

from .dynamics import QuantumSystem, final_transfer_probability
from .gradients import GradientBundle, constraint_gradients, gradient_with_noise_floor
from .pulses import SpectralField, synthesize, synthesize_at
from .units import FrequencyGrid, TimeGrid

#: kernel values below this are truncated to zero
KERNEL_FLOOR = 1e-11

#: seed threshold: gradient norm^2 below this multiple of the roundoff
#: floor counts as numerically null.  Measured zero-phase (pure roundoff)
#: ratios grow from ~1e2 at 2^12 steps to ~2e6 at 2^16 steps while any
#: seeded/physical gradient sits at >= 1e15, so 1e10 splits them with
#: orders of magnitude to spare on both sides.
SEED_NOISE_FACTOR = 1e10


@dataclass(frozen=True)
class FilterSpec:
    """Gaussian frequency filter S(d) = amplitude * exp(-4 ln2 d^2 / sigma^2).

    FWHM equals sigma.  The amplitude is physically irrelevant (the update
    direction is invariant under positive rescaling of the kernel) and
    exists so that invariance can be exercised directly.
    """

    sigma: float
    enabled: bool = True
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if self.enabled and not self.sigma > 0:
            raise ValueError("sigma must be positive when the filter is enabled")
        if self.enabled and not self.amplitude > 0:
            raise ValueError("amplitude must be positive when the filter is enabled")

    @classmethod
    def disabled(cls) -> "FilterSpec":
        return cls(sigma=1.0, enabled=False)


@lru_cache(maxsize=8)
def _kernel_matrix(grid: FrequencyGrid, sigma: float) -> np.ndarray:
    w = grid.omegas()
    d = w[:, None] - w[None, :]
    s = np.exp(-4.0 * math.log(2.0) * d**2 / sigma**2)
    s[s < KERNEL_FLOOR] = 0.0
    s.flags.writeable = False
    return s


def apply_filter(values: np.ndarray, filt: FilterSpec, grid: FrequencyGrid) -> np.ndarray:
    """Convolve with the kernel: out(w) = sum_w' S(w'-w) in(w') dw'."""
    if not filt.enabled:
        return np.array(values, dtype=float, copy=True)
    out = _kernel_matrix(grid, filt.sigma) @ (grid.trapezoid_weights() * values)
    if filt.amplitude != 1.0:
        out *= filt.amplitude
    return out


def gamma_matrix(bundle: GradientBundle, filt: FilterSpec, grid: FrequencyGrid) -> np.ndarray:
    """Gram matrix Gamma_ll' = Int dQ_l/dphi (S * dQ_l'/dphi) dw.

    The bilinear form is symmetric for the symmetric kernel, so the matrix
    is built from its upper triangle: entries are exactly symmetric rather
    than symmetric up to a summation-order-dependent roundoff that the
    integrand's cancellations would otherwise amplify.
    """
    dens = (bundle.dQ0_dphi, bundle.dQ1_dphi, bundle.dQ2_dphi)
    filtered = [apply_filter(g, filt, grid) for g in dens]
    ww = grid.trapezoid_weights()
    gam = np.empty((3, 3))
    for a in range(3):
        for b in range(a, 3):
            val = float(np.sum(ww * dens[a] * filtered[b]))
            gam[a, b] = val
            gam[b, a] = val
    return gam


@dataclass
class DirectionDiagnostics:
    gamma: np.ndarray
    gamma_rank: int
    rank_deficient: bool


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs of the flow; defaults follow the desk-scale reproduction runs."""

    filter: FilterSpec = FilterSpec.disabled()
    max_iterations: int = 2000
    target_objective: float = 0.9999
    initial_step: float = 0.02        # radians of peak phase change
    step_grow: float = 2.0
    step_shrink: float = 0.5
    max_step: float = 0.35
    min_step: float = 1e-12
    gamma_rcond: float = 1e-10
    constraints_enabled: bool = True
    drift_budget_rel: float = 2.5e-7  # of e0; criterion is 1e-6
    seed_enabled: bool = True
    seed_amplitude: float = 1e-4      # radians at (w - w0) tau0 = 1
    stall_improvement: float = 1e-12
    stall_iterations: int = 20

    def __post_init__(self) -> None:
        if not (0.0 < self.target_objective <= 1.0):
            raise ValueError("target_objective must lie in (0, 1]")
        for name in ("max_iterations", "initial_step", "step_grow", "step_shrink",
                     "max_step", "min_step", "gamma_rcond", "drift_budget_rel"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class OptimizationState:
    """Snapshot of the flow: current phase, objective and per-iteration history."""

    s: float
    phase: np.ndarray
    objective: float
    constraint_values: tuple[float, float]
    step: float
    iteration: int
    history: list[tuple[int, float, float, float, float, float]] = dataclass_field(
        default_factory=list
    )  # (iteration, s, objective, step, drift_ti, drift_tf)
    converged: bool = False
    stagnated: bool = False
    zero_gradient: bool = False
    seeded: bool = False
    gamma_rank_deficient: bool = False
    gamma_max_asymmetry: float = 0.0
    gamma_min_eig_ratio: float = 1.0
    message: str = ""


def update_direction(
    bundle: GradientBundle,
    filt: FilterSpec,
    grid: FrequencyGrid,
    config: OptimizerConfig,
) -> tuple[np.ndarray, DirectionDiagnostics]:
    """Flow direction d phi/d s combining objective and constraint gradients.

    With constraints enabled the direction is sum_l [Gamma^+]_{0l} (S * dQ_l),
    which makes dQ0/ds = 1 and dQ1/ds = dQ2/ds = 0 exactly in the discrete
    inner product.  Gamma is inverted by pseudo-inverse with a relative
    cutoff; rank deficiency is reported, not fatal.  Without constraints the
    direction is the (filtered) objective gradient itself.
    """
    if not config.constraints_enabled:
        direction = apply_filter(bundle.dQ0_dphi, filt, grid)
        diag = DirectionDiagnostics(np.zeros((3, 3)), 0, False)
        return direction, diag
    gam = gamma_matrix(bundle, filt, grid)
    filtered = [apply_filter(g, filt, grid)
                for g in (bundle.dQ0_dphi, bundle.dQ1_dphi, bundle.dQ2_dphi)]
    # canonical normalization: any positive rescaling of the kernel scales
    # the filtered arrays and Gamma by the same factor and cancels exactly
    # in the direction; dividing it out up front keeps the cancellation
    # exact to a few ulp instead of being amplified by Gamma's conditioning
    # inside the pseudo-inverse
    scale = float(np.max(np.abs(filtered[0])))
    if scale > 0.0:
        filtered = [f / scale for f in filtered]
        gam_scaled = gam / scale
    else:
        gam_scaled = gam
    sv = np.linalg.svd(gam_scaled, compute_uv=False)
    rank = int(np.sum(sv > config.gamma_rcond * sv[0])) if sv[0] > 0 else 0
    gam_inv = np.linalg.pinv(gam_scaled, rcond=config.gamma_rcond)
    direction = (gam_inv[0, 0] * filtered[0]
                 + gam_inv[0, 1] * filtered[1]
                 + gam_inv[0, 2] * filtered[2])
    return direction, DirectionDiagnostics(gam, rank, rank < 3)


def _endpoint(spectral: SpectralField, t: float) -> float:
    return float(synthesize_at(spectral, np.array([t]))[0])


def _restore_constraints(
    spectral: SpectralField,
    phase: np.ndarray,
    tgrid: TimeGrid,
    targets: tuple[float, float],
    budget: float,
) -> tuple[np.ndarray, float]:
    """Newton correction along the raw constraint gradients.

    Returns the corrected phase and the remaining endpoint residual.
    """
    ww = spectral.grid.trapezoid_weights()
    residual = math.inf
    for _ in range(10):
        trial = spectral.with_phase(phase)
        r1 = _endpoint(trial, tgrid.t_start) - targets[0]
        r2 = _endpoint(trial, tgrid.t_end) - targets[1]
        residual = max(abs(r1), abs(r2))
        if residual < 1e-3 * budget:
            break
        dens1, dens2 = constraint_gradients(trial, tgrid.t_start, tgrid.t_end)
        n1 = float(np.max(np.abs(dens1)))
        n2 = float(np.max(np.abs(dens2)))
        u1 = dens1 / n1 if n1 > 0 else dens1
        u2 = dens2 / n2 if n2 > 0 else dens2
        g1 = ww * dens1
        g2 = ww * dens2
        jac = np.array([[g1 @ u1, g1 @ u2], [g2 @ u1, g2 @ u2]])
        try:
            corr = np.linalg.pinv(jac, rcond=1e-12) @ (-np.array([r1, r2]))
        except np.linalg.LinAlgError:
            break
        phase = phase + corr[0] * u1 + corr[1] * u2
    trial = spectral.with_phase(phase)
    r1 = _endpoint(trial, tgrid.t_start) - targets[0]
    r2 = _endpoint(trial, tgrid.t_end) - targets[1]
    return phase, max(abs(r1), abs(r2))


def optimize(
    system: QuantumSystem,
    spectral0: SpectralField,
    tgrid: TimeGrid,
    initial: int,
    target: int,
    config: OptimizerConfig,
) -> tuple[SpectralField, OptimizationState]:
    """Run the flow from spectral0 until the objective target or stagnation.

    A step is accepted only if the objective does not decrease, so the
    accepted-objective sequence is non-decreasing by construction.  If the
    starting gradient is numerically null (the resonant two-level problem is
    exactly stationary at zero phase by time-reversal symmetry), a minuscule
    deterministic quadratic seed phase breaks the degeneracy; the constraint
    targets are taken after seeding.
    """
    grid = spectral0.grid
    e0 = spectral0.e0
    spectral = spectral0
    tau_scale = 1.0 / spectral0.delta_omega

    p, d0, noise = gradient_with_noise_floor(system, spectral, tgrid, initial, target)
    ww = grid.trapezoid_weights()
    seeded = False
    if config.seed_enabled and float(np.max(np.abs(d0))) > 0.0:
        if np.sum(ww * d0 * d0) < SEED_NOISE_FACTOR * np.sum(ww * noise * noise):
            seed = config.seed_amplitude * ((grid.omegas() - spectral0.omega0) * tau_scale) ** 2
            spectral = spectral.with_phase(spectral.phase + seed)
            p, d0, noise = gradient_with_noise_floor(system, spectral, tgrid, initial, target)
            seeded = True

    targets = (_endpoint(spectral, tgrid.t_start), _endpoint(spectral, tgrid.t_end))
    budget = config.drift_budget_rel * e0

    state = OptimizationState(
        s=0.0,
        phase=np.array(spectral.phase, copy=True),
        objective=p,
        constraint_values=targets,
        step=config.initial_step,
        iteration=0,
        seeded=seeded,
    )

    if p >= config.target_objective:
        state.converged = True
        state.message = "target objective already met by the initial field"
        return spectral, state

    if float(np.max(np.abs(d0))) == 0.0:
        state.zero_gradient = True
        state.stagnated = True
        state.message = "objective gradient is identically zero"
        return spectral, state

    ds = config.initial_step
    stall_count = 0
    for it in range(1, config.max_iterations + 1):
        d1, d2 = constraint_gradients(spectral, tgrid.t_start, tgrid.t_end)
        bundle = GradientBundle(d0, d1, d2)
        direction, diag = update_direction(bundle, config.filter, grid, config)
        state.gamma_rank_deficient |= diag.rank_deficient
        if config.constraints_enabled:
            gam = diag.gamma
            scale = float(np.max(np.abs(gam)))
            if scale > 0:
                asym = float(np.max(np.abs(gam - gam.T))) / scale
                state.gamma_max_asymmetry = max(state.gamma_max_asymmetry, asym)
                eigs = np.linalg.eigvalsh(0.5 * (gam + gam.T))
                if eigs[-1] > 0:
                    state.gamma_min_eig_ratio = min(state.gamma_min_eig_ratio,
                                                    float(eigs[0] / eigs[-1]))
        dmax = float(np.max(np.abs(direction)))
        if dmax == 0.0:
            state.zero_gradient = True
            state.stagnated = True
            state.message = "flow direction vanished"
            break
        direction = direction / dmax

        accepted = False
        ds_try = min(ds, config.max_step)
        p_try = p
        drift = 0.0
        while ds_try >= config.min_step:
            phase_try = spectral.phase + ds_try * direction
            if config.constraints_enabled:
                phase_try, drift = _restore_constraints(
                    spectral, phase_try, tgrid, targets, budget
                )
                if drift >= budget:
                    ds_try *= config.step_shrink
                    continue
            trial = spectral.with_phase(phase_try)
            p_try = final_transfer_probability(
                system, synthesize(trial, tgrid), initial, target
            )
            if p_try >= p:
                accepted = True
                break
            ds_try *= config.step_shrink

        if not accepted:
            state.stagnated = True
            state.message = "no acceptable step at the minimum step size"
            break

        gain = p_try - p
        spectral = spectral.with_phase(phase_try)
        p = p_try
        state.s += ds_try
        state.iteration = it
        state.step = ds_try
        state.objective = p
        state.phase = np.array(spectral.phase, copy=True)
        ti_val = _endpoint(spectral, tgrid.t_start)
        tf_val = _endpoint(spectral, tgrid.t_end)
        state.constraint_values = (ti_val, tf_val)
        state.history.append(
            (it, state.s, p, ds_try, ti_val - targets[0], tf_val - targets[1])
        )

        if p >= config.target_objective:
            state.converged = True
            state.message = "target objective reached"
            break
        if gain < config.stall_improvement:
            stall_count += 1
            if stall_count >= config.stall_iterations:
                state.stagnated = True
                state.message = "objective improvement stalled"
                break
        else:
            stall_count = 0

        p, d0, noise = gradient_with_noise_floor(system, spectral, tgrid, initial, target)
        ds = min(ds_try * config.step_grow, config.max_step)

    if not state.converged and not state.stagnated:
        state.message = "iteration limit reached"
    return spectral, state


def history_to_csv(state: OptimizationState, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "s", "objective", "step",
                    "constraint_drift_ti", "constraint_drift_tf"])
        for row in state.history:
            w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])
