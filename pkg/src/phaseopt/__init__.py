"""Spectral-phase-only optimization of ultrafast pulses.

Shape the spectral phase of a pulse with a fixed Gaussian spectral amplitude
so that a quantum state transfer probability is maximized under field
endpoint equality constraints, with an optional Gaussian frequency filter
that drives the converged phases toward smooth, chirp-like (adiabatic,
amplitude-robust) solutions.
"""

from .units import (
    ENERGY_HARTREE_PER_WAVENUMBER,
    TIME_AU_PER_FS,
    FrequencyGrid,
    TimeGrid,
    UnitConstants,
    angular_frequency_to_wavenumber,
    from_atomic_time,
    make_grids,
    to_atomic_time,
    wavenumber_to_angular_frequency,
)
from .pulses import (
    ChirpedPulseParams,
    SpectralField,
    TemporalField,
    chirped_field,
    gaussian_amplitude,
    set_phase,
    synthesize,
)
from .dynamics import (
    PropagationRecord,
    QuantumSystem,
    analytic_rabi_probability,
    final_transfer_probability,
    pi_pulse_strength,
    propagate,
    rubidium_system,
    transfer_probability,
    two_level_system,
)
from .gradients import (
    GradientBundle,
    constraint_gradients,
    field_phase_gradient,
    gradient_bundle,
    objective_field_gradient,
    objective_phase_gradient,
)
from .optimizer import (
    FilterSpec,
    OptimizationState,
    OptimizerConfig,
    apply_filter,
    gamma_matrix,
    optimize,
    update_direction,
)
from .analysis import (
    AdiabaticTrace,
    QuadraticFit,
    RobustnessScan,
    TimeFrequencyMap,
    adiabatic_decompose,
    fit_quadratic_phase,
    scan_robustness,
    time_frequency_map,
)
from .experiments import (
    ConfigError,
    preset_config,
    run_named_scenario,
    run_scenario,
    scenario_rubidium_offresonant,
    scenario_rubidium_resonant,
    scenario_two_level,
    validate_config,
)

__version__ = "0.1.0"
