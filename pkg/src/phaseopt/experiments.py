"""Named, config-driven reproduction scenarios wiring the library together.

A scenario builds the system and pulse from a JSON-style config, runs the
phase optimization, then the standard analysis battery (robustness scan,
quadratic fit, adiabatic decomposition for two-level runs, time-frequency
map), and writes CSV artifacts plus a manifest with content digests.  All
runs are deterministic: there is no randomness anywhere in the pipeline.
"""

from __future__ import annotations

import copy
import hashlib
import json
import time
from pathlib import Path

import numpy as np

from . import analysis, dynamics, optimizer as opt, pulses, reports, units

DEFAULT_CHIRP_SCAN_FS2 = [float(b) for b in range(-6000, 6001, 250)]

#: robustness scan factors used when a config does not override them
DEFAULT_SCAN_FACTORS = [round(0.8 + 0.05 * k, 2) for k in range(9)]  # 0.8 .. 1.2


class ConfigError(ValueError):
    """Raised when a scenario config fails validation."""

    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


def preset_config(name: str) -> dict:
    """Built-in scenario configs reproducing the reference setups."""
    two_level_window = {"duration_fs": 1000.0, "n_steps": 65537, "n_freq": 2048,
                        "halfwidth_bandwidths": 5.5}
    rb_window = {"duration_fs": 2500.0, "n_steps": 65537, "n_freq": 2048,
                 "halfwidth_bandwidths": 5.5}
    presets: dict[str, dict] = {
        "two_level_unfiltered_e06": {
            "scenario": "two_level",
            "system": "two_level_12500",
            "pulse": {"e0_au": 0.6e-2, "tau0_fs": 10.0, "resonant_with": [1, 2],
                      "detuning_invcm": 0.0},
            "window": two_level_window,
            "task": {"initial": 1, "target": 2},
            "optimizer": {"sigma_invcm": None, "target_objective": 0.99995,
                          "max_iterations": 2000, "phase_init": "zero"},
            "scan": {"factors": DEFAULT_SCAN_FACTORS},
            "outputs": {"figures": True, "time_frequency": True},
        },
        "two_level_unfiltered_e10": {
            "scenario": "two_level",
            "system": "two_level_12500",
            "pulse": {"e0_au": 1.0e-2, "tau0_fs": 10.0, "resonant_with": [1, 2],
                      "detuning_invcm": 0.0},
            "window": two_level_window,
            "task": {"initial": 1, "target": 2},
            "optimizer": {"sigma_invcm": None, "target_objective": 0.99995,
                          "max_iterations": 2000, "phase_init": "zero"},
            "scan": {"factors": DEFAULT_SCAN_FACTORS},
            "outputs": {"figures": True, "time_frequency": True},
        },
        "two_level_filtered_e06": {
            "scenario": "two_level",
            "system": "two_level_12500",
            "pulse": {"e0_au": 0.6e-2, "tau0_fs": 10.0, "resonant_with": [1, 2],
                      "detuning_invcm": 0.0},
            "window": two_level_window,
            "task": {"initial": 1, "target": 2},
            "optimizer": {"sigma_invcm": 2.0e4, "target_objective": 0.99999,
                          "max_iterations": 4000, "phase_init": "zero"},
            "scan": {"factors": DEFAULT_SCAN_FACTORS},
            "outputs": {"figures": True, "time_frequency": True},
        },
        "two_level_filtered_e10": {
            "scenario": "two_level",
            "system": "two_level_12500",
            "pulse": {"e0_au": 1.0e-2, "tau0_fs": 10.0, "resonant_with": [1, 2],
                      "detuning_invcm": 0.0},
            "window": two_level_window,
            "task": {"initial": 1, "target": 2},
            "optimizer": {"sigma_invcm": 2.0e4, "target_objective": 0.99999,
                          "max_iterations": 4000,
                          "phase_init": {"continuation_e0_au": 0.6e-2}},
            "scan": {"factors": DEFAULT_SCAN_FACTORS},
            "outputs": {"figures": True, "time_frequency": True},
        },
        "rubidium_onres_12": {
            "scenario": "rubidium_resonant",
            "system": "rubidium87_5s5p",
            "pulse": {"e0_au": 0.8e-2, "tau0_fs": 10.0, "resonant_with": [1, 2],
                      "detuning_invcm": 0.0},
            "window": rb_window,
            "task": {"initial": 1, "target": 2},
            "optimizer": {"sigma_invcm": 1.8e4, "target_objective": 0.9999,
                          "max_iterations": 4000,
                          "phase_init": "chirp_scan"},
            "scan": {"factors": DEFAULT_SCAN_FACTORS},
            "outputs": {"figures": True, "time_frequency": False},
        },
        "rubidium_onres_13": {
            "scenario": "rubidium_resonant",
            "system": "rubidium87_5s5p",
            "pulse": {"e0_au": 0.8e-2, "tau0_fs": 10.0, "resonant_with": [1, 3],
                      "detuning_invcm": 0.0},
            "window": rb_window,
            "task": {"initial": 1, "target": 3},
            "optimizer": {"sigma_invcm": 1.8e4, "target_objective": 0.9999,
                          "max_iterations": 4000,
                          "phase_init": "chirp_scan"},
            "scan": {"factors": DEFAULT_SCAN_FACTORS},
            "outputs": {"figures": True, "time_frequency": False},
        },
        "rubidium_offres_23": {
            "scenario": "rubidium_offresonant",
            "system": "rubidium87_5s5p",
            "pulse": {"e0_au": 0.8e-2, "tau0_fs": 10.0, "resonant_with": [1, 2],
                      "detuning_invcm": 0.0},
            "window": rb_window,
            "task": {"initial": 2, "target": 3},
            "optimizer": {"sigma_invcm": 1.8e4, "target_objective": 0.9999,
                          "max_iterations": 4000,
                          "phase_init": "chirp_scan"},
            "scan": {"factors": DEFAULT_SCAN_FACTORS},
            "outputs": {"figures": True, "time_frequency": False},
        },
    }
    if name not in presets:
        raise KeyError(f"unknown preset '{name}'; choose from {sorted(presets)}")
    return copy.deepcopy(presets[name])


def _build_system(spec) -> dynamics.QuantumSystem:
    if spec == "two_level_12500":
        return dynamics.two_level_system()
    if spec == "rubidium87_5s5p":
        return dynamics.rubidium_system()
    if isinstance(spec, dict):
        energies = np.array(spec["energies_invcm"], dtype=float)
        energies *= units.ENERGY_HARTREE_PER_WAVENUMBER
        dipole = np.array(spec["dipole_au"], dtype=float)
        return dynamics.QuantumSystem(energies, dipole)
    raise ConfigError([f"unrecognized system spec: {spec!r}"])


def validate_config(config: dict) -> list[str]:
    """Schema and physics checks; returns diagnostics without running anything."""
    diags: list[str] = []
    if not isinstance(config, dict):
        return ["config must be a JSON object"]
    for key in ("system", "pulse", "window", "task"):
        if key not in config:
            diags.append(f"missing required section '{key}'")
    if diags:
        return diags
    try:
        system = _build_system(config["system"])
    except (ConfigError, KeyError, ValueError) as exc:
        return [f"system: {exc}"]
    n = system.n_levels
    pulse = config["pulse"]
    e0 = pulse.get("e0_au")
    if not isinstance(e0, (int, float)) or e0 < 0:
        diags.append("pulse.e0_au must be a non-negative number")
    tau0 = pulse.get("tau0_fs", 0.0)
    if not isinstance(tau0, (int, float)) or tau0 <= 0:
        diags.append("pulse.tau0_fs must be positive")
    if "omega0_invcm" in pulse and pulse["omega0_invcm"] is not None:
        if pulse["omega0_invcm"] <= 0:
            diags.append("pulse.omega0_invcm must be positive")
    elif "resonant_with" in pulse:
        pair = pulse["resonant_with"]
        if (not isinstance(pair, (list, tuple)) or len(pair) != 2
                or any(not isinstance(k, int) or not 1 <= k <= n for k in pair)
                or pair[0] == pair[1]):
            diags.append(f"pulse.resonant_with must name two distinct levels in 1..{n}")
        elif system.transition_frequency(pair[0] - 1, pair[1] - 1) <= 0:
            diags.append("pulse.resonant_with levels are degenerate; no resonance")
    else:
        diags.append("pulse must give omega0_invcm or resonant_with")
    window = config["window"]
    if window.get("duration_fs", 0) <= 0:
        diags.append("window.duration_fs must be positive")
    if int(window.get("n_steps", 0)) < 2:
        diags.append("window.n_steps must be at least 2")
    if int(window.get("n_freq", 0)) < 2:
        diags.append("window.n_freq must be at least 2")
    task = config["task"]
    for key in ("initial", "target"):
        lvl = task.get(key)
        if not isinstance(lvl, int) or not 1 <= lvl <= n:
            diags.append(f"task.{key} must be a level index in 1..{n}")
    optcfg = config.get("optimizer", {})
    sigma = optcfg.get("sigma_invcm")
    if sigma is not None and sigma <= 0:
        diags.append("optimizer.sigma_invcm must be positive or null")
    target_obj = optcfg.get("target_objective", 0.9999)
    if not 0.0 < target_obj <= 1.0:
        diags.append("optimizer.target_objective must lie in (0, 1]")
    return diags


def _resolve_pulse(config: dict, system: dynamics.QuantumSystem):
    pulse = config["pulse"]
    tau0 = units.to_atomic_time(pulse["tau0_fs"])
    delta_omega = 1.0 / tau0
    if pulse.get("omega0_invcm") is not None:
        omega0 = pulse["omega0_invcm"] * units.ENERGY_HARTREE_PER_WAVENUMBER
    else:
        a, b = pulse["resonant_with"]
        omega0 = system.transition_frequency(a - 1, b - 1)
    omega0 += pulse.get("detuning_invcm", 0.0) * units.ENERGY_HARTREE_PER_WAVENUMBER
    return pulse["e0_au"], omega0, delta_omega, tau0


def _build_optimizer_config(optcfg: dict) -> opt.OptimizerConfig:
    sigma = optcfg.get("sigma_invcm")
    if sigma is None:
        filt = opt.FilterSpec.disabled()
    else:
        filt = opt.FilterSpec(sigma * units.ENERGY_HARTREE_PER_WAVENUMBER)
    kwargs = {}
    for src, dst in (
        ("target_objective", "target_objective"),
        ("max_iterations", "max_iterations"),
        ("initial_step", "initial_step"),
        ("max_step", "max_step"),
        ("gamma_rcond", "gamma_rcond"),
        ("constraints_enabled", "constraints_enabled"),
    ):
        if src in optcfg:
            kwargs[dst] = optcfg[src]
    return opt.OptimizerConfig(filter=filt, **kwargs)


#: a scan point whose infidelity is at or below this is "comfortably
#: admissible"; the scan then keeps the smallest such chirp, mimicking the
#: monotone flow that stops once the target is comfortably met
CHIRP_SCAN_ADMISSIBLE_INFIDELITY = 1e-5


def _chirp_scan_phase(system, spectral0, tgrid, initial, target, grid_fs2):
    """Deterministic coarse scan over quadratic phases.

    Scans in order of growing |beta0| and returns the smallest chirp whose
    infidelity is already comfortably admissible (<= 1e-5); if no scan point
    gets there, returns the best one found.
    """
    w = spectral0.grid.omegas()
    ordered = sorted(grid_fs2, key=lambda b: (abs(b), b))
    best_p, best_b = -1.0, 0.0
    for b_fs2 in ordered:
        beta0 = b_fs2 * units.TIME_AU_PER_FS**2
        phase = 0.5 * beta0 * (w - spectral0.omega0) ** 2
        field = pulses.synthesize(spectral0.with_phase(phase), tgrid)
        p = dynamics.final_transfer_probability(system, field, initial, target)
        if 1.0 - p <= CHIRP_SCAN_ADMISSIBLE_INFIDELITY:
            best_p, best_b = p, b_fs2
            break
        if p > best_p:
            best_p, best_b = p, b_fs2
    beta0 = best_b * units.TIME_AU_PER_FS**2
    return 0.5 * beta0 * (w - spectral0.omega0) ** 2, best_b, best_p


def _resolve_initial_phase(config, system, spectral0, tgrid, initial, target,
                           opt_config, info: dict) -> np.ndarray:
    init = config.get("optimizer", {}).get("phase_init", "zero")
    w = spectral0.grid.omegas()
    if init in (None, "zero"):
        return np.zeros(w.size)
    if init == "chirp_scan":
        grid_fs2 = config.get("optimizer", {}).get("chirp_scan_fs2",
                                                   DEFAULT_CHIRP_SCAN_FS2)
        phase, b_fs2, p = _chirp_scan_phase(system, spectral0, tgrid,
                                            initial, target, grid_fs2)
        info["phase_init"] = {"mode": "chirp_scan", "beta0_fs2": b_fs2,
                              "objective": p}
        return phase
    if isinstance(init, dict) and "beta0_fs2" in init:
        beta0 = init["beta0_fs2"] * units.TIME_AU_PER_FS**2
        info["phase_init"] = {"mode": "quadratic", "beta0_fs2": init["beta0_fs2"]}
        return 0.5 * beta0 * (w - spectral0.omega0) ** 2
    if isinstance(init, dict) and "continuation_e0_au" in init:
        pre_e0 = float(init["continuation_e0_au"])
        pre = spectral0.scaled(pre_e0 / spectral0.e0)
        pre_field, pre_state = opt.optimize(system, pre, tgrid,
                                            initial, target, opt_config)
        info["phase_init"] = {
            "mode": "continuation",
            "e0_au": pre_e0,
            "objective": pre_state.objective,
            "iterations": pre_state.iteration,
        }
        return np.array(pre_field.phase, copy=True)
    if isinstance(init, dict) and "phase_csv" in init:
        import csv as _csv

        path = Path(init["phase_csv"])
        with open(path) as fh:
            rows = list(_csv.DictReader(fh))
        phase = np.array([float(r["phase_rad"]) for r in rows])
        if phase.size != w.size:
            raise ConfigError(["phase_csv length does not match the frequency grid"])
        info["phase_init"] = {"mode": "phase_csv", "path": str(path)}
        return phase
    raise ConfigError([f"unrecognized optimizer.phase_init: {init!r}"])


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def run_scenario(config: dict, output_dir) -> dict:
    """Execute a scenario config and write all artifacts into output_dir."""
    diags = validate_config(config)
    if diags:
        raise ConfigError(diags)
    outdir = Path(output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}
    info: dict = {}

    system = _build_system(config["system"])
    e0, omega0, delta_omega, tau0 = _resolve_pulse(config, system)
    window = config["window"]
    tgrid, fgrid = units.make_grids(
        units.to_atomic_time(window["duration_fs"]),
        int(window["n_steps"]),
        omega0,
        window.get("halfwidth_bandwidths", 5.0) * delta_omega,
        int(window["n_freq"]),
    )
    initial = int(config["task"]["initial"]) - 1
    target = int(config["task"]["target"]) - 1
    spectral0 = pulses.gaussian_amplitude(e0, omega0, delta_omega, fgrid)
    opt_config = _build_optimizer_config(config.get("optimizer", {}))

    t0 = time.perf_counter()
    init_phase = _resolve_initial_phase(config, system, spectral0, tgrid,
                                        initial, target, opt_config, info)
    timings["phase_init_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    converged, state = opt.optimize(system, spectral0.with_phase(init_phase),
                                    tgrid, initial, target, opt_config)
    timings["optimize_s"] = time.perf_counter() - t0

    artifacts: dict[str, Path] = {}

    def emit(name: str, writer, *args) -> None:
        path = outdir / name
        tmp = path.with_suffix(path.suffix + ".tmp")
        writer(*args, tmp)
        tmp.replace(path)
        artifacts[name] = path

    t0 = time.perf_counter()
    field = pulses.synthesize(converged, tgrid)
    record = dynamics.propagate(system, field, initial)
    emit("pulse_spectrum.csv", pulses.spectral_to_csv, converged)
    emit("temporal_field.csv", pulses.temporal_to_csv, field)
    emit("optimization_history.csv", opt.history_to_csv, state)
    emit("populations.csv", dynamics.record_to_csv, record)

    factors = config.get("scan", {}).get("factors", DEFAULT_SCAN_FACTORS)
    scan = analysis.scan_robustness(system, converged, tgrid, initial, target,
                                    [f * e0 for f in factors])
    emit("robustness.csv", analysis.robustness_to_csv, scan)

    fit = analysis.fit_quadratic_phase(converged)
    emit("phase_fit.csv", analysis.fit_to_csv, fit)

    trace = None
    if system.n_levels == 2 and not fit.zero_curvature:
        trace = analysis.adiabatic_decompose(system, fit, record, e0, tau0)
        emit("adiabatic.csv", analysis.adiabatic_to_csv, trace)

    tfmap = None
    if config.get("outputs", {}).get("time_frequency", False):
        tfmap = analysis.time_frequency_map(field, tau0)
        emit("time_frequency.csv", analysis.map_to_csv, tfmap)
    timings["analysis_s"] = time.perf_counter() - t0

    if config.get("outputs", {}).get("figures", True):
        t0 = time.perf_counter()
        figdir = outdir / "figures"
        fig_paths = reports.render_scenario_figures(
            figdir, converged, field, record, state, scan, fit,
            trace=trace, tfmap=tfmap,
        )
        for p in fig_paths:
            artifacts[str(p.relative_to(outdir))] = p
        timings["figures_s"] = time.perf_counter() - t0

    summary = {
        "objective": state.objective,
        "iterations": state.iteration,
        "converged": state.converged,
        "stagnated": state.stagnated,
        "seeded": state.seeded,
        "message": state.message,
        "fit_beta0_fs2": fit.beta0_fs2,
        "fit_omega_c_invcm": None if fit.zero_curvature else fit.omega_c_invcm,
        "fit_residual_rad": fit.residual,
        "scan_max_infidelity": float(np.max(scan.infidelities)),
    }
    manifest = {
        "config": config,
        "phase_init": info.get("phase_init", {"mode": "zero"}),
        "summary": summary,
        "artifacts": {name: _sha256(path) for name, path in sorted(artifacts.items())},
        "timings_s": timings,
    }
    manifest_path = outdir / "manifest.json"
    tmp = manifest_path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    tmp.replace(manifest_path)

    return {
        "system": system,
        "spectral": converged,
        "field": field,
        "state": state,
        "record": record,
        "scan": scan,
        "fit": fit,
        "trace": trace,
        "manifest": manifest,
        "output_dir": outdir,
    }


def scenario_two_level(config: dict, output_dir) -> dict:
    """Two-level reproduction; expects a 2-level system in the config."""
    system = _build_system(config["system"])
    if system.n_levels != 2:
        raise ConfigError(["scenario_two_level requires a two-level system"])
    return run_scenario(config, output_dir)


def scenario_rubidium_resonant(config: dict, output_dir) -> dict:
    """Three-level on-resonance transfer from the ground state."""
    system = _build_system(config["system"])
    if system.n_levels != 3:
        raise ConfigError(["scenario_rubidium_resonant requires a three-level system"])
    if int(config["task"]["initial"]) != 1:
        raise ConfigError(["on-resonance scheme starts from level 1"])
    return run_scenario(config, output_dir)


def scenario_rubidium_offresonant(config: dict, output_dir) -> dict:
    """Three-level transfer between the dipole-forbidden pair via level 1."""
    system = _build_system(config["system"])
    if system.n_levels != 3:
        raise ConfigError(["scenario_rubidium_offresonant requires a three-level system"])
    task = config["task"]
    if int(task["initial"]) == 1 or int(task["target"]) == 1:
        raise ConfigError(["off-resonance scheme transfers between levels 2 and 3"])
    return run_scenario(config, output_dir)


SCENARIO_RUNNERS = {
    "two_level": scenario_two_level,
    "rubidium_resonant": scenario_rubidium_resonant,
    "rubidium_offresonant": scenario_rubidium_offresonant,
}


def run_named_scenario(config: dict, output_dir) -> dict:
    kind = config.get("scenario")
    if kind not in SCENARIO_RUNNERS:
        raise ConfigError([f"unknown scenario kind {kind!r}"])
    return SCENARIO_RUNNERS[kind](config, output_dir)
