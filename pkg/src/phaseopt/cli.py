"""Command-line front end.

Subcommands map onto the library surface:

  scenario   run a named scenario config end to end (CSV + figures)
  simulate   propagate a pulse config without optimizing
  optimize   run the phase optimization only
  scan       robustness scan for a stored or freshly optimized phase
  fit-phase  quadratic chirp extraction from a spectrum CSV
  adiabatic  adiabatic-frame decomposition for a two-level config
  validate   check a config file and report diagnostics

Exit codes: 0 success, 2 config errors, 3 numerical failure or stagnation
(best-so-far artifacts are still written), 4 I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, dynamics, experiments, optimizer as opt, pulses, units

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _write_atomic(writer, obj, path: Path) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    writer(obj, tmp)
    tmp.replace(path)


def _load_config(args) -> dict:
    if getattr(args, "preset", None):
        config = experiments.preset_config(args.preset)
    else:
        if not args.config:
            raise experiments.ConfigError(["provide --config FILE or --preset NAME"])
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(path)
        try:
            config = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise experiments.ConfigError([f"config is not valid JSON: {exc}"])
    for override in getattr(args, "set", None) or []:
        key, _, raw = override.partition("=")
        if not _:
            raise experiments.ConfigError([f"override '{override}' is not key=value"])
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return config


def _build_problem(config):
    diags = experiments.validate_config(config)
    if diags:
        raise experiments.ConfigError(diags)
    system = experiments._build_system(config["system"])
    e0, omega0, delta_omega, tau0 = experiments._resolve_pulse(config, system)
    window = config["window"]
    tgrid, fgrid = units.make_grids(
        units.to_atomic_time(window["duration_fs"]),
        int(window["n_steps"]),
        omega0,
        window.get("halfwidth_bandwidths", 5.0) * delta_omega,
        int(window["n_freq"]),
    )
    spectral0 = pulses.gaussian_amplitude(e0, omega0, delta_omega, fgrid)
    initial = int(config["task"]["initial"]) - 1
    target = int(config["task"]["target"]) - 1
    return system, spectral0, tgrid, initial, target, tau0


def _read_spectrum_csv(path: Path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    w = np.array([float(r["omega_invcm"]) for r in rows])
    amp = np.array([float(r["amplitude_au"]) for r in rows])
    phase = np.array([float(r["phase_rad"]) for r in rows])
    w_au = w * units.ENERGY_HARTREE_PER_WAVENUMBER
    grid = units.FrequencyGrid(float(w_au[0]), float(w_au[-1]), w.size)
    peak = int(np.argmax(amp))
    omega0 = float(w_au[peak])
    half = amp >= 0.5 * amp[peak]
    idx = np.nonzero(half)[0]
    fwhm = float(w_au[idx[-1]] - w_au[idx[0]]) if idx.size > 1 else grid.domega
    delta_omega = fwhm / (2.0 * np.sqrt(2.0 * np.log(2.0)))
    e0 = float(np.sum(grid.trapezoid_weights() * amp))
    return pulses.SpectralField(grid, amp, phase, omega0, delta_omega, e0)


def cmd_scenario(args) -> int:
    config = _load_config(args)
    result = experiments.run_named_scenario(config, args.output_dir)
    state = result["state"]
    print(f"objective {state.objective:.8f} after {state.iteration} iterations "
          f"({state.message})")
    print(f"artifacts in {result['output_dir']}")
    if not state.converged:
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _load_config(args)
    system, spectral0, tgrid, initial, target, _ = _build_problem(config)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    field = pulses.synthesize(spectral0, tgrid)
    record = dynamics.propagate(system, field, initial)
    _write_atomic(dynamics.record_to_csv, record, outdir / "populations.csv")
    _write_atomic(pulses.temporal_to_csv, field, outdir / "temporal_field.csv")
    p = dynamics.transfer_probability(record, target)
    print(f"P[{initial + 1}->{target + 1}](t_f) = {p:.8f}")
    print(f"artifacts in {outdir}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    config = _load_config(args)
    system, spectral0, tgrid, initial, target, _ = _build_problem(config)
    opt_config = experiments._build_optimizer_config(config.get("optimizer", {}))
    info: dict = {}
    phase0 = experiments._resolve_initial_phase(
        config, system, spectral0, tgrid, initial, target, opt_config, info)
    if args.verbose and info:
        print(f"initial phase: {info}")
    converged, state = opt.optimize(system, spectral0.with_phase(phase0),
                                    tgrid, initial, target, opt_config)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_atomic(pulses.spectral_to_csv, converged, outdir / "pulse_spectrum.csv")
    _write_atomic(opt.history_to_csv, state, outdir / "optimization_history.csv")
    for row in state.history if args.verbose else []:
        print(f"iter {row[0]:4d}  s={row[1]:.4f}  objective={row[2]:.8f}  "
              f"step={row[3]:.3e}")
    print(f"objective {state.objective:.8f} after {state.iteration} iterations "
          f"({state.message})")
    print(f"artifacts in {outdir}")
    return EXIT_OK if state.converged else EXIT_NUMERICAL


def cmd_scan(args) -> int:
    config = _load_config(args)
    system, spectral0, tgrid, initial, target, _ = _build_problem(config)
    if args.phase_csv:
        spectral = _read_spectrum_csv(Path(args.phase_csv))
    else:
        spectral = spectral0
    factors = config.get("scan", {}).get("factors",
                                         experiments.DEFAULT_SCAN_FACTORS)
    scan = analysis.scan_robustness(system, spectral, tgrid, initial, target,
                                    [f * spectral.e0 for f in factors])
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_atomic(analysis.robustness_to_csv, scan, outdir / "robustness.csv")
    print(f"max infidelity {np.max(scan.infidelities):.3e} over "
          f"{len(factors)} strengths")
    print(f"artifacts in {outdir}")
    return EXIT_OK


def cmd_fit_phase(args) -> int:
    spectral = _read_spectrum_csv(Path(args.spectrum))
    fit = analysis.fit_quadratic_phase(spectral, args.threshold)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_atomic(analysis.fit_to_csv, fit, outdir / "phase_fit.csv")
    if fit.zero_curvature:
        print("phase has no quadratic component (zero curvature)")
    else:
        print(f"beta0 = {fit.beta0_fs2:.1f} fs^2, omega_c = "
              f"{fit.omega_c_invcm:.2f} cm^-1, residual = {fit.residual:.4f} rad")
    return EXIT_OK


def cmd_adiabatic(args) -> int:
    config = _load_config(args)
    system, spectral0, tgrid, initial, target, tau0 = _build_problem(config)
    if system.n_levels != 2:
        raise experiments.ConfigError(["adiabatic analysis needs a two-level system"])
    spectral = _read_spectrum_csv(Path(args.phase_csv)) if args.phase_csv else spectral0
    field = pulses.synthesize(spectral, tgrid)
    record = dynamics.propagate(system, field, initial)
    fit = analysis.fit_quadratic_phase(spectral)
    trace = analysis.adiabatic_decompose(system, fit, record, spectral.e0, tau0)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_atomic(analysis.adiabatic_to_csv, trace, outdir / "adiabatic.csv")
    print(f"min adiabatic ground population "
          f"{np.min(trace.ground_population):.6f}")
    print(f"artifacts in {outdir}")
    return EXIT_OK


def cmd_validate(args) -> int:
    config = _load_config(args)
    diags = experiments.validate_config(config)
    if diags:
        for d in diags:
            print(f"error: {d}")
        return EXIT_CONFIG
    print("config is valid")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phaseopt",
        description="Spectral-phase-only pulse optimization for quantum state transfer",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_output=True):
        p.add_argument("--config", help="JSON scenario config")
        p.add_argument("--preset", help="built-in config name")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config entry (dotted path, JSON value)")
        if needs_output:
            p.add_argument("--output-dir", default="phaseopt_out",
                           help="artifact directory")

    p = sub.add_parser("scenario", help="run a full scenario")
    add_common(p)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("simulate", help="propagate without optimizing")
    add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="run the phase optimization only")
    add_common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("scan", help="robustness scan over field strengths")
    add_common(p)
    p.add_argument("--phase-csv", help="spectrum CSV with the phase to scan")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("fit-phase", help="fit a quadratic to a stored phase")
    p.add_argument("spectrum", help="spectrum CSV (omega_invcm, amplitude_au, phase_rad)")
    p.add_argument("--threshold", type=float, default=1e-3,
                   help="amplitude fraction defining the fit band")
    p.add_argument("--output-dir", default="phaseopt_out")
    p.set_defaults(func=cmd_fit_phase)

    p = sub.add_parser("adiabatic", help="adiabatic-frame decomposition")
    add_common(p)
    p.add_argument("--phase-csv", help="spectrum CSV with the phase to analyze")
    p.set_defaults(func=cmd_adiabatic)

    p = sub.add_parser("validate", help="validate a config without running")
    add_common(p, needs_output=False)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except experiments.ConfigError as exc:
        for d in exc.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"not found: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, PermissionError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
