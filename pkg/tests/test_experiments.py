import json

import numpy as np
import pytest

import phaseopt as po
from phaseopt.experiments import (
    ConfigError,
    preset_config,
    run_named_scenario,
    validate_config,
)


def fast_two_level_config(**opt_overrides):
    """Preset shrunk to smoke-test size."""
    config = preset_config("two_level_unfiltered_e10")
    config["window"] = {"duration_fs": 1000.0, "n_steps": 2**12 + 1,
                        "n_freq": 257, "halfwidth_bandwidths": 5.5}
    config["optimizer"].update({"target_objective": 0.99,
                                "max_iterations": 120})
    config["optimizer"].update(opt_overrides)
    config["scan"] = {"factors": [0.9, 1.0, 1.1]}
    config["outputs"] = {"figures": False, "time_frequency": False}
    return config


class TestValidateConfig:
    def test_preset_configs_are_valid(self):
        for name in ("two_level_unfiltered_e06", "two_level_unfiltered_e10",
                     "two_level_filtered_e06", "two_level_filtered_e10",
                     "rubidium_onres_12", "rubidium_onres_13",
                     "rubidium_offres_23"):
            assert validate_config(preset_config(name)) == []

    def test_negative_field_strength(self):
        config = preset_config("two_level_unfiltered_e10")
        config["pulse"]["e0_au"] = -1.0
        diags = validate_config(config)
        assert any("e0_au" in d for d in diags)

    def test_target_level_out_of_range(self):
        config = preset_config("two_level_unfiltered_e10")
        config["task"]["target"] = 5
        diags = validate_config(config)
        assert any("task.target" in d for d in diags)

    def test_unresolvable_resonance(self):
        config = preset_config("two_level_unfiltered_e10")
        config["pulse"].pop("resonant_with")
        diags = validate_config(config)
        assert any("resonant_with" in d or "omega0" in d for d in diags)

    def test_unknown_preset_raises(self):
        with pytest.raises(KeyError):
            preset_config("nope")


@pytest.fixture(scope="module")
def result(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("scenario")
    config = fast_two_level_config()
    return run_named_scenario(config, outdir), outdir


class TestRunScenario:
    def test_artifacts_written(self, result):
        res, outdir = result
        for name in ("pulse_spectrum.csv", "temporal_field.csv",
                     "optimization_history.csv", "populations.csv",
                     "robustness.csv", "phase_fit.csv", "manifest.json"):
            assert (outdir / name).exists(), name

    def test_manifest_digests_cover_artifacts(self, result):
        res, outdir = result
        manifest = json.loads((outdir / "manifest.json").read_text())
        for name, digest in manifest["artifacts"].items():
            assert (outdir / name).exists()
            assert len(digest) == 64
        assert manifest["summary"]["objective"] > 0.99
        assert manifest["summary"]["converged"]

    def test_determinism_bitwise(self, tmp_path):
        config = fast_two_level_config()
        a = tmp_path / "a"
        b = tmp_path / "b"
        run_named_scenario(config, a)
        run_named_scenario(json.loads(json.dumps(config)), b)
        for name in ("pulse_spectrum.csv", "optimization_history.csv",
                     "robustness.csv", "phase_fit.csv", "populations.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_figures_rendered_when_enabled(self, tmp_path):
        config = fast_two_level_config()
        config["outputs"] = {"figures": True, "time_frequency": True}
        res = run_named_scenario(config, tmp_path)
        figdir = tmp_path / "figures"
        assert (figdir / "phase.png").exists()
        assert (figdir / "populations.png").exists()
        assert (figdir / "robustness.png").exists()
        assert (figdir / "time_frequency.png").exists()
        assert (tmp_path / "time_frequency.csv").exists()


class TestScenarioGuards:
    def test_two_level_rejects_rubidium_system(self, tmp_path):
        config = fast_two_level_config()
        config["system"] = "rubidium87_5s5p"
        with pytest.raises(ConfigError):
            po.scenario_two_level(config, tmp_path)

    def test_offresonant_rejects_ground_initial(self, tmp_path):
        config = preset_config("rubidium_offres_23")
        config["task"]["initial"] = 1
        with pytest.raises(ConfigError):
            po.scenario_rubidium_offresonant(config, tmp_path)

    def test_resonant_requires_ground_initial(self, tmp_path):
        config = preset_config("rubidium_onres_12")
        config["task"]["initial"] = 2
        with pytest.raises(ConfigError):
            po.scenario_rubidium_resonant(config, tmp_path)

    def test_unknown_scenario_kind(self, tmp_path):
        config = fast_two_level_config()
        config["scenario"] = "smorgasbord"
        with pytest.raises(ConfigError):
            run_named_scenario(config, tmp_path)


class TestPhaseInit:
    def test_explicit_quadratic_init(self, tmp_path):
        config = fast_two_level_config(phase_init={"beta0_fs2": 400.0},
                                       target_objective=0.5)
        res = run_named_scenario(config, tmp_path)
        assert res["manifest"]["phase_init"]["mode"] == "quadratic"

    def test_chirp_scan_init(self, tmp_path):
        config = fast_two_level_config(
            phase_init="chirp_scan",
            chirp_scan_fs2=[0.0, 200.0, 400.0, 600.0],
            target_objective=0.995,
        )
        res = run_named_scenario(config, tmp_path)
        init = res["manifest"]["phase_init"]
        assert init["mode"] == "chirp_scan"
        assert init["beta0_fs2"] in (0.0, 200.0, 400.0, 600.0)

    def test_dipole_forbidden_pair_stays_empty(self, tmp_path):
        # fully decoupled variant: no dipole path at all from |2>
        config = preset_config("rubidium_offres_23")
        config["system"] = {
            "energies_invcm": [0.0, 12578.95, 12816.55],
            "dipole_au": [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
        }
        config["pulse"]["omega0_invcm"] = 12578.95
        config["pulse"].pop("resonant_with", None)
        config["window"] = {"duration_fs": 500.0, "n_steps": 2**11 + 1,
                            "n_freq": 257, "halfwidth_bandwidths": 5.5}
        config["optimizer"].update({"phase_init": "zero", "max_iterations": 4})
        config["outputs"] = {"figures": False, "time_frequency": False}
        config["scan"] = {"factors": [1.0]}
        res = run_named_scenario(config, tmp_path)
        assert res["state"].objective == pytest.approx(0.0, abs=1e-12)
        assert res["state"].zero_gradient


def test_shipped_configs_match_presets():
    import pathlib

    cfg_dir = pathlib.Path(__file__).resolve().parents[1] / "configs"
    names = ["two_level_unfiltered_e06", "two_level_unfiltered_e10",
             "two_level_filtered_e06", "two_level_filtered_e10",
             "rubidium_onres_12", "rubidium_onres_13", "rubidium_offres_23"]
    for name in names:
        path = cfg_dir / f"{name}.json"
        assert path.exists(), name
        assert json.loads(path.read_text()) == preset_config(name)
