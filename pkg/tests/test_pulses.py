import math

import numpy as np
import pytest

import phaseopt as po
from phaseopt.pulses import synthesize_at, synthesize_midpoints

from conftest import gaussian_pulse


def direct_synthesis(spectral, times):
    """Slow reference quadrature, independent of the czt fast path."""
    w = spectral.grid.omegas()
    ww = spectral.grid.trapezoid_weights()
    x = ww * spectral.amplitude * np.exp(1j * spectral.phase)
    return np.array([np.sum(x * np.exp(-1j * w * t)).real for t in times])


class TestGaussianAmplitude:
    def test_peak_value(self, small_grids, omega12, tau0):
        _, fgrid = small_grids
        sp = gaussian_pulse(0.006, omega12, tau0, fgrid)
        dw = 1.0 / tau0
        k0 = (fgrid.n_points - 1) // 2   # omega0 sits at the band center
        assert fgrid.omegas()[k0] == pytest.approx(omega12, rel=1e-14)
        assert sp.amplitude[k0] == pytest.approx(
            0.006 / math.sqrt(2 * math.pi * dw**2), rel=1e-12)

    def test_one_sigma_ratio(self, omega12, tau0):
        # tiny grid whose nodes land exactly on omega0 and omega0 +/- dW
        dw = 1.0 / tau0
        fgrid = po.FrequencyGrid(omega12 - 2 * dw, omega12 + 2 * dw, 5)
        sp = gaussian_pulse(0.006, omega12, tau0, fgrid)
        assert sp.amplitude[3] / sp.amplitude[2] == pytest.approx(
            math.exp(-0.5), rel=1e-12)

    def test_integral_is_e0(self, small_grids, omega12, tau0):
        _, fgrid = small_grids
        sp = gaussian_pulse(0.006, omega12, tau0, fgrid)
        mass = float(np.sum(fgrid.trapezoid_weights() * sp.amplitude))
        assert mass == pytest.approx(0.006, rel=1e-5)

    def test_rejects_bad_parameters(self, small_grids, omega12, tau0):
        _, fgrid = small_grids
        with pytest.raises(ValueError):
            po.gaussian_amplitude(-1.0, omega12, 1.0 / tau0, fgrid)
        with pytest.raises(ValueError):
            po.gaussian_amplitude(0.006, omega12, 0.0, fgrid)


class TestSynthesize:
    def test_matches_direct_quadrature(self, small_grids, omega12, tau0):
        tgrid, fgrid = small_grids
        rng = np.random.default_rng(11)
        sp = gaussian_pulse(0.006, omega12, tau0, fgrid).with_phase(
            rng.normal(0.0, 1.0, fgrid.n_points))
        field = po.synthesize(sp, tgrid)
        idx = rng.integers(0, tgrid.n_steps, 40)
        ref = direct_synthesis(sp, tgrid.times()[idx])
        assert np.max(np.abs(field.values[idx] - ref)) < 1e-9 * sp.e0

    def test_transform_limited_closed_form(self, small_grids, omega12, tau0):
        tgrid, fgrid = small_grids
        sp = gaussian_pulse(0.006, omega12, tau0, fgrid)
        field = po.synthesize(sp, tgrid)
        t = tgrid.times()
        expected = 0.006 * np.exp(-t**2 / (2 * tau0**2)) * np.cos(omega12 * t)
        assert np.max(np.abs(field.values - expected)) < 1e-6 * 0.006

    def test_constant_phase_shifts_carrier(self, small_grids, omega12, tau0):
        tgrid, fgrid = small_grids
        c = 0.7
        sp = gaussian_pulse(0.006, omega12, tau0, fgrid).with_phase(
            np.full(fgrid.n_points, c))
        field = po.synthesize(sp, tgrid)
        t = tgrid.times()
        expected = 0.006 * np.exp(-t**2 / (2 * tau0**2)) * np.cos(omega12 * t - c)
        assert np.max(np.abs(field.values - expected)) < 1e-6 * 0.006

    def test_linear_phase_translates_pulse(self, small_grids, omega12, tau0):
        tgrid, fgrid = small_grids
        shift = 20.0 * po.TIME_AU_PER_FS
        w = fgrid.omegas()
        sp = gaussian_pulse(0.006, omega12, tau0, fgrid).with_phase(
            shift * (w - omega12))
        field = po.synthesize(sp, tgrid)
        t = tgrid.times()
        # the envelope translates; the carrier phase at fixed t is unchanged
        expected = (0.006 * np.exp(-((t - shift) ** 2) / (2 * tau0**2))
                    * np.cos(omega12 * t))
        assert np.max(np.abs(field.values - expected)) < 2e-6 * 0.006

    def test_edge_amplitude_warning(self, omega12, tau0):
        tgrid, fgrid = po.make_grids(po.to_atomic_time(200.0), 256, omega12,
                                     2.0 / tau0, 64)
        sp = gaussian_pulse(0.006, omega12, tau0, fgrid)
        with pytest.warns(UserWarning, match="grid edges"):
            po.synthesize(sp, tgrid)

    def test_midpoint_synthesis_consistent(self, small_grids, omega12, tau0):
        tgrid, fgrid = small_grids
        sp = gaussian_pulse(0.006, omega12, tau0, fgrid)
        mids = synthesize_midpoints(sp, tgrid)
        ref = synthesize_at(sp, tgrid.midpoints()[::97])
        assert np.max(np.abs(mids[::97] - ref)) < 1e-9 * sp.e0


class TestSetPhase:
    def test_round_trip_identity(self, small_grids, omega12, tau0):
        _, fgrid = small_grids
        sp = gaussian_pulse(0.006, omega12, tau0, fgrid)
        phase = np.linspace(-2, 3, fgrid.n_points)
        sp2 = po.set_phase(sp, phase)
        assert np.array_equal(sp2.phase, phase)
        assert np.array_equal(sp2.amplitude, sp.amplitude)

    def test_amplitude_immutable_under_phase_updates(self, small_grids, omega12, tau0):
        _, fgrid = small_grids
        sp = gaussian_pulse(0.006, omega12, tau0, fgrid)
        original = np.array(sp.amplitude, copy=True)
        rng = np.random.default_rng(3)
        cur = sp
        for _ in range(5):
            cur = po.set_phase(cur, rng.normal(size=fgrid.n_points))
        assert np.array_equal(cur.amplitude, original)
        with pytest.raises(ValueError):
            cur.amplitude[0] = 1.0

    def test_rejects_bad_phase(self, small_grids, omega12, tau0):
        _, fgrid = small_grids
        sp = gaussian_pulse(0.006, omega12, tau0, fgrid)
        with pytest.raises(ValueError):
            po.set_phase(sp, np.zeros(3))
        with pytest.raises(ValueError):
            po.set_phase(sp, np.full(fgrid.n_points, np.nan))


class TestChirpedPulse:
    def test_zero_chirp_reduces_to_transform_limited(self, small_grids, omega12, tau0):
        tgrid, _ = small_grids
        params = po.ChirpedPulseParams(e0=0.006, tau0=tau0, beta0=0.0, omega0=omega12)
        assert params.f == 1.0
        assert params.varphi == 0.0
        assert params.tau == tau0
        field = po.chirped_field(params, tgrid)
        t = tgrid.times()
        expected = 0.006 * np.exp(-t**2 / (2 * tau0**2)) * np.cos(omega12 * t)
        assert np.max(np.abs(field.values - expected)) == 0.0

    def test_analytic_stretch_relations(self, omega12, tau0):
        params = po.ChirpedPulseParams(e0=1.0, tau0=tau0, beta0=tau0**2,
                                       omega0=omega12)
        assert params.tau == pytest.approx(tau0 * math.sqrt(2.0), rel=1e-12)
        assert params.f == pytest.approx(2.0 ** -0.25, rel=1e-12)

    def test_energy_conservation_relation(self, omega12, tau0):
        for beta0_fs2 in (0.0, 500.0, -1000.0, 4000.0):
            beta0 = beta0_fs2 * po.TIME_AU_PER_FS**2
            params = po.ChirpedPulseParams(e0=1.0, tau0=tau0, beta0=beta0,
                                           omega0=omega12)
            assert params.tau >= tau0
            assert params.f * math.sqrt(params.tau / tau0) == pytest.approx(
                1.0, rel=1e-12)

    @pytest.mark.parametrize("beta0_fs2", [0.0, 500.0, -500.0, 1000.0, -1000.0,
                                           4000.0, -4000.0])
    def test_quadrature_matches_closed_form(self, omega12, tau0, beta0_fs2):
        # the closed form is the oracle for the synthesis quadrature
        tgrid, fgrid = po.make_grids(po.to_atomic_time(1000.0), 2**11 + 1,
                                     omega12, 5.5 / tau0, 2048)
        beta0 = beta0_fs2 * po.TIME_AU_PER_FS**2
        w = fgrid.omegas()
        sp = gaussian_pulse(0.006, omega12, tau0, fgrid).with_phase(
            0.5 * beta0 * (w - omega12) ** 2)
        field = po.synthesize(sp, tgrid)
        ref = po.chirped_field(
            po.ChirpedPulseParams(e0=0.006, tau0=tau0, beta0=beta0, omega0=omega12),
            tgrid)
        assert np.max(np.abs(field.values - ref.values)) < 1e-5 * 0.006


class TestParseval:
    def test_energy_invariant_under_phase_shaping(self, omega12, tau0):
        # window long enough that moderate chirps stay inside
        tgrid, fgrid = po.make_grids(po.to_atomic_time(1000.0), 2**13 + 1,
                                     omega12, 5.5 / tau0, 512)
        sp0 = gaussian_pulse(0.006, omega12, tau0, fgrid)
        e_ref = po.synthesize(sp0, tgrid).energy()
        w = fgrid.omegas()
        phases = [
            0.5 * (500.0 * po.TIME_AU_PER_FS**2) * (w - omega12) ** 2,
            1.3 * np.sin(3 * (w - omega12) * tau0),
            0.1 * ((w - omega12) * tau0) ** 3,
        ]
        for phase in phases:
            e = po.synthesize(sp0.with_phase(phase), tgrid).energy()
            assert e == pytest.approx(e_ref, rel=1e-4)


def test_csv_round_trip(tmp_path, small_grids, omega12, tau0):
    tgrid, fgrid = small_grids
    sp = gaussian_pulse(0.006, omega12, tau0, fgrid).with_phase(
        np.linspace(0, 1, fgrid.n_points))
    path = tmp_path / "spectrum.csv"
    po.pulses.spectral_to_csv(sp, path)
    header = path.read_text().splitlines()[0]
    assert header == "omega_invcm,amplitude_au,phase_rad"
    field = po.synthesize(sp, tgrid)
    fpath = tmp_path / "field.csv"
    po.pulses.temporal_to_csv(field, fpath)
    assert fpath.read_text().splitlines()[0] == "time_fs,field_au"
