import numpy as np
import pytest

from omsqueeze import (
    AbsorptiveNoiseModel,
    BathModel,
    DetectionChain,
    ExtraModeNoise,
    LaserNoiseModel,
    MechanicalMode,
    OpticalMode,
    Scenario,
    SpectrumTrace,
    SystemParams,
    assemble_density_map,
    lock_to_quadrature,
    output_spectrum,
    quadrature_to_lock,
    rbw_resample,
    reflection_coefficient,
)

from conftest import DELTA, G0, GAMMA_I, KAPPA, N_C, OMEGA_M0, TWO_PI

CHAIN = DetectionChain(eta_cp=0.90, eta_12=0.85, eta_23=0.88, eta_3h=0.92, eta_hd=0.66)


def full_scenario(params, chain=CHAIN):
    return Scenario(
        system=params,
        bath=BathModel(t_b0=16.0, c0=3.2e-4),
        lump=ExtraModeNoise(omega_lump=TWO_PI * 50e6, q_lump=100.0, g0_lump=TWO_PI * 100e3),
        laser=LaserNoiseModel(s_omega_omega=6e3),
        absorptive=AbsorptiveNoiseModel(amp_coeff=1.5e-4),
        chain=chain,
    )


class TestReflection:
    def test_critical_coupling_dip(self):
        optical = OpticalMode(omega_o=1e15, kappa=1e9, kappa_e=0.5e9)
        assert reflection_coefficient(0.0, optical, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_paper_coupling_phase(self):
        optical = OpticalMode(omega_o=1e15, kappa=1e9, kappa_e=0.54e9)
        r = reflection_coefficient(0.0, optical, 0.0)
        assert r == pytest.approx(-0.08, abs=1e-12)
        assert np.angle(r) == pytest.approx(np.pi, abs=1e-12)

    def test_far_detuned_mirror(self):
        optical = OpticalMode(omega_o=1e15, kappa=1e9, kappa_e=0.55e9)
        r = reflection_coefficient(0.0, optical, 30e9)
        assert abs(r - 1.0) < 0.02


class TestLockAngle:
    def test_resonant_overcoupled_offset_pi(self):
        optical = OpticalMode(omega_o=1e15, kappa=1e9, kappa_e=0.54e9)
        q = lock_to_quadrature(0.37, optical, 0.0)
        assert q.theta == pytest.approx(0.37 + np.pi, abs=1e-12)

    def test_weak_coupling_no_phase(self):
        optical = OpticalMode(omega_o=1e15, kappa=1e9, kappa_e=1e-9 * 1e9)
        q = lock_to_quadrature(0.37, optical, 0.0)
        assert q.phi == pytest.approx(0.0, abs=1e-8)
        assert q.theta == pytest.approx(0.37, abs=1e-8)

    def test_round_trip(self):
        optical = OpticalMode(omega_o=1e15, kappa=KAPPA, kappa_e=0.55 * KAPPA)
        for theta_lock in np.linspace(-np.pi, np.pi, 17):
            q = lock_to_quadrature(theta_lock, optical, DELTA)
            back = quadrature_to_lock(q.theta, optical, DELTA)
            assert back.theta_lock == pytest.approx(theta_lock, abs=1e-12)
            assert q.theta_lock == pytest.approx(q.theta - q.phi, abs=1e-12)

    def test_bijection_strictly_monotone(self):
        optical = OpticalMode(omega_o=1e15, kappa=KAPPA, kappa_e=0.55 * KAPPA)
        locks = np.linspace(0.0, 2 * np.pi, 100, endpoint=False)
        thetas = [lock_to_quadrature(t, optical, DELTA).theta for t in locks]
        assert np.all(np.diff(thetas) > 0)


class TestRbwResample:
    def test_white_is_fixed_point(self):
        freqs = np.linspace(1e3, 40e6, 50000)
        trace = SpectrumTrace(freqs=freqs, values=np.ones_like(freqs))
        out_freqs = np.linspace(1e6, 39e6, 477)
        out = rbw_resample(trace, 300e3, out_freqs)
        assert np.all(np.abs(out.values - 1.0) < 1e-9)

    def test_linearity(self):
        rng = np.random.default_rng(7)
        freqs = np.linspace(1e3, 40e6, 50000)
        x = 1.0 + rng.random(50000)
        y = 0.2 + rng.random(50000)
        out_freqs = np.linspace(1e6, 39e6, 401)

        def conv(v):
            return rbw_resample(SpectrumTrace(freqs=freqs, values=v), 300e3, out_freqs).values

        lhs = conv(2.0 * x + 0.3 * y)
        rhs = 2.0 * conv(x) + 0.3 * conv(y)
        assert np.max(np.abs(lhs - rhs)) < 1e-12 * np.max(np.abs(lhs))

    def test_narrow_lorentzian_area_preserved_peak_set_by_kernel(self):
        # gamma_i/2pi = 172 Hz line under a 300 kHz analyzer bandwidth
        hwhm = 86.0
        df = 20.0
        freqs = 28e6 + np.arange(-90000, 90001) * df
        area = 5.0e4
        values = (area / np.pi) * hwhm / ((freqs - 28e6) ** 2 + hwhm**2)
        trace = SpectrumTrace(freqs=freqs, values=values)
        rbw = 300e3
        out_freqs = 28e6 + np.arange(-4000, 4001) * 250.0
        out = rbw_resample(trace, rbw, out_freqs)
        sigma = rbw / (2 * np.sqrt(2 * np.log(2)))
        # delta-like feature: peak ~ area / (sqrt(2 pi) sigma)
        assert out.values.max() == pytest.approx(area / (np.sqrt(2 * np.pi) * sigma), rel=1e-3)
        out_area = np.trapezoid(out.values, out_freqs)
        assert out_area == pytest.approx(area, rel=1e-3)

    def test_broad_feature_power_preserved(self):
        freqs = np.linspace(1e3, 40e6, 60000)
        values = 1.0 + 3.0 * np.exp(-0.5 * ((freqs - 20e6) / 2e6) ** 2)
        out_freqs = np.linspace(5e6, 35e6, 1501)
        out = rbw_resample(SpectrumTrace(freqs=freqs, values=values), 300e3, out_freqs)
        p_in = np.trapezoid(np.interp(out_freqs, freqs, values), out_freqs)
        p_out = np.trapezoid(out.values, out_freqs)
        assert p_out == pytest.approx(p_in, rel=1e-3)

    def test_rejects_out_of_span(self):
        freqs = np.linspace(1e6, 30e6, 30000)
        trace = SpectrumTrace(freqs=freqs, values=np.ones_like(freqs))
        with pytest.raises(ValueError):
            rbw_resample(trace, 300e3, np.array([0.5e6, 10e6]))

    def test_rejects_coarse_fine_grid(self):
        freqs = np.linspace(1e6, 30e6, 300)
        trace = SpectrumTrace(freqs=freqs, values=np.ones_like(freqs))
        with pytest.raises(ValueError):
            rbw_resample(trace, 300e3, np.linspace(2e6, 29e6, 200))

    def test_squeezing_band_unaffected(self, paper_params):
        # analyzer smoothing must not disturb the broad sub-shot-noise bands
        scenario = full_scenario(paper_params)
        fine = np.linspace(1e4, 40e6, 50000)
        theta = lock_to_quadrature(0.0, paper_params.optical, DELTA).theta - 0.12
        comp = output_spectrum(TWO_PI * fine, theta, scenario, detected=True)
        trace = SpectrumTrace(freqs=fine, values=comp["s_norm"])
        out_freqs = np.linspace(2e6, 38e6, 451)
        out = rbw_resample(trace, 300e3, out_freqs)
        raw = np.interp(out_freqs, fine, comp["s_norm"])
        band = raw < 1.0
        if np.any(band):
            assert np.max(np.abs(out.values[band] - raw[band])) < 2e-3


class TestDensityMap:
    def test_zero_coupling_map_is_unity(self, paper_optical):
        mech = MechanicalMode(omega_m0=OMEGA_M0, gamma_i=GAMMA_I, g0=G0)
        params = SystemParams.build(paper_optical, mech, delta=DELTA, n_c=0.0)
        scenario = Scenario(system=params, bath=BathModel(t_b0=16.0))
        sqmap = assemble_density_map(
            np.linspace(-1.0, 1.0, 5), np.linspace(20e6, 36e6, 41), scenario,
            fine_freqs=np.linspace(1e5, 40e6, 20000), rbw=300e3,
        )
        assert np.all(np.abs(sqmap.values - 1.0) < 1e-9)

    def test_paper_scenario_geometry(self, resonant_bad_cavity):
        # simplified-model map: sub-unity wedges on opposite lock-angle
        # signs below vs above the mechanical frequency, separated by an
        # unbroken at-or-above-shot-noise band through theta_lock = 0 and
        # omega = omega_m
        scenario = Scenario(system=resonant_bad_cavity, bath=BathModel(t_b0=16.0))
        f_m = resonant_bad_cavity.omega_m / TWO_PI
        theta_locks = np.linspace(-np.pi / 2, np.pi / 2, 41)
        freqs = np.linspace(0.6 * f_m, 1.4 * f_m, 161)
        sqmap = assemble_density_map(
            theta_locks, freqs, scenario,
            fine_freqs=np.linspace(f_m / 100, 1.6 * f_m, 30000), rbw=100e3,
        )
        sub = sqmap.values < 1.0 - 1e-6
        assert sub.any()
        ii, jj = np.nonzero(sub)
        signs = np.sign(theta_locks[ii]) * np.sign(freqs[jj] - f_m)
        assert np.all(signs > 0)
        assert sub[:, freqs < f_m].any() and sub[:, freqs > f_m].any()
        # separating band: zero lock angle and the mechanical resonance
        mid_row = np.argmin(np.abs(theta_locks))
        mid_col = np.argmin(np.abs(freqs - f_m))
        assert np.all(sqmap.values[mid_row] >= 1.0 - 1e-6)
        assert np.all(sqmap.values[:, mid_col] >= 1.0 - 1e-6)

    def test_loss_mixing_affine_relation(self, paper_params):
        base = Scenario(system=paper_params, bath=BathModel(t_b0=16.0, c0=3.2e-4))
        chained = Scenario(system=paper_params, bath=base.bath, chain=CHAIN)
        theta_locks = np.linspace(-0.4, 0.4, 3)
        freqs = np.linspace(26e6, 30e6, 21)
        fine = np.linspace(1e5, 32e6, 20000)
        m0 = assemble_density_map(theta_locks, freqs, base, fine_freqs=fine, rbw=300e3)
        m1 = assemble_density_map(theta_locks, freqs, chained, fine_freqs=fine, rbw=300e3)
        eta = chained.eta_tot
        assert np.max(np.abs(m1.values - (eta * m0.values + 1 - eta))) < 1e-12

    def test_quadrature_periodicity_pi(self, resonant_bad_cavity):
        scenario = Scenario(system=resonant_bad_cavity, bath=BathModel(t_b0=16.0))
        freqs = np.linspace(20e6, 36e6, 31)
        fine = np.linspace(1e5, 40e6, 20000)
        locks = np.array([-0.7, 0.2, 1.1])
        m1 = assemble_density_map(locks, freqs, scenario, fine_freqs=fine, rbw=300e3)
        m2 = assemble_density_map(locks + np.pi, freqs, scenario, fine_freqs=fine, rbw=300e3)
        assert np.max(np.abs(m1.values - m2.values)) < 1e-10

    def test_detected_floor(self, paper_params):
        scenario = full_scenario(paper_params)
        sqmap = assemble_density_map(
            np.linspace(-np.pi / 2, np.pi / 2, 21), np.linspace(24e6, 32e6, 41),
            scenario, fine_freqs=np.linspace(1e5, 34e6, 20000), rbw=300e3,
        )
        assert np.all(sqmap.values >= 1.0 - scenario.eta_tot - 1e-12)

    def test_threaded_rows_identical(self, paper_params, monkeypatch):
        scenario = full_scenario(paper_params)
        locks = np.linspace(-0.5, 0.5, 5)
        freqs = np.linspace(26e6, 30e6, 11)
        fine = np.linspace(1e5, 32e6, 20000)
        serial = assemble_density_map(locks, freqs, scenario, fine_freqs=fine, rbw=300e3)
        monkeypatch.setenv("OMSQUEEZE_THREADS", "4")
        threaded = assemble_density_map(locks, freqs, scenario, fine_freqs=fine, rbw=300e3)
        assert np.array_equal(serial.values, threaded.values)


class TestScenarioComponents:
    def test_components_sum_to_total(self, paper_params):
        scenario = full_scenario(paper_params)
        w = TWO_PI * np.linspace(1e6, 39e6, 101)
        comp = output_spectrum(w, 0.3, scenario, detected=False)
        total = (
            comp["s_vac"] + comp["s_thermal"] + comp["s_phase"]
            + comp["s_extra"] + comp["s_absorptive"]
        )
        assert np.allclose(comp["s_norm"], total, rtol=1e-13)

    def test_all_components_nonnegative(self, paper_params):
        scenario = full_scenario(paper_params)
        w = TWO_PI * np.linspace(1e6, 39e6, 101)
        for theta in (-1.2, -0.3, 0.0, 0.8):
            comp = output_spectrum(w, theta, scenario, detected=False)
            for key, vals in comp.items():
                assert np.all(vals >= 0.0), key
