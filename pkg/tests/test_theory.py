import numpy as np
import pytest
from scipy.integrate import quad

from tonells.errors import UndefinedPhaseError
from tonells.signal_model import TWO_PI, wrap_phase
from tonells.stage1 import build_phase_solver, estimate_phase_window
from tonells.theory import (
    Q_STAR,
    angle_difference_mod_pi,
    expected_phase,
    expected_phase_q_half,
    expected_phase_q_one,
    expected_phase_q_star,
    gram_integral_approx,
    phase_bias_profile,
    predicted_freq_variance,
    predicted_freq_variance_general,
    predicted_freq_variance_hz2,
    predicted_phase_variance,
    q_sweep,
)


def quadrature_oracle_phase(omega, omega_r, q, phi):
    """Continuum LLS fit evaluated by numerical integration (independent path)."""
    t_n = TWO_PI * q / omega_r
    s = lambda t: np.sin(omega_r * t)
    c = lambda t: np.cos(omega_r * t)
    y = lambda t: np.sin(omega * t + phi)
    iss = quad(lambda t: s(t) ** 2, 0, t_n, limit=400)[0]
    icc = quad(lambda t: c(t) ** 2, 0, t_n, limit=400)[0]
    isc = quad(lambda t: s(t) * c(t), 0, t_n, limit=400)[0]
    isy = quad(lambda t: s(t) * y(t), 0, t_n, limit=400)[0]
    icy = quad(lambda t: c(t) * y(t), 0, t_n, limit=400)[0]
    det = iss * icc - isc * isc
    b1 = (icc * isy - isc * icy) / det
    b2 = (-isc * isy + iss * icy) / det
    return np.arctan2(b2, b1)


class TestPhaseVariance:
    def test_formula(self):
        assert predicted_phase_variance(1e7, 50e-6, 100.0) == pytest.approx(2.0e-5, rel=1e-12)
        assert predicted_phase_variance(1e7, 5e-6, 100.0) == pytest.approx(2.0e-4, rel=1e-12)

    def test_snr_scaling_is_exact(self):
        a = predicted_phase_variance(1e7, 1e-5, 50.0)
        b = predicted_phase_variance(1e7, 1e-5, 100.0)
        assert a == 2.0 * b

    def test_invalid(self):
        with pytest.raises(ValueError):
            predicted_phase_variance(0.0, 1e-5, 10.0)
        with pytest.raises(ValueError):
            predicted_phase_variance(1e7, -1e-5, 10.0)

    def test_monte_carlo_phase_variance(self):
        # 1e4 noisy windows at the reference frequency, 10 whole cycles each
        fr = 100e3
        fs = 1e7
        snr_db = 20.0
        solver = build_phase_solver(TWO_PI * fr, 10.0, fs)
        n = solver.config.n_window
        n_windows = 10_000
        rng = np.random.default_rng(77)
        sigma = np.sqrt(1.0 / (2.0 * 10 ** (snr_db / 10)))
        tau = np.arange(n) / fs
        clean = np.sin(TWO_PI * fr * tau + 0.6)
        windows = clean + rng.normal(0, sigma, (n_windows, n))
        phases = np.array(
            [estimate_phase_window(solver, w).phase for w in windows]
        )
        predicted = predicted_phase_variance(fs, solver.config.window_time,
                                             10 ** (snr_db / 10))
        assert np.var(phases) == pytest.approx(predicted, rel=0.10)


class TestFreqVariance:
    def test_reference_grid(self):
        # (Fs=10 MHz, SNR=100): 12/(Fs tN^3 SNR) converted to Hz^2
        cases = {1e-3: 0.3040, 0.8e-3: 0.5935, 0.6e-3: 1.4072,
                 0.4e-3: 4.7494, 0.2e-3: 37.9954}
        for t_block, want in cases.items():
            got = predicted_freq_variance_hz2(1e7, t_block, 100.0)
            assert got == pytest.approx(want, rel=0.005)

    def test_radsq_value(self):
        assert predicted_freq_variance(1e7, 1e-3, 100.0) == pytest.approx(12.0, rel=1e-12)

    def test_cubic_scaling_exact(self):
        full = predicted_freq_variance(1e7, 1e-3, 100.0)
        half = predicted_freq_variance(1e7, 0.5e-3, 100.0)
        assert half == 8.0 * full

    def test_general_form(self):
        # 12 sigma^2/(F_phi tN^3)
        assert predicted_freq_variance_general(1e-4, 5e4, 1e-3) == pytest.approx(
            12.0 * 1e-4 / (5e4 * 1e-9), rel=1e-12
        )

    def test_invalid(self):
        with pytest.raises(ValueError):
            predicted_freq_variance(1e7, 0.0, 10.0)
        with pytest.raises(ValueError):
            predicted_freq_variance_general(-1.0, 1.0, 1.0)


class TestExpectedPhase:
    def test_matches_quadrature_oracle(self):
        for ratio in (0.8, 0.914, 1.05, 1.25):
            for q in (0.55, Q_STAR, 1.3, 4.2):
                for phi in (-2.0, 0.4, 2.9):
                    omega_r = TWO_PI * 64e3
                    got = expected_phase(ratio * omega_r, omega_r, q, phi)
                    want = quadrature_oracle_phase(ratio * omega_r, omega_r, q, phi)
                    assert abs(wrap_phase(got - want)) < 1e-9

    def test_matched_frequency_is_identity(self):
        omega = TWO_PI * 10e3
        phi = np.linspace(-3, 3, 11)
        np.testing.assert_allclose(expected_phase(omega, omega, 1.0, phi),
                                   wrap_phase(phi), atol=1e-12)

    def test_q_one_slope_is_unity_at_matched_frequency(self):
        omega = TWO_PI * 10e3
        phi = np.linspace(0.1, 0.9, 200)
        e = np.unwrap(expected_phase_q_one(omega, omega, phi))
        slope = np.gradient(e, phi)
        np.testing.assert_allclose(slope, 1.0, atol=1e-6)

    def test_fixed_coefficient_form_agrees_at_q_star(self):
        # 1000-point grid over (omega/omega_r, phi)
        omega_r = TWO_PI * 100e3
        ratios = np.linspace(0.85, 1.2, 40)
        phis = np.linspace(-np.pi, np.pi, 25, endpoint=False)
        for ratio in ratios:
            a = expected_phase(ratio * omega_r, omega_r, Q_STAR, phis)
            b = expected_phase_q_star(ratio * omega_r, omega_r, phis)
            assert np.max(angle_difference_mod_pi(a, b)) < 1e-9

    def test_specializations_agree(self):
        omega_r = TWO_PI * 50e3
        phis = np.linspace(-np.pi, np.pi, 400, endpoint=False)
        for ratio in (0.9, 1.15, 1.25):
            a = expected_phase(ratio * omega_r, omega_r, 0.5, phis)
            b = expected_phase_q_half(ratio * omega_r, omega_r, phis)
            assert np.max(angle_difference_mod_pi(a, b)) < 1e-9
            a = expected_phase(ratio * omega_r, omega_r, 1.0, phis)
            b = expected_phase_q_one(ratio * omega_r, omega_r, phis)
            assert np.max(angle_difference_mod_pi(a, b)) < 1e-9

    def test_q_star_warps_less_than_q_half(self):
        # f=20 kHz against f_r=16 kHz: slope warping comparison
        omega_r = TWO_PI * 16e3
        omega = TWO_PI * 20e3
        phi = np.linspace(0, TWO_PI, 4096, endpoint=False)

        def max_warp(q):
            e = np.unwrap(expected_phase(omega, omega_r, q, phi))
            return np.max(np.abs(np.gradient(e, phi) - 1.0))

        assert max_warp(Q_STAR) < 0.25 * max_warp(0.5)

    def test_periodicity(self):
        omega_r = TWO_PI * 30e3
        phi = np.linspace(0, TWO_PI, 64, endpoint=False)
        a = expected_phase(1.1 * omega_r, omega_r, Q_STAR, phi)
        b = expected_phase(1.1 * omega_r, omega_r, Q_STAR, phi + TWO_PI)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_frequency_scale_invariance(self):
        # depends only on omega/omega_r and q
        phi = np.linspace(-3, 3, 33)
        a = expected_phase(TWO_PI * 22e3, TWO_PI * 20e3, 0.8, phi)
        b = expected_phase(TWO_PI * 22e6, TWO_PI * 20e6, 0.8, phi)
        np.testing.assert_allclose(a, b, atol=1e-9)

    def test_undefined_phase(self):
        # a 3x tone is orthogonal to a half-cycle reference window
        with pytest.raises(UndefinedPhaseError):
            expected_phase(3.0 * TWO_PI * 1e4, TWO_PI * 1e4, 0.5, 0.3)

    def test_invalid(self):
        with pytest.raises(ValueError):
            expected_phase(-1.0, 1.0, 1.0, 0.0)


class TestBiasProfile:
    def test_matched_frequency_flat(self):
        profile = phase_bias_profile(TWO_PI * 10e3, TWO_PI * 10e3, 0.9, 256)
        assert profile.bias_variance < 1e-18

    def test_q_star_beats_half_and_one(self):
        omega = TWO_PI * 300300.0
        omega_r = TWO_PI * 300000.0
        v_star = phase_bias_profile(omega, omega_r, Q_STAR).bias_variance
        v_half = phase_bias_profile(omega, omega_r, 0.5).bias_variance
        v_one = phase_bias_profile(omega, omega_r, 1.0).bias_variance
        assert v_star * 10 < v_half
        assert v_star * 10 < v_one

    def test_discrete_estimator_reproduces_profile(self):
        fr = 16e3
        fs = 100 * fr
        solver = build_phase_solver(TWO_PI * fr, Q_STAR, fs)
        tau = np.arange(solver.config.n_window) / fs
        profile = phase_bias_profile(TWO_PI * 20e3, TWO_PI * fr,
                                     solver.config.q_eff, 64)
        for phi, want in zip(profile.phi_grid, profile.expected):
            est = estimate_phase_window(
                solver, np.sin(TWO_PI * 20e3 * tau + phi)
            )
            assert abs(wrap_phase(est.phase - want)) < 0.01

    def test_grid_size_validation(self):
        with pytest.raises(ValueError):
            phase_bias_profile(1.0, 2.0, 1.0, grid_size=8)

    def test_bias_is_periodic_in_reporting_grid(self):
        p = phase_bias_profile(TWO_PI * 21e3, TWO_PI * 20e3, Q_STAR, 128)
        # curve is periodic: endpoint wraps back to the start value
        assert abs(p.bias[0] - p.bias[-1]) < 2 * np.pi / 128


class TestQSweep:
    def test_matched_frequency_flat(self):
        omega = TWO_PI * 10e3
        _, variances, _ = q_sweep(omega, omega, 0.4, 1.5, 20, grid_size=64)
        assert np.all(variances < 1e-18)

    def test_values_match_pointwise_profiles(self):
        omega = TWO_PI * 301e3
        omega_r = TWO_PI * 300e3
        qs, variances, _ = q_sweep(omega, omega_r, 0.6, 0.9, 12, grid_size=128)
        for q, v in zip(qs, variances):
            assert v == phase_bias_profile(omega, omega_r, q, 128).bias_variance

    def test_validation(self):
        with pytest.raises(ValueError):
            q_sweep(1.0, 1.0, 0.5, 0.4, 20)
        with pytest.raises(ValueError):
            q_sweep(1.0, 1.0, 0.4, 0.5, 5)


class TestGramApproximation:
    def test_discrete_converges_to_integral_form(self):
        fr = 50e3
        q = 3.3
        errors = []
        for oversample in (50, 500, 5000):
            fs = oversample * fr
            solver = build_phase_solver(TWO_PI * fr, q, fs)
            approx = gram_integral_approx(TWO_PI * fr, solver.config.q_eff, fs)
            scale = fs * solver.config.window_time / 2.0
            errors.append(np.max(np.abs(solver.gram - approx)) / scale)
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] < 1e-3

    def test_offdiagonal_ratio_vanishes_at_whole_cycles(self):
        # whole-cycle windows decouple the quadratures exactly, so the
        # covariance off-diagonal/diagonal ratio is at the rounding floor
        fs = 1e7
        fr = 100e3
        for q in (1.0, 5.0, 20.0):
            solver = build_phase_solver(TWO_PI * fr, q, fs)
            j = solver.gram_inverse
            assert abs(j[0, 1]) / j[0, 0] < 1e-10

    def test_offdiagonal_ratio_shrinks_with_growing_windows(self):
        # away from whole cycles the ratio decays like 1/q
        fs = 1e7
        fr = 100e3
        ratios = []
        for q in (1.3, 5.3, 20.3):
            solver = build_phase_solver(TWO_PI * fr, q, fs)
            j = solver.gram_inverse
            ratios.append(abs(j[0, 1]) / j[0, 0])
        assert ratios[0] > ratios[1] > ratios[2]
        assert ratios[2] < 0.01
