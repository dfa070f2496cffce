import numpy as np
import pytest

from tonells.baselines import (
    DpllConfig,
    NlsConfig,
    concentrated_objective,
    dpll_track,
    nls_estimate,
)
from tonells.errors import ConvergenceError, SearchBoundaryError
from tonells.experiments import make_jump_signal
from tonells.signal_model import (
    TWO_PI,
    NoiseSpec,
    ToneParams,
    generate_noisy_tone,
)
from tonells.stage1 import build_phase_solver, estimate_phase_window

FS = 1e7


def tone(f_hz, snr_db, duration, seed, theta=0.0):
    params = ToneParams.from_hz(1.0, f_hz, theta)
    spec = NoiseSpec.noiseless() if snr_db is None else NoiseSpec.from_snr_db(1.0, snr_db)
    return generate_noisy_tone(params, spec, FS, duration, seed)


class TestNls:
    def test_noiseless_exact(self):
        sig = tone(200e3, None, 0.5e-3, 0, theta=0.8)
        cfg = NlsConfig(center_omega=TWO_PI * 195e3, half_width=TWO_PI * 20e3)
        est = nls_estimate(sig, cfg)
        assert abs(est.omega_hat - TWO_PI * 200e3) <= cfg.tolerance

    def test_refined_beats_fine_brute_force_grid(self):
        for seed in (1, 2, 3):
            sig = tone(200e3, 27.0, 0.3e-3, seed, theta=0.5 * seed)
            cfg = NlsConfig(center_omega=TWO_PI * 195e3, half_width=TWO_PI * 20e3)
            est = nls_estimate(sig, cfg)
            duration = len(sig) / FS
            step = TWO_PI / (8.0 * duration) / 10.0
            grid = np.arange(cfg.center_omega - cfg.half_width,
                             cfg.center_omega + cfg.half_width, step)
            best_grid = np.max(concentrated_objective(sig, grid))
            refined = concentrated_objective(sig, est.omega_hat)
            assert refined >= best_grid * (1.0 - 1e-9)

    def test_objective_invariant_to_signal_phase(self):
        cfg = NlsConfig(center_omega=TWO_PI * 195e3, half_width=TWO_PI * 20e3)
        a = nls_estimate(tone(200e3, None, 0.3e-3, 0, theta=0.1), cfg)
        b = nls_estimate(tone(200e3, None, 0.3e-3, 0, theta=2.3), cfg)
        assert abs(a.omega_hat - b.omega_hat) <= 2 * cfg.tolerance

    def test_matches_stage1_normal_equations(self):
        # the concentrated objective at w equals ||A b||^2 with b from the
        # window solver built over the whole record at reference w
        sig = tone(150e3, 30.0, 0.2e-3, 4)
        omega = TWO_PI * 150e3
        q_full = 150e3 * len(sig) / FS
        solver = build_phase_solver(omega, q_full, FS)
        assert solver.config.n_window == len(sig)
        est = estimate_phase_window(solver, sig.samples)
        tau = np.arange(len(sig)) / FS
        a = np.column_stack([np.sin(omega * tau), np.cos(omega * tau)])
        fitted = a @ np.array([est.b1, est.b2])
        want = float(fitted @ fitted)
        got = concentrated_objective(sig, omega)
        assert got == pytest.approx(want, rel=1e-9)

    def test_boundary_hit(self):
        # tone just past the window edge: the objective rises to the boundary
        sig = tone(211e3, None, 0.3e-3, 0)
        cfg = NlsConfig(center_omega=TWO_PI * 200e3, half_width=TWO_PI * 10e3)
        with pytest.raises(SearchBoundaryError):
            nls_estimate(sig, cfg)

    def test_convergence_budget(self):
        sig = tone(200e3, None, 0.3e-3, 0)
        cfg = NlsConfig(center_omega=TWO_PI * 195e3, half_width=TWO_PI * 20e3,
                        tolerance=1e-10, max_iterations=3)
        with pytest.raises(ConvergenceError):
            nls_estimate(sig, cfg)

    def test_window_must_exclude_zero(self):
        with pytest.raises(ValueError):
            NlsConfig(center_omega=TWO_PI * 1e3, half_width=TWO_PI * 2e3)


def linearized_loop_frequency(delta_omega, settling_time, damping, dt, n):
    """Oracle: the same PI loop run on the linear phase-error model.

    Phase error theta_e obeys theta_e' = delta_omega - v, v = kp*theta_e +
    ki*integral(theta_e); no sine nonlinearity, no double-frequency ripple.
    """
    wn = 4.0 / (damping * settling_time)
    kp = 2.0 * damping * wn
    ki = wn * wn
    theta_e = 0.0
    integ = 0.0
    out = np.empty(n)
    for i in range(n):
        e = theta_e
        integ += ki * e * dt
        v = kp * e + integ
        theta_e += (delta_omega - v) * dt
        out[i] = v
    return out


class TestDpll:
    def test_locks_to_in_range_tone(self):
        # 500 Hz offset, lock-in range ~ 2*zeta*wn = 2.5 kHz at 0.5 ms settling;
        # the mean over many double-frequency ripple cycles isolates the loop's
        # (zero) static error
        f_sig = 400.5e3
        sig = tone(f_sig, None, 10e-3, 0, theta=1.0)
        cfg = DpllConfig(center_omega=TWO_PI * 400e3, settling_time=0.5e-3,
                         sample_rate=FS)
        res = dpll_track(sig, cfg)
        assert abs(res.settled_mean_hz(fraction=0.5) - f_sig) < 0.001 * 500.0
        assert res.lock_fraction(len(sig) // 2) > 0.99

    def test_step_response_settles_like_linear_model(self):
        # frequency step of 400 Hz; the cycle-averaged output should follow
        # the linearized loop, and land within 2% of the step by t = settling
        settling = 1e-3
        f0, f1 = 400e3, 400.4e3
        t_jump = 2e-3
        duration = 5e-3
        sig = make_jump_signal(f0, f1, t_jump, duration, FS, None, seed=0)
        cfg = DpllConfig(center_omega=TWO_PI * f0, settling_time=settling,
                         sample_rate=FS)
        res = dpll_track(sig, cfg)
        k0 = int(t_jump * FS)
        step_hz = f1 - f0
        kernel = np.ones(2000) / 2000.0   # ~160 ripple cycles
        traj = np.convolve(res.freq_hz[k0:] - f0, kernel, mode="valid")
        linear_raw = linearized_loop_frequency(TWO_PI * step_hz, settling,
                                               cfg.damping, 1.0 / FS,
                                               len(sig) - k0) / TWO_PI
        linear = np.convolve(linear_raw, kernel, mode="valid")
        probes = [int(0.3 * settling * FS), int(0.6 * settling * FS),
                  int(1.2 * settling * FS)]
        for p in probes:
            assert traj[p] - linear[p] == pytest.approx(0.0, abs=0.05 * step_hz)
        settled = np.mean(res.freq_hz[k0 + int(settling * FS):
                                      k0 + int(2.0 * settling * FS)]) - f0
        assert abs(settled - step_hz) <= 0.02 * step_hz + 0.5

    def test_steady_state_error_is_zero_mean(self):
        sig = tone(401e3, None, 10e-3, 0, theta=0.4)
        cfg = DpllConfig(center_omega=TWO_PI * 400e3, settling_time=0.5e-3,
                         sample_rate=FS)
        res = dpll_track(sig, cfg)
        assert abs(res.settled_mean_hz(fraction=0.5) - 401e3) < 1.0

    def test_slow_loop_loses_lock_on_out_of_range_jump(self):
        # 5 kHz step against a lock-in range of ~640 Hz (2 ms settling)
        sig = make_jump_signal(400e3, 405e3, 10e-3, 20e-3, FS, 27.0, seed=5,
                               theta0=0.7)
        cfg = DpllConfig(center_omega=TWO_PI * 400e3, settling_time=2e-3,
                         sample_rate=FS)
        res = dpll_track(sig, cfg)
        n_jump = int(10e-3 * FS)
        assert res.lock_fraction(n_jump // 2, n_jump) > 0.95
        assert res.lock_fraction(n_jump + n_jump // 2) < 0.2
        assert abs(res.settled_mean_hz() - 405e3) > 1e3

    def test_fast_loop_rides_through_same_jump(self):
        # the 0.05 ms-settling loop has a ~25 kHz lock-in range: no slip
        sig = make_jump_signal(400e3, 405e3, 2e-3, 4e-3, FS, 27.0, seed=5,
                               theta0=0.7)
        cfg = DpllConfig(center_omega=TWO_PI * 400e3, settling_time=0.05e-3,
                         sample_rate=FS)
        res = dpll_track(sig, cfg)
        n_jump = int(2e-3 * FS)
        assert res.lock_fraction(n_jump + n_jump // 2) > 0.9
        assert abs(res.settled_mean_hz() - 405e3) < 50.0

    def test_gain_mapping(self):
        cfg = DpllConfig(center_omega=TWO_PI * 400e3, settling_time=1e-3,
                         sample_rate=FS)
        wn = 4.0 / (cfg.damping * 1e-3)
        kp, ki = cfg.gains
        assert cfg.natural_freq == pytest.approx(wn)
        assert kp == pytest.approx(2 * cfg.damping * wn)
        assert ki == pytest.approx(wn * wn)

    def test_validation(self):
        with pytest.raises(ValueError):
            DpllConfig(center_omega=1.0, settling_time=0.0, sample_rate=FS)
        with pytest.raises(ValueError):
            DpllConfig(center_omega=1.0, settling_time=1e-12, sample_rate=FS)
