"""Closed-form error predictions and bias analysis for the two-stage estimator.

Variance predictions come from the continuum (integral) approximation of
the window Gram matrix, which is accurate for windows spanning many
reference cycles; the estimator itself never uses that approximation.

The expected-phase closed form is the noise-free first-order expected
value of the stage-1 fit for a unit tone at frequency w fitted against
reference frequency w_r over a window of q reference cycles. It is
evaluated with a quadrant-consistent arctangent: the raw trigonometric
ratio drops a factor of sign(w^2 - w_r^2), which is restored here so the
returned angle agrees with the actual fit for w on either side of w_r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UndefinedPhaseError
from .signal_model import TWO_PI, wrap_phase

Q_STAR = 1.0 / math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0) * math.pi
_MATCHED_REL_TOL = 1e-9


def predicted_phase_variance(sample_rate, window_time, snr):
    """Variance of one window-phase estimate: 1/(Fs * t_n * SNR) rad^2."""
    _require_positive(sample_rate=sample_rate, window_time=window_time, snr=snr)
    return 1.0 / (sample_rate * window_time * snr)


def predicted_freq_variance(sample_rate, block_time, snr):
    """Variance of the frequency estimate: 12/(Fs * t_N^3 * SNR) (rad/s)^2."""
    _require_positive(sample_rate=sample_rate, block_time=block_time, snr=snr)
    return 12.0 / (sample_rate * block_time ** 3 * snr)


def predicted_freq_variance_general(phase_variance, phase_rate, block_time):
    """Slope variance for phase noise sigma_phi^2 at rate F_phi over t_N.

    Returns 12*sigma_phi^2/(F_phi * t_N^3) in (rad/s)^2.
    """
    _require_positive(phase_variance=phase_variance, phase_rate=phase_rate,
                      block_time=block_time)
    return 12.0 * phase_variance / (phase_rate * block_time ** 3)


def radsq_to_hzsq(variance_rad):
    """Convert a variance in (rad/s)^2 to Hz^2."""
    return variance_rad / (TWO_PI * TWO_PI)


def predicted_freq_variance_hz2(sample_rate, block_time, snr):
    """predicted_freq_variance expressed in Hz^2."""
    return radsq_to_hzsq(predicted_freq_variance(sample_rate, block_time, snr))


def _require_positive(**kwargs):
    for name, value in kwargs.items():
        if not (value > 0) or not np.isfinite(value):
            raise ValueError(f"{name} must be positive and finite, got {value}")


def gram_integral_approx(omega_r, q, sample_rate):
    """Continuum approximation of the window Gram matrix (theory only).

    Fs * [[t_n/2 - sin(2 w t_n)/(4w), (1 - cos(2 w t_n))/(4w)],
          [(1 - cos(2 w t_n))/(4w),   t_n/2 + sin(2 w t_n)/(4w)]]

    The off-diagonal is the integral of sin*cos from 0 to t_n, which is
    nonnegative. Valid when the window spans many reference cycles; the
    estimator uses the exact discrete sums instead.
    """
    _require_positive(omega_r=omega_r, q=q, sample_rate=sample_rate)
    t_n = TWO_PI * q / omega_r
    s = math.sin(2.0 * omega_r * t_n)
    c = math.cos(2.0 * omega_r * t_n)
    off = (1.0 - c) / (4.0 * omega_r)
    return sample_rate * np.array(
        [[t_n / 2.0 - s / (4.0 * omega_r), off],
         [off, t_n / 2.0 + s / (4.0 * omega_r)]]
    )


def _expected_phase_brackets(omega, omega_r, q, phi):
    """Numerator/denominator trigonometric polynomials of the closed form."""
    a = phi + TWO_PI * q * (omega - omega_r) / omega_r
    b = phi + TWO_PI * q * (omega + omega_r) / omega_r
    p = (2.0 * omega * np.cos(phi)
         - (omega + omega_r) * np.cos(a)
         + (omega_r - omega) * np.cos(b))
    r = (-2.0 * omega_r * np.sin(phi)
         + (omega + omega_r) * np.sin(a)
         + (omega_r - omega) * np.sin(b))
    s2 = math.sin(TWO_PI * q)
    s4 = math.sin(2.0 * TWO_PI * q)
    num = -(p * (-2.0 * TWO_PI * q + s4) + 2.0 * s2 * s2 * r)
    den = -2.0 * p * s2 * s2 + (2.0 * TWO_PI * q + s4) * r
    return num, den


def expected_phase(omega, omega_r, q, phi):
    """Noise-free expected stage-1 phase for a tone at phase phi.

    Parameters
    ----------
    omega, omega_r : float
        True and reference angular frequencies (rad/s).
    q : float
        Window length as a fraction of a reference cycle.
    phi : float or ndarray
        True signal phase(s) at the window start (rad).

    Returns
    -------
    float or ndarray
        Expected estimate in (-pi, pi]. Exactly the true wrapped phase when
        omega == omega_r; otherwise warped periodically in phi.
    """
    _require_positive(omega=omega, omega_r=omega_r, q=q)
    phi_arr = np.asarray(phi, dtype=np.float64)
    scalar = phi_arr.ndim == 0
    if abs(omega - omega_r) <= _MATCHED_REL_TOL * omega_r:
        out = wrap_phase(phi_arr)
        return float(out) if scalar else out
    num, den = _expected_phase_brackets(omega, omega_r, q, phi_arr)
    scale = (omega + omega_r) * (2.0 * TWO_PI * q + 2.0)
    bad = np.hypot(num, den) <= 1e-15 * scale
    if np.any(bad):
        raise UndefinedPhaseError(
            f"expected phase undefined (numerator and denominator vanish) at "
            f"omega={omega:.6g}, omega_r={omega_r:.6g}, q={q:.6g}, "
            f"phi={np.atleast_1d(phi_arr)[np.argmax(np.atleast_1d(bad))]:.6g}"
        )
    sign = 1.0 if omega > omega_r else -1.0
    out = np.arctan2(sign * num, sign * den)
    return float(out) if scalar else out


def expected_phase_q_half(omega, omega_r, phi):
    """Specialization at q = 1/2 (agrees with the general form modulo pi)."""
    chi = np.pi * omega / omega_r
    phi = np.asarray(phi, dtype=np.float64)
    num = -(omega / omega_r) * (np.cos(phi) + np.cos(phi + chi))
    den = np.sin(phi) + np.sin(phi + chi)
    return np.arctan2(num, den)


def expected_phase_q_one(omega, omega_r, phi):
    """Specialization at q = 1 (agrees with the general form modulo pi)."""
    chi = np.pi * omega / omega_r
    phi = np.asarray(phi, dtype=np.float64)
    return np.arctan2((omega / omega_r) * np.tan(phi + chi), np.ones_like(phi))


def expected_phase_q_star(omega, omega_r, phi):
    """Closed form at q = 1/sqrt(2) as a ratio of four fixed coefficients.

    E = atan2(A cos(phi) + B sin(phi), C cos(phi) + D sin(phi)); agrees
    with the general form modulo pi. Serves as an independent cross-check
    of expected_phase at the bias-optimal window fraction.
    """
    w, wr = float(omega), float(omega_r)
    p = _SQRT2PI
    cg = math.cos(p * w / wr)
    sg = math.sin(p * w / wr)
    c = math.cos(p)
    s = math.sin(p)
    s2 = math.sin(2.0 * p)
    a_c = 2.0 * w * cg * (p * c - s) + w * s2 - 2.0 * p * (w - wr * s * sg)
    b_c = 2.0 * p * wr * cg * s - 2.0 * wr * s * s + 2.0 * w * sg * (-p * c + s)
    c_c = 2.0 * p * w * cg * s + 2.0 * w * s * s - 2.0 * wr * sg * (p * c + s)
    d_c = -2.0 * wr * cg * (p * c + s) + wr * s2 + 2.0 * p * (wr - w * s * sg)
    phi = np.asarray(phi, dtype=np.float64)
    return np.arctan2(a_c * np.cos(phi) + b_c * np.sin(phi),
                      c_c * np.cos(phi) + d_c * np.sin(phi))


def angle_difference_mod_pi(x, y):
    """Magnitude of the angle difference x - y reduced modulo pi.

    The arctangent-ratio specializations are defined only up to a pi
    offset (their common scale factor can be negative), so cross-checks
    between closed forms compare angles this way.
    """
    d = (np.asarray(x) - np.asarray(y) + np.pi / 2.0) % np.pi - np.pi / 2.0
    return np.abs(d)


@dataclass(frozen=True)
class BiasProfile:
    """Expected-phase bias over one period of the true phase."""

    phi_grid: np.ndarray = field(repr=False)
    expected: np.ndarray = field(repr=False)   # unwrapped along the grid
    bias: np.ndarray = field(repr=False)
    mean_bias: float
    bias_variance: float


def phase_bias_profile(omega, omega_r, q, grid_size=1024) -> BiasProfile:
    """Bias curve E{phase} - phi over a uniform phi grid on [0, 2*pi).

    The expected phase is unwrapped along the grid and the whole-turn
    offset removed, so the bias is continuous and periodic. The variance
    over the grid (population variance) measures the periodic bias
    component, which is what perturbs the fitted slope; the mean is
    reported separately since a constant offset leaves the slope alone.
    """
    if grid_size < 16:
        raise ValueError(f"grid_size must be >= 16, got {grid_size}")
    phi = np.linspace(0.0, TWO_PI, int(grid_size), endpoint=False)
    e = np.unwrap(expected_phase(omega, omega_r, q, phi))
    bias = e - phi
    bias = bias - TWO_PI * np.round(np.mean(bias) / TWO_PI)
    return BiasProfile(
        phi_grid=phi,
        expected=bias + phi,
        bias=bias,
        mean_bias=float(np.mean(bias)),
        bias_variance=float(np.var(bias)),
    )


def q_sweep(omega, omega_r, q_min, q_max, steps, grid_size=512):
    """Periodic-bias variance vs window fraction q, with local minima.

    Returns
    -------
    (q_values, variances, minima)
        Arrays over the sweep plus the q locations of interior local
        minima of the sampled curve.
    """
    if not (0 < q_min < q_max):
        raise ValueError(f"need 0 < q_min < q_max, got [{q_min}, {q_max}]")
    if steps < 10:
        raise ValueError(f"steps must be >= 10, got {steps}")
    q_values = np.linspace(q_min, q_max, int(steps))
    variances = np.array(
        [phase_bias_profile(omega, omega_r, q, grid_size).bias_variance
         for q in q_values]
    )
    interior = (variances[1:-1] < variances[:-2]) & (variances[1:-1] < variances[2:])
    minima = q_values[1:-1][interior]
    return q_values, variances, minima
