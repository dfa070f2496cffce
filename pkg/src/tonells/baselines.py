"""Reference estimators: batch nonlinear least squares and an online DPLL.

The NLS estimator maximizes the concentrated objective C(w) =
||A(w) b*(w)||^2, where b*(w) is the per-frequency quadrature LLS fit;
eliminating the linear amplitudes this way makes the search
one-dimensional. A coarse grid scan brackets the peak and golden-section
iterations refine it.

The DPLL is a classical second-order loop: multiplier phase detector
against an internally generated quadrature oscillator, proportional-plus-
integral loop filter, and an NCO. Gains derive from a damping ratio and a
natural frequency chosen as w_n = 4/(zeta * settling_time), the 2%%
settling heuristic. A frequency step within the lock-in range (~2*zeta*w_n)
is tracked without cycle slips; beyond it the loop slips and the lock
indicator drops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConvergenceError, SearchBoundaryError
from .estimator import EstimateDiagnostics, FrequencyEstimate
from .signal_model import TWO_PI, SampledSignal

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class NlsConfig:
    """Search window and refinement settings for the concentrated-cost scan."""

    center_omega: float            # initial frequency guess (rad/s)
    half_width: float              # search half-width (rad/s)
    grid_resolution: float | None = None   # coarse step (rad/s); default 2*pi/(8*T)
    tolerance: float = TWO_PI * 1e-4       # refinement width (rad/s)
    max_iterations: int = 200

    def __post_init__(self):
        if not (self.tolerance > 0):
            raise ValueError("tolerance must be > 0")
        if self.grid_resolution is not None and not (
            self.grid_resolution < self.half_width
        ):
            raise ValueError("grid resolution must be smaller than the half-width")
        if not (self.center_omega - self.half_width > 0):
            raise ValueError("search window must exclude omega = 0")


def concentrated_objective(signal: SampledSignal, omega):
    """Fitted-signal power ||A(w) b*(w)||^2 at trial frequencies omega.

    Equals y'A (A'A)^-1 A'y, so maximizing it minimizes the residual power
    over amplitudes and frequency jointly. Accepts a scalar or an array of
    trial frequencies.
    """
    w = np.atleast_1d(np.asarray(omega, dtype=np.float64))
    tau = np.arange(len(signal)) / signal.sample_rate
    out = np.empty(w.size)
    y = signal.samples
    chunk = max(1, int(4e6 // max(len(signal), 1)))
    for lo in range(0, w.size, chunk):
        ww = w[lo:lo + chunk]
        arg = tau[:, None] * ww[None, :]
        s = np.sin(arg)
        c = np.cos(arg)
        g11 = np.einsum("ij,ij->j", s, s)
        g12 = np.einsum("ij,ij->j", s, c)
        g22 = np.einsum("ij,ij->j", c, c)
        vs = y @ s
        vc = y @ c
        det = g11 * g22 - g12 * g12
        out[lo:lo + chunk] = (g22 * vs * vs - 2.0 * g12 * vs * vc
                              + g11 * vc * vc) / det
    return float(out[0]) if np.ndim(omega) == 0 else out


def nls_estimate(signal: SampledSignal, config: NlsConfig) -> FrequencyEstimate:
    """Maximize the concentrated objective by grid scan + golden-section.

    Raises
    ------
    SearchBoundaryError
        If the coarse-grid maximum falls on the search boundary.
    ConvergenceError
        If refinement does not reach the tolerance in max_iterations.
    """
    if len(signal) < 4:
        raise ValueError(f"need >= 4 samples, got {len(signal)}")
    duration = len(signal) / signal.sample_rate
    step = config.grid_resolution or TWO_PI / (8.0 * duration)
    lo = config.center_omega - config.half_width
    hi = config.center_omega + config.half_width
    grid = np.arange(lo, hi + step, step)
    values = concentrated_objective(signal, grid)
    k = int(np.argmax(values))
    if k == 0 or k == grid.size - 1:
        raise SearchBoundaryError(
            f"objective maximum at the search boundary ({grid[k] / TWO_PI:.6g} Hz); "
            "widen the search window"
        )

    a, b = grid[k - 1], grid[k + 1]
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1 = concentrated_objective(signal, x1)
    f2 = concentrated_objective(signal, x2)
    iterations = 0
    while b - a > config.tolerance:
        iterations += 1
        if iterations > config.max_iterations:
            raise ConvergenceError(
                f"golden-section width {b - a:.3g} rad/s after "
                f"{config.max_iterations} iterations (tolerance {config.tolerance:.3g})"
            )
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = concentrated_objective(signal, x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = concentrated_objective(signal, x1)
    omega_hat = 0.5 * (a + b)
    diag = EstimateDiagnostics(
        windows_used=1,
        samples_used=len(signal),
        samples_discarded=0,
        block_time_realized=duration,
        q_eff=float("nan"),
        tracking_half_range_hz=config.half_width / TWO_PI,
        tracking_margin=abs(omega_hat - config.center_omega) / config.half_width,
        in_tracking_range=True,
    )
    return FrequencyEstimate(
        omega_hat=float(omega_hat),
        estimate_time=signal.start_time + (len(signal) - 1) / signal.sample_rate,
        diagnostics=diag,
    )


@dataclass(frozen=True)
class DpllConfig:
    """Second-order loop tuned by damping and settling time.

    natural_freq defaults to 4/(damping * settling_time); the phase-detector
    gain is amplitude/2, so gains are normalized for the expected tone
    amplitude.
    """

    center_omega: float
    settling_time: float
    sample_rate: float
    damping: float = 1.0 / math.sqrt(2.0)
    amplitude: float = 1.0
    lock_threshold: float = math.pi / 4.0   # filtered phase-error magnitude
    lock_level: float = 0.125               # minimum filtered quadrature amplitude
    lp_cutoff_fraction: float = 0.25        # lock-filter cutoff as fraction of w_n

    def __post_init__(self):
        if not (self.damping > 0):
            raise ValueError("damping must be > 0")
        if not (self.settling_time > 0):
            raise ValueError("settling_time must be > 0")
        natural = self.natural_freq
        if not (natural < TWO_PI * self.sample_rate):
            raise ValueError(
                f"natural frequency {natural:.3g} rad/s must sit far below the "
                f"sample rate"
            )

    @property
    def natural_freq(self):
        return 4.0 / (self.damping * self.settling_time)

    @property
    def gains(self):
        """(kp, ki) of the proportional-plus-integral loop filter.

        The detector output is pre-normalized by 2/amplitude so its small-
        error gain is unity; the loop then realizes kp = 2*zeta*w_n and
        ki = w_n^2 directly.
        """
        wn = self.natural_freq
        return 2.0 * self.damping * wn, wn * wn


@dataclass(frozen=True)
class DpllResult:
    """Per-sample NCO frequency trajectory and lock indicator."""

    times: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)
    locked: np.ndarray = field(repr=False)

    @property
    def freq_hz(self):
        return self.omega / TWO_PI

    def settled_mean_hz(self, fraction=0.1):
        """Mean output frequency over the final fraction of the record."""
        n = max(1, int(round(fraction * self.omega.size)))
        return float(np.mean(self.omega[-n:])) / TWO_PI

    def lock_fraction(self, start=0, stop=None):
        return float(np.mean(self.locked[start:stop] != 0))


def dpll_track(signal: SampledSignal, config: DpllConfig) -> DpllResult:
    """Run the loop over a record; divergence shows up in the lock indicator."""
    kp, ki = config.gains
    dt = 1.0 / signal.sample_rate
    lp_alpha = 1.0 - math.exp(-config.natural_freq * config.lp_cutoff_fraction * dt)
    omega, locked = _kernels.dpll_run(
        np.ascontiguousarray(signal.samples, dtype=np.float64),
        dt,
        config.center_omega,
        kp,
        ki,
        2.0 / config.amplitude,
        lp_alpha,
        config.lock_level,
        config.lock_threshold,
    )
    return DpllResult(times=signal.times(), omega=omega, locked=locked)
