"""Stage 1: per-window instantaneous phase estimation.

One window of n samples is fitted by linear least squares against the
quadrature pair sin(w_r*tau), cos(w_r*tau) at a reference frequency w_r,
with window-local times tau = i/Fs restarting at zero for every window.
The fitted coefficients give the wrapped phase of the signal at the window
start via a quadrant-aware arctangent. At run time the fit reduces to two
running sums against precomputed reference tables and a precomputed 2x2
inverse; there is no matrix solve per window.

The window length is the nearest integer sample count to q reference
cycles; the realized fraction q_eff = n*w_r/(2*pi*Fs) is what all
downstream arithmetic uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateWindowError, UndefinedPhaseError, WindowTooShortError
from .signal_model import TWO_PI, wrap_phase

GRAM_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class ReferenceConfig:
    """Reference frequency and realized window geometry."""

    omega_r: float       # rad/s
    q: float             # requested fraction of a reference cycle per window
    sample_rate: float   # Hz
    n_window: int        # samples per window
    q_eff: float         # realized fraction, n*omega_r/(2*pi*Fs)

    @property
    def window_time(self):
        """Window duration t_n = n/Fs (s)."""
        return self.n_window / self.sample_rate

    @property
    def phase_rate(self):
        """Rate at which phase estimates are produced, F_phi = 1/t_n (Hz)."""
        return self.sample_rate / self.n_window


@dataclass(frozen=True)
class PhaseEstimate:
    """Wrapped phase at the window start plus the raw quadrature fit."""

    phase: float
    window_start_time: float
    b1: float
    b2: float


@dataclass(frozen=True)
class PhaseWindowSolver:
    """Precomputed reference tables and inverse Gram matrix for one window shape."""

    config: ReferenceConfig
    sin_table: np.ndarray = field(repr=False)
    cos_table: np.ndarray = field(repr=False)
    gram: np.ndarray = field(repr=False)
    gram_inverse: np.ndarray = field(repr=False)

    def projections(self, samples):
        """The two running sums sum(sin(w_r*tau_i)*y_i), sum(cos(w_r*tau_i)*y_i)."""
        y = np.asarray(samples, dtype=np.float64)
        if y.shape != self.sin_table.shape:
            raise ValueError(
                f"expected exactly {self.config.n_window} samples, got {y.size}"
            )
        return float(self.sin_table @ y), float(self.cos_table @ y)

    def estimate(self, samples, window_start_time=0.0) -> PhaseEstimate:
        return estimate_phase_window(self, samples, window_start_time)


def window_sample_count(omega_r, q, sample_rate):
    """Nearest integer sample count to q reference cycles: round(Fs*2*pi*q/w_r)."""
    return int(round(sample_rate * TWO_PI * q / omega_r))


def build_phase_solver(omega_r, q, sample_rate) -> PhaseWindowSolver:
    """Construct the per-window solver for one (w_r, q, Fs) configuration.

    The Gram matrix is accumulated from the exact discrete sums over the
    reference tables, never from the continuum integral approximation, so
    sub-cycle windows (q < 1) are handled exactly.

    Raises
    ------
    WindowTooShortError
        If the rounded window holds fewer than 2 samples.
    DegenerateWindowError
        If the Gram matrix condition number exceeds 1e12.
    """
    if not (omega_r > 0):
        raise ValueError(f"omega_r must be > 0, got {omega_r}")
    if not (q > 0):
        raise ValueError(f"q must be > 0, got {q}")
    if not (sample_rate > omega_r / np.pi):
        raise ValueError(
            f"sample_rate {sample_rate} must exceed two samples per reference "
            f"cycle ({omega_r / np.pi:.6g} Hz)"
        )
    n = window_sample_count(omega_r, q, sample_rate)
    if n < 2:
        raise WindowTooShortError(
            f"window of q={q} cycles at w_r={omega_r:.6g} rad/s, "
            f"Fs={sample_rate:.6g} Hz holds only {n} sample(s); need >= 2"
        )
    tau = np.arange(n) / sample_rate
    sin_table = np.sin(omega_r * tau)
    cos_table = np.cos(omega_r * tau)
    gram = np.array(
        [
            [sin_table @ sin_table, sin_table @ cos_table],
            [sin_table @ cos_table, cos_table @ cos_table],
        ]
    )
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > GRAM_CONDITION_LIMIT:
        raise DegenerateWindowError(
            f"reference Gram matrix condition number {cond:.3g} exceeds "
            f"{GRAM_CONDITION_LIMIT:.0e} (q={q}, Fs={sample_rate:.6g})"
        )
    det = gram[0, 0] * gram[1, 1] - gram[0, 1] * gram[1, 0]
    gram_inverse = (
        np.array([[gram[1, 1], -gram[0, 1]], [-gram[1, 0], gram[0, 0]]]) / det
    )
    config = ReferenceConfig(
        omega_r=float(omega_r),
        q=float(q),
        sample_rate=float(sample_rate),
        n_window=n,
        q_eff=n * omega_r / (TWO_PI * sample_rate),
    )
    return PhaseWindowSolver(
        config=config,
        sin_table=sin_table,
        cos_table=cos_table,
        gram=gram,
        gram_inverse=gram_inverse,
    )


def estimate_phase_window(solver: PhaseWindowSolver, samples,
                          window_start_time=0.0) -> PhaseEstimate:
    """Fit one window and return the wrapped phase at the window start.

    Computed single-pass from the two reference-table projections and the
    precomputed inverse Gram matrix; the phase is the quadrant-aware
    arctangent of (b2, b1), wrapped to (-pi, pi].
    """
    s, c = solver.projections(samples)
    j = solver.gram_inverse
    b1 = j[0, 0] * s + j[0, 1] * c
    b2 = j[1, 0] * s + j[1, 1] * c
    if b1 == 0.0 and b2 == 0.0:
        raise UndefinedPhaseError(
            f"both quadrature projections vanish at t={window_start_time:.6g}"
        )
    phase = float(wrap_phase(math.atan2(b2, b1)))
    return PhaseEstimate(
        phase=phase, window_start_time=float(window_start_time), b1=b1, b2=b2
    )
