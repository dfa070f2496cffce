"""Stage 2: frequency from a sequence of wrapped phase estimates.

The wrapped phases are first detrended by the reference ramp w_r*t_k,
unwrapped so consecutive differences lie in (-pi, pi], and re-trended.
This keeps the inter-window increment ambiguity-free whenever the true
offset satisfies |w - w_r| < pi*F_phi. An affine model [1 t] is then
fitted; the slope is the frequency estimate. The fit is realized as a
single-pass weighted sum with precomputed slope weights, equivalent to the
normal-equations solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularDesignError
from .signal_model import wrap_phase

_REL_SPACING_TOL = 1e-9


@dataclass
class PhaseSeries:
    """Uniformly spaced phase estimates, wrapped or unwrapped."""

    times: np.ndarray
    phases: np.ndarray
    wrapped: bool

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.phases = np.asarray(self.phases, dtype=np.float64)
        if self.times.ndim != 1 or self.times.size < 1:
            raise ValueError("times must be a 1-D sequence with length >= 1")
        if self.times.shape != self.phases.shape:
            raise ValueError("times and phases must have equal length")
        if self.times.size >= 2:
            dt = np.diff(self.times)
            dt_nom = dt[0]
            if dt_nom <= 0:
                raise ValueError("times must be strictly increasing")
            if np.max(np.abs(dt - dt_nom)) > _REL_SPACING_TOL * dt_nom:
                raise ValueError("times must be uniformly spaced")

    def __len__(self):
        return self.times.size

    @property
    def phase_rate(self):
        """Estimate rate F_phi = 1/(t_{k+1} - t_k) (Hz)."""
        if self.times.size < 2:
            raise ValueError("need >= 2 entries to define a phase rate")
        return 1.0 / (self.times[1] - self.times[0])


@dataclass(frozen=True)
class AffineFit:
    """Offset/slope fit of phase vs time with its 2x2 inverse Gram matrix."""

    offset: float           # rad, phase at t = 0
    slope: float            # rad/s
    gram_inverse: np.ndarray = field(repr=False)


def unwrap_phase_series(series: PhaseSeries, omega_r) -> PhaseSeries:
    """Unwrap wrapped phases by detrending against the reference ramp.

    The detrended residuals psi_k = wrap(phi_k - w_r*t_k) advance by only
    (w - w_r)*t_n per step, so integer-2*pi corrections are unambiguous for
    |w - w_r| < pi*F_phi. Larger offsets alias: the unwrapped slope then
    differs from the true one by an integer multiple of 2*pi*F_phi.
    """
    if not series.wrapped:
        raise ValueError("series is already unwrapped")
    if len(series) < 2:
        raise ValueError(f"need >= 2 phase estimates to unwrap, got {len(series)}")
    ramp = omega_r * series.times
    psi = wrap_phase(series.phases - ramp)
    steps = wrap_phase(np.diff(psi))
    unwrapped = np.concatenate(([psi[0]], psi[0] + np.cumsum(steps))) + ramp
    return PhaseSeries(times=series.times.copy(), phases=unwrapped, wrapped=False)


def slope_weights(times):
    """Weights w_k of the single-pass slope extractor.

    Identical to J22*t_k + J21 from the inverse Gram of [1 t]; computed in
    the centered frame for numerical stability. They satisfy sum(w) = 0 and
    sum(w*t) = 1.
    """
    t = np.asarray(times, dtype=np.float64)
    tc = t - t.mean()
    denom = tc @ tc
    if denom <= 0.0 or not np.isfinite(denom):
        raise SingularDesignError("all time stamps are equal; slope is undefined")
    return tc / denom


def _gram_inverse(times):
    """Inverse of [[N, sum t], [sum t, sum t^2]] in the original time frame.

    Built from the centered-frame inverse and the exact affine reparam
    t = t' + t0, which keeps the result accurate for large time offsets.
    """
    t = np.asarray(times, dtype=np.float64)
    n = t.size
    t0 = t.mean()
    tc = t - t0
    stt = tc @ tc
    if stt <= 0.0 or not np.isfinite(stt):
        raise SingularDesignError("all time stamps are equal; design is singular")
    j_c = np.array([[1.0 / n, 0.0], [0.0, 1.0 / stt]])
    u_inv = np.array([[1.0, -t0], [0.0, 1.0]])
    return u_inv @ j_c @ u_inv.T


def fit_frequency(series: PhaseSeries):
    """Fit phase = offset + slope*t; the slope is the frequency estimate.

    Parameters
    ----------
    series : PhaseSeries
        Unwrapped phases, N >= 2.

    Returns
    -------
    (AffineFit, float)
        The fit and the slope omega_hat (rad/s).
    """
    if series.wrapped:
        raise ValueError("fit_frequency requires an unwrapped series")
    if len(series) < 2:
        raise ValueError(f"need >= 2 phase estimates, got {len(series)}")
    t = series.times
    p = series.phases
    w = slope_weights(t)
    slope = float(w @ p)
    offset = float(p.mean() - slope * t.mean())
    fit = AffineFit(offset=offset, slope=slope, gram_inverse=_gram_inverse(t))
    return fit, slope
