"""Batch frequency estimator and the O(1)-per-sample streaming tracker.

Both paths share the same arithmetic: per-window quadrature projections
against precomputed reference tables (stage 1), detrend-unwrap of the
wrapped window phases, and a precomputed-weight slope fit (stage 2).
Windows tumble (consecutive, non-overlapping), and a frequency estimate
covers a block of N windows.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InsufficientDataError, TrackingRangeWarning
from .signal_model import TWO_PI, SampledSignal, wrap_phase
from .stage1 import PhaseWindowSolver, build_phase_solver
from .stage2 import PhaseSeries, fit_frequency, slope_weights, unwrap_phase_series

Q_STAR = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class EstimatorConfig:
    """Reference frequency, window fraction and block size for one estimator.

    Exactly one of ``block_time`` (t_N, seconds per estimate) or
    ``windows_per_estimate`` (N) may be given; when ``block_time`` is given
    the block is quantized to N = floor(t_N/t_n) whole windows and the
    realized time is reported in the estimate diagnostics. With neither,
    batch estimation uses every complete window in the record (the tracker
    requires an explicit block).
    """

    omega_r: float
    sample_rate: float
    q: float = Q_STAR
    block_time: float | None = None
    windows_per_estimate: int | None = None
    retune: bool = False

    def __post_init__(self):
        if self.block_time is not None and self.windows_per_estimate is not None:
            raise ValueError("give block_time or windows_per_estimate, not both")

    def build_solver(self) -> PhaseWindowSolver:
        return build_phase_solver(self.omega_r, self.q, self.sample_rate)

    def resolve_block(self, solver: PhaseWindowSolver) -> int | None:
        """Windows per estimate implied by this config, or None for whole-record."""
        if self.windows_per_estimate is not None:
            n_windows = int(self.windows_per_estimate)
        elif self.block_time is not None:
            n_windows = int(math.floor(self.block_time / solver.config.window_time))
        else:
            return None
        if n_windows < 2:
            raise ValueError(
                f"block holds {n_windows} window(s); need >= 2 phase estimates"
            )
        return n_windows


@dataclass(frozen=True)
class EstimateDiagnostics:
    windows_used: int
    samples_used: int
    samples_discarded: int
    block_time_realized: float
    q_eff: float
    tracking_half_range_hz: float
    tracking_margin: float          # |f_hat - f_r| / (F_phi/2); > 1 means aliased
    in_tracking_range: bool
    predicted_variance_hz2: float | None = None


@dataclass(frozen=True)
class FrequencyEstimate:
    """Angular frequency estimate with timing and window diagnostics."""

    omega_hat: float
    estimate_time: float            # time of the last consumed sample (s)
    diagnostics: EstimateDiagnostics = field(repr=False)

    @property
    def f_hat(self):
        """Estimated frequency in Hz, exactly omega_hat/(2*pi)."""
        return self.omega_hat / TWO_PI


# An aliased offset wraps back inside +-F_phi/2, so the estimate itself can
# only ever approach the boundary; estimates inside this guard band of it are
# ambiguous and trigger the (non-fatal) tracking-range warning.
TRACKING_GUARD = 0.95


def _diagnostics(solver, n_windows, samples_discarded, omega_hat, snr=None):
    cfg = solver.config
    half_range = 0.5 * cfg.phase_rate
    offset_hz = abs(omega_hat / TWO_PI - cfg.omega_r / TWO_PI)
    margin = offset_hz / half_range
    predicted = None
    if snr is not None and snr > 0:
        t_block = n_windows * cfg.window_time
        predicted = 12.0 / (cfg.sample_rate * t_block ** 3 * snr) / (TWO_PI ** 2)
    return EstimateDiagnostics(
        windows_used=n_windows,
        samples_used=n_windows * cfg.n_window,
        samples_discarded=samples_discarded,
        block_time_realized=n_windows * cfg.window_time,
        q_eff=cfg.q_eff,
        tracking_half_range_hz=half_range,
        tracking_margin=margin,
        in_tracking_range=margin <= TRACKING_GUARD,
        predicted_variance_hz2=predicted,
    )


def _warn_if_aliased(diag):
    if not diag.in_tracking_range:
        warnings.warn(
            f"estimated offset is {diag.tracking_margin:.2f}x the unambiguous "
            f"half-range of {diag.tracking_half_range_hz:.6g} Hz; a true offset "
            "beyond that range aliases the unwrapped slope by a multiple of "
            "2*pi*F_phi",
            TrackingRangeWarning,
            stacklevel=3,
        )


def estimate_frequency_batch(signal: SampledSignal, config: EstimatorConfig,
                             snr=None) -> FrequencyEstimate:
    """One frequency estimate from a sampled record.

    The record is partitioned into consecutive non-overlapping windows of n
    samples; a wrapped phase is fitted at each window start, the sequence
    is unwrapped against the reference ramp and an affine slope fit gives
    omega_hat. Trailing samples short of a full window are discarded and
    counted in the diagnostics, as are any windows beyond the configured
    block size.

    Parameters
    ----------
    signal : SampledSignal
    config : EstimatorConfig
    snr : float, optional
        Linear SNR; when given, the predicted estimator variance (Hz^2) is
        attached to the diagnostics.
    """
    solver = config.build_solver()
    n = solver.config.n_window
    n_avail = len(signal) // n
    if n_avail < 2:
        raise InsufficientDataError(
            f"record holds {n_avail} complete window(s) of {n} samples; need >= 2"
        )
    block = config.resolve_block(solver)
    n_windows = n_avail if block is None else min(block, n_avail)
    samples_used = n_windows * n
    phases, times = _window_phases(solver, signal.samples[:samples_used])
    omega_hat = _slope_from_wrapped(solver, times, phases)
    diag = _diagnostics(solver, n_windows, len(signal) - samples_used,
                        omega_hat, snr)
    _warn_if_aliased(diag)
    return FrequencyEstimate(
        omega_hat=omega_hat,
        estimate_time=signal.start_time + (samples_used - 1) / signal.sample_rate,
        diagnostics=diag,
    )


def block_frequency_estimates(signal: SampledSignal, config: EstimatorConfig,
                              snr=None) -> list[FrequencyEstimate]:
    """Batch-estimate every complete block of N windows in the record.

    Mirrors the tracker cadence: one estimate per N*n samples, timestamped
    at the block end.
    """
    solver = config.build_solver()
    block = config.resolve_block(solver)
    if block is None:
        raise ValueError("config must specify a block size for block estimates")
    n = solver.config.n_window
    block_samples = block * n
    n_blocks = len(signal) // block_samples
    out = []
    for i in range(n_blocks):
        start = i * block_samples
        sub = SampledSignal(
            sample_rate=signal.sample_rate,
            start_time=signal.start_time + start / signal.sample_rate,
            samples=signal.samples[start:start + block_samples],
        )
        out.append(estimate_frequency_batch(sub, config, snr=snr))
    return out


def _window_phases(solver: PhaseWindowSolver, samples):
    """Wrapped stage-1 phases of consecutive windows, record-local times."""
    cfg = solver.config
    n = cfg.n_window
    windows = np.asarray(samples, dtype=np.float64).reshape(-1, n)
    s = windows @ solver.sin_table
    c = windows @ solver.cos_table
    j = solver.gram_inverse
    b1 = j[0, 0] * s + j[0, 1] * c
    b2 = j[1, 0] * s + j[1, 1] * c
    phases = wrap_phase(np.arctan2(b2, b1))
    times = np.arange(windows.shape[0]) * cfg.window_time
    return phases, times


def _slope_from_wrapped(solver, times, phases):
    series = PhaseSeries(times=times, phases=phases, wrapped=True)
    unwrapped = unwrap_phase_series(series, solver.config.omega_r)
    _, omega_hat = fit_frequency(unwrapped)
    return omega_hat


class FrequencyTracker:
    """Streaming realization of the estimator: O(1) work per sample.

    Each pushed sample updates two multiply-accumulates against the
    precomputed reference tables; at window boundaries one arctangent,
    unwrap step and weighted-sum update run (the arctangent is deferred to
    the window rate, never the sample rate). Every N windows the tracker
    emits a FrequencyEstimate and resets its block state. With
    ``retune=True`` the reference is re-centered on each estimate and the
    tables are rebuilt.

    A tracker is single-writer: share nothing, or create one per stream.
    """

    def __init__(self, config: EstimatorConfig, start_time=0.0, snr=None):
        if config.block_time is None and config.windows_per_estimate is None:
            raise ValueError("tracker requires block_time or windows_per_estimate")
        self.config = config
        self.start_time = float(start_time)
        self.snr = snr
        self.samples_consumed = 0
        self._retune = bool(config.retune)
        self._setup(config.omega_r)

    def _setup(self, omega_r):
        cfg = self.config
        self.solver = build_phase_solver(omega_r, cfg.q, cfg.sample_rate)
        self.block_windows = cfg.resolve_block(self.solver)
        t_n = self.solver.config.window_time
        self._weights = slope_weights(np.arange(self.block_windows) * t_n)
        self._dpsi = omega_r * t_n
        self._state = np.zeros(4)
        self._counts = np.zeros(3, dtype=np.int64)

    @property
    def omega_r(self):
        """Current reference frequency (rad/s); changes only when retuning."""
        return self.solver.config.omega_r

    @property
    def block_samples(self):
        return self.block_windows * self.solver.config.n_window

    def push(self, sample) -> FrequencyEstimate | None:
        """Consume one sample; returns an estimate at block boundaries."""
        out = self.extend(np.array([sample], dtype=np.float64))
        return out[0] if out else None

    def extend(self, samples) -> list[FrequencyEstimate]:
        """Consume a chunk of samples, returning any estimates emitted."""
        y = np.ascontiguousarray(samples, dtype=np.float64)
        j = self.solver.gram_inverse
        out = []
        pos = 0
        while pos < y.size:
            consumed, emitted, omega = _kernels.run_tracker_chunk(
                y[pos:], self._state, self._counts,
                self.solver.sin_table, self.solver.cos_table,
                j[0, 0], j[0, 1], j[1, 0], j[1, 1],
                self._weights, self._dpsi,
            )
            pos += consumed
            self.samples_consumed += consumed
            if not emitted:
                break
            diag = _diagnostics(self.solver, self.block_windows, 0, omega, self.snr)
            _warn_if_aliased(diag)
            estimate_time = (
                self.start_time + (self.samples_consumed - 1) / self.config.sample_rate
            )
            out.append(FrequencyEstimate(omega_hat=omega,
                                         estimate_time=estimate_time,
                                         diagnostics=diag))
            if self._retune and omega > 0:
                self._setup(omega)
                j = self.solver.gram_inverse
        return out
