"""Seeded Monte Carlo experiment runner and figure-data emission.

Every trial draws its noise and start phase from an independent generator
seeded by (root_seed, row_index, trial_index), so rows and trials can run
in any order (or in parallel) and reports are reproducible bit for bit.
In comparisons, the reference estimator and the baseline consume the same
record object per trial.

Nominal per-estimate times are realized as the nearest whole number of
windows (N = round(t_N/t_n)); the realized time is echoed in every report
row.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import math
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .baselines import DpllConfig, DpllResult, NlsConfig, dpll_track, nls_estimate
from .errors import ToneLlsError
from .estimator import EstimatorConfig, Q_STAR, estimate_frequency_batch, FrequencyTracker
from .signal_model import (
    TWO_PI,
    SampledSignal,
    snr_to_noise_sigma,
    tone_values,
    trial_rng,
    ToneParams,
)
from .stage1 import build_phase_solver
from .theory import phase_bias_profile, predicted_freq_variance_hz2, q_sweep

KINDS = ("bias-table", "mse-table", "compare-nls", "compare-dpll",
         "bias-sweep", "fig-data")


@dataclass(frozen=True)
class ExperimentRow:
    """One parameter row: signal, reference, and timing settings."""

    f_hz: float
    fr_hz: float
    fs_hz: float = 1e7
    snr_db: float | None = None            # None = noiseless
    block_time: float | None = None        # nominal t_N (s)
    settling_time: float | None = None     # DPLL settling; LLS uses settling/2
    q: float = Q_STAR

    @property
    def delta_f_hz(self):
        return self.f_hz - self.fr_hz

    def lls_block_time(self):
        if self.block_time is not None:
            return self.block_time
        if self.settling_time is not None:
            return self.settling_time / 2.0
        raise ValueError("row needs block_time or settling_time")


@dataclass(frozen=True)
class ExperimentSpec:
    """A table of rows plus trial count, seeding and experiment kind."""

    kind: str
    rows: tuple = ()
    trials: int | None = None
    phase_sweep: int = 64
    root_seed: int = 12345
    workers: int = 1
    params: dict = field(default_factory=dict)   # bias-sweep / fig-data settings

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; one of {KINDS}")
        object.__setattr__(self, "rows", tuple(self.rows))
        if self.trials is not None and self.trials < 1:
            raise ValueError("trials must be >= 1")

    def resolved_trials(self):
        if self.trials is not None:
            return self.trials
        return {"mse-table": 500, "compare-nls": 50, "compare-dpll": 50}.get(
            self.kind, 1
        )

    def to_dict(self):
        d = {
            "kind": self.kind,
            "rows": [asdict(r) for r in self.rows],
            "trials": self.trials,
            "phase_sweep": self.phase_sweep,
            "root_seed": self.root_seed,
            "params": self.params,
        }
        return d

    def spec_hash(self):
        """Short content hash identifying the resolved experiment."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    @classmethod
    def from_toml(cls, path):
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        rows = []
        for raw in data.get("rows", []):
            rows.append(
                ExperimentRow(
                    f_hz=float(raw["f"]),
                    fr_hz=float(raw["fr"]),
                    fs_hz=float(raw.get("fs", 1e7)),
                    snr_db=(float(raw["snr_db"]) if "snr_db" in raw else None),
                    block_time=(float(raw["tn"]) if "tn" in raw else None),
                    settling_time=(float(raw["settling"]) if "settling" in raw else None),
                    q=float(raw.get("q", Q_STAR)),
                )
            )
        return cls(
            kind=data["kind"],
            rows=tuple(rows),
            trials=data.get("trials"),
            phase_sweep=int(data.get("phase_sweep", 64)),
            root_seed=int(data.get("root_seed", 12345)),
            workers=int(data.get("workers", 1)),
            params=dict(data.get("params", {})),
        )


@dataclass
class RowResult:
    """Per-row statistics with the fully resolved parameter set echoed."""

    f_hz: float
    fr_hz: float
    delta_f_hz: float
    fs_hz: float
    snr_db: float | None
    q: float
    q_eff: float | None = None
    n_window: int | None = None
    windows_per_estimate: int | None = None
    block_time_nominal: float | None = None
    block_time_realized: float | None = None
    trials: int = 0
    mean_bias_hz: float | None = None
    variance_hz2: float | None = None
    std_hz: float | None = None
    mse_hz2: float | None = None
    predicted_variance_hz2: float | None = None
    baseline_std_hz: float | None = None
    std_ratio: float | None = None
    failures: int = 0
    error: str | None = None
    wall_time_s: float = 0.0


_COLUMNS = [f.name for f in RowResult.__dataclass_fields__.values()]  # type: ignore[attr-defined]


@dataclass
class ExperimentReport:
    """Report rows plus enough metadata to reproduce the run."""

    kind: str
    root_seed: int
    spec_hash: str
    trials: int
    rows: list

    def write_csv(self, path_or_file, include_timing=False):
        """Write the report as CSV with a '#'-prefixed metadata header.

        Timing is excluded by default so identical runs produce identical
        bytes; pass include_timing=True to append the wall-time column.
        """
        close = False
        if hasattr(path_or_file, "write"):
            fh = path_or_file
        else:
            fh = open(path_or_file, "w", newline="")
            close = True
        try:
            fh.write(f"# tool: tonells {__version__}\n")
            fh.write(f"# kind: {self.kind}\n")
            fh.write(f"# root_seed: {self.root_seed}\n")
            fh.write(f"# spec_hash: {self.spec_hash}\n")
            fh.write(f"# trials: {self.trials}\n")
            cols = [c for c in _COLUMNS if include_timing or c != "wall_time_s"]
            fh.write(",".join(cols) + "\n")
            for row in self.rows:
                values = []
                for c in cols:
                    v = getattr(row, c)
                    if v is None:
                        values.append("")
                    elif isinstance(v, float):
                        values.append(f"{v:.12g}")
                    else:
                        values.append(str(v))
                fh.write(",".join(values) + "\n")
        finally:
            if close:
                fh.close()


def _row_skeleton(row: ExperimentRow) -> RowResult:
    return RowResult(
        f_hz=row.f_hz,
        fr_hz=row.fr_hz,
        delta_f_hz=row.delta_f_hz,
        fs_hz=row.fs_hz,
        snr_db=row.snr_db,
        q=row.q,
    )


def _resolve_timing(row: ExperimentRow):
    """Solver plus the block size realizing the row's nominal t_N.

    The block is the *nearest* whole number of windows to the nominal
    time (never below 2), which keeps the realized estimate time as close
    as possible to the requested one.
    """
    solver = build_phase_solver(TWO_PI * row.fr_hz, row.q, row.fs_hz)
    t_n = solver.config.window_time
    nominal = row.lls_block_time()
    n_windows = max(2, int(round(nominal / t_n)))
    return solver, n_windows


def _estimator_config(row: ExperimentRow, n_windows):
    return EstimatorConfig(
        omega_r=TWO_PI * row.fr_hz,
        sample_rate=row.fs_hz,
        q=row.q,
        windows_per_estimate=n_windows,
    )


def _fill_timing(result: RowResult, row, solver, n_windows):
    result.q_eff = solver.config.q_eff
    result.n_window = solver.config.n_window
    result.windows_per_estimate = n_windows
    result.block_time_nominal = row.lls_block_time()
    result.block_time_realized = n_windows * solver.config.window_time


def _make_record(row: ExperimentRow, n_samples, theta, rng=None) -> SampledSignal:
    t = np.arange(n_samples) / row.fs_hz
    tone = ToneParams(1.0, TWO_PI * row.f_hz, theta)
    y = tone_values(tone, t)
    if row.snr_db is not None:
        sigma = snr_to_noise_sigma(1.0, row.snr_db)
        y = y + rng.normal(0.0, sigma, n_samples)
    return SampledSignal(sample_rate=row.fs_hz, start_time=0.0, samples=y)


def run_bias_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Noiseless frequency bias over a uniform sweep of start phases.

    The periodic phase-estimate bias makes the frequency error depend on
    the signal phase at the record start, so each row runs the batch
    estimator over ``phase_sweep`` equally spaced start phases and reports
    the mean and population variance of f_hat - f in Hz and Hz^2.
    """
    report = _new_report(spec)
    for row in spec.rows:
        result = _row_skeleton(row)
        t0 = time.perf_counter()
        try:
            solver, n_windows = _resolve_timing(row)
            _fill_timing(result, row, solver, n_windows)
            config = _estimator_config(row, n_windows)
            n_samples = n_windows * solver.config.n_window
            thetas = np.linspace(0.0, TWO_PI, spec.phase_sweep, endpoint=False)
            biases = np.empty(spec.phase_sweep)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                for i, theta in enumerate(thetas):
                    record = _make_record(row, n_samples, theta)
                    est = estimate_frequency_batch(record, config)
                    biases[i] = est.f_hat - row.f_hz
            result.trials = spec.phase_sweep
            result.mean_bias_hz = float(np.mean(biases))
            result.variance_hz2 = float(np.var(biases))
            result.std_hz = float(np.std(biases))
            result.mse_hz2 = float(np.mean(biases ** 2))
        except (ToneLlsError, ValueError) as exc:
            result.error = str(exc)
            result.failures = 1
        result.wall_time_s = time.perf_counter() - t0
        report.rows.append(result)
    return report


def _mse_trial(args):
    row, config, n_samples, root_seed, row_index, trial = args
    rng = trial_rng((root_seed, row_index), trial)
    theta = rng.uniform(-math.pi, math.pi)
    record = _make_record(row, n_samples, theta, rng)
    est = estimate_frequency_batch(record, config)
    return est.f_hat - row.f_hz


def run_mse_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Empirical MSE of f_hat over seeded noisy trials, next to the prediction.

    Per row, ``trials`` independent records are generated (root seed + row
    and trial indices), each with a random start phase and fresh AWGN at
    the row's SNR. Reports mean bias, population variance, MSE and the
    closed-form predicted variance at the nominal t_N.
    """
    report = _new_report(spec)
    trials = spec.resolved_trials()
    for row_index, row in enumerate(spec.rows):
        result = _row_skeleton(row)
        result.trials = trials
        t0 = time.perf_counter()
        try:
            if row.snr_db is None:
                raise ValueError("mse-table rows must specify snr_db")
            solver, n_windows = _resolve_timing(row)
            _fill_timing(result, row, solver, n_windows)
            config = _estimator_config(row, n_windows)
            n_samples = n_windows * solver.config.n_window
            args = [(row, config, n_samples, spec.root_seed, row_index, k)
                    for k in range(trials)]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                errors = np.array(_map_trials(_mse_trial, args, spec.workers))
            result.mean_bias_hz = float(np.mean(errors))
            result.variance_hz2 = float(np.var(errors))
            result.std_hz = float(np.std(errors))
            result.mse_hz2 = float(np.mean(errors ** 2))
            result.predicted_variance_hz2 = predicted_freq_variance_hz2(
                row.fs_hz, row.lls_block_time(), 10.0 ** (row.snr_db / 10.0)
            )
        except (ToneLlsError, ValueError) as exc:
            result.error = str(exc)
            result.failures = 1
        result.wall_time_s = time.perf_counter() - t0
        report.rows.append(result)
    return report


def _comparison_trial(args):
    (row, config, n_samples, root_seed, row_index, trial, baseline,
     record_samples) = args
    rng = trial_rng((root_seed, row_index), trial)
    theta = rng.uniform(-math.pi, math.pi)
    record = _make_record(row, record_samples, theta, rng)
    lls_record = SampledSignal(record.sample_rate, record.start_time,
                               record.samples[:n_samples])
    f_lls = estimate_frequency_batch(lls_record, config).f_hat
    if baseline == "nls":
        nls_cfg = NlsConfig(
            center_omega=TWO_PI * row.fr_hz,
            half_width=TWO_PI * max(4.0 * abs(row.delta_f_hz), 0.05 * row.fr_hz),
            tolerance=TWO_PI * 1e-3,
        )
        f_base = nls_estimate(lls_record, nls_cfg).f_hat
    else:
        dpll_cfg = DpllConfig(
            center_omega=TWO_PI * row.f_hz,
            settling_time=row.settling_time,
            sample_rate=row.fs_hz,
        )
        f_base = dpll_track(record, dpll_cfg).settled_mean_hz()
    return f_lls - row.f_hz, f_base - row.f_hz


def run_comparison(spec: ExperimentSpec, trace_dir=None) -> ExperimentReport:
    """Reference estimator vs a baseline on byte-identical records per trial.

    For ``compare-nls`` both estimators consume the same t_N-long record.
    For ``compare-dpll`` the record spans twice the settling time: the
    loop (centered on the true tone) is read out as the mean output over
    the final 10%, the reference estimator consumes its block of
    t_N = settling/2 from the record start. When ``trace_dir`` is given, a
    startup trace and a 400->405 kHz jump trace are also written as CSV.
    """
    if spec.kind not in ("compare-nls", "compare-dpll"):
        raise ValueError(f"run_comparison needs a compare-* kind, got {spec.kind}")
    baseline = spec.kind.split("-", 1)[1]
    report = _new_report(spec)
    trials = spec.resolved_trials()
    for row_index, row in enumerate(spec.rows):
        result = _row_skeleton(row)
        result.trials = trials
        t0 = time.perf_counter()
        try:
            solver, n_windows = _resolve_timing(row)
            _fill_timing(result, row, solver, n_windows)
            config = _estimator_config(row, n_windows)
            n_samples = n_windows * solver.config.n_window
            if baseline == "dpll":
                if row.settling_time is None:
                    raise ValueError("compare-dpll rows must specify settling_time")
                record_samples = max(n_samples,
                                     int(round(2.0 * row.settling_time * row.fs_hz)))
            else:
                record_samples = n_samples
            args = [(row, config, n_samples, spec.root_seed, row_index, k,
                     baseline, record_samples) for k in range(trials)]
            errs_lls, errs_base, failures = [], [], 0
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                for out in _map_trials(_comparison_trial, args, spec.workers,
                                       collect_errors=True):
                    if isinstance(out, Exception):
                        failures += 1
                        continue
                    errs_lls.append(out[0])
                    errs_base.append(out[1])
            result.failures = failures
            errs_lls = np.array(errs_lls)
            errs_base = np.array(errs_base)
            result.mean_bias_hz = float(np.mean(errs_lls))
            result.variance_hz2 = float(np.var(errs_lls))
            result.std_hz = float(np.std(errs_lls))
            result.mse_hz2 = float(np.mean(errs_lls ** 2))
            result.baseline_std_hz = float(np.std(errs_base))
            if result.baseline_std_hz > 0:
                result.std_ratio = result.std_hz / result.baseline_std_hz
            if row.snr_db is not None:
                result.predicted_variance_hz2 = predicted_freq_variance_hz2(
                    row.fs_hz, row.lls_block_time(), 10.0 ** (row.snr_db / 10.0)
                )
        except (ToneLlsError, ValueError) as exc:
            result.error = str(exc)
            result.failures = trials
        result.wall_time_s = time.perf_counter() - t0
        report.rows.append(result)
    if baseline == "dpll" and trace_dir is not None:
        _write_scenario_traces(spec, trace_dir)
    return report


def _map_trials(fn, args, workers, collect_errors=False):
    """Run trials serially or across processes, preserving trial order."""
    if workers <= 1:
        out = []
        for a in args:
            if collect_errors:
                try:
                    out.append(fn(a))
                except ToneLlsError as exc:
                    out.append(exc)
            else:
                out.append(fn(a))
        return out
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, a) for a in args]
        out = []
        for fut in futures:
            if collect_errors:
                try:
                    out.append(fut.result())
                except ToneLlsError as exc:
                    out.append(exc)
            else:
                out.append(fut.result())
        return out


def _new_report(spec: ExperimentSpec) -> ExperimentReport:
    return ExperimentReport(
        kind=spec.kind,
        root_seed=spec.root_seed,
        spec_hash=spec.spec_hash(),
        trials=spec.resolved_trials(),
        rows=[],
    )


# --- scenario traces -------------------------------------------------------

def make_jump_signal(f0_hz, f1_hz, t_jump, duration, sample_rate, snr_db,
                     seed, theta0=0.0, amplitude=1.0) -> SampledSignal:
    """Tone whose frequency steps from f0 to f1 at t_jump, phase-continuous."""
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    phase = np.where(
        t < t_jump,
        TWO_PI * f0_hz * t,
        TWO_PI * f0_hz * t_jump + TWO_PI * f1_hz * (t - t_jump),
    )
    y = amplitude * np.sin(phase + theta0)
    if snr_db is not None:
        rng = trial_rng(seed)
        y = y + rng.normal(0.0, snr_to_noise_sigma(amplitude, snr_db), n)
    return SampledSignal(sample_rate=sample_rate, start_time=0.0, samples=y)


def run_jump_scenario(fr_hz=400e3, f0_hz=400e3, f1_hz=405e3, settling_time=2e-3,
                      sample_rate=1e7, snr_db=27.0, seed=2024, q=Q_STAR):
    """Startup and frequency-jump behavior of the tracker vs the DPLL.

    The streaming estimator (reference fixed at fr) and a DPLL centered on
    f0 with the given settling time both consume one record whose
    frequency steps f0 -> f1 halfway through. Returns the tracker
    estimates, the loop trajectory and the timing of the jump.
    """
    block_time = settling_time / 2.0
    t_jump = max(4.0 * settling_time, 4.0 * block_time)
    duration = 2.0 * t_jump
    rng = trial_rng(seed)
    signal = make_jump_signal(
        f0_hz, f1_hz, t_jump, duration, sample_rate, snr_db,
        seed=(seed, 1), theta0=rng.uniform(-math.pi, math.pi),
    )
    config = EstimatorConfig(
        omega_r=TWO_PI * fr_hz, sample_rate=sample_rate, q=q,
        block_time=block_time,
    )
    tracker = FrequencyTracker(config)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        estimates = tracker.extend(signal.samples)
    dpll_cfg = DpllConfig(
        center_omega=TWO_PI * f0_hz,
        settling_time=settling_time,
        sample_rate=sample_rate,
    )
    loop = dpll_track(signal, dpll_cfg)
    return {
        "signal": signal,
        "t_jump": t_jump,
        "f0_hz": f0_hz,
        "f1_hz": f1_hz,
        "estimates": estimates,
        "dpll": loop,
        "settling_time": settling_time,
    }


def _write_scenario_traces(spec: ExperimentSpec, trace_dir, stride=100):
    """Startup (pre-jump) and full jump traces for both estimators."""
    from pathlib import Path

    trace_dir = Path(trace_dir)
    trace_dir.mkdir(parents=True, exist_ok=True)
    settling = spec.params.get("scenario_settling", 2e-3)
    scenario = run_jump_scenario(settling_time=settling, seed=spec.root_seed)
    loop: DpllResult = scenario["dpll"]
    t_jump = scenario["t_jump"]
    header = (f"# jump {scenario['f0_hz']:.0f} -> {scenario['f1_hz']:.0f} Hz "
              f"at t={t_jump:.6g} s, settling {settling:.6g} s\n")

    def write_dpll(path, stop=None):
        with open(path, "w", newline="") as fh:
            fh.write(header)
            fh.write("time,f_hz,locked\n")
            limit = loop.omega.size if stop is None else stop
            for i in range(0, limit, stride):
                fh.write(f"{loop.times[i]:.9g},{loop.freq_hz[i]:.6f},"
                         f"{int(loop.locked[i])}\n")

    def write_lls(path, t_max=None):
        with open(path, "w", newline="") as fh:
            fh.write("time,f_hat\n")
            for est in scenario["estimates"]:
                if t_max is None or est.estimate_time < t_max:
                    fh.write(f"{est.estimate_time:.9g},{est.f_hat:.6f}\n")

    n_jump = int(np.searchsorted(loop.times, t_jump))
    write_dpll(trace_dir / "scenario_startup_dpll.csv", stop=n_jump)
    write_lls(trace_dir / "scenario_startup_lls.csv", t_max=t_jump)
    write_dpll(trace_dir / "scenario_jump_dpll.csv")
    write_lls(trace_dir / "scenario_jump_lls.csv")


# --- figure data -----------------------------------------------------------

def emit_figure_data(kind, path_or_file, **params):
    """Write plot-ready CSV curves from the closed-form bias analysis.

    kind = "fig-3": expected phase vs phi for each q (default 0.5 and q*).
    kind = "fig-4": bias vs phi for each q (default 0.5, q*, 1).
    kind = "fig-5": periodic-bias variance vs q with 2000-step default.
    """
    close = False
    if hasattr(path_or_file, "write"):
        fh = path_or_file
    else:
        fh = open(path_or_file, "w", newline="")
        close = True
    try:
        if kind == "fig-3":
            f = params.get("f_hz", 20e3)
            fr = params.get("fr_hz", 16e3)
            qs = params.get("qs", (0.5, Q_STAR))
            grid = int(params.get("grid", 1024))
            _write_phi_curves(fh, f, fr, qs, grid, expected=True)
        elif kind == "fig-4":
            f = params.get("f_hz", 18000.0)
            fr = params.get("fr_hz", 18180.0)
            qs = params.get("qs", (0.5, Q_STAR, 1.0))
            grid = int(params.get("grid", 1024))
            _write_phi_curves(fh, f, fr, qs, grid, expected=False)
        elif kind == "fig-5":
            f = params.get("f_hz", 300300.0)
            fr = params.get("fr_hz", 300000.0)
            q_min = params.get("q_min", 0.3)
            q_max = params.get("q_max", 2.3)
            steps = int(params.get("steps", 2000))
            qs, variances, _ = q_sweep(TWO_PI * f, TWO_PI * fr, q_min, q_max, steps)
            fh.write(f"# f={f:.6g} fr={fr:.6g}\n")
            fh.write("q,bias_variance\n")
            for q, v in zip(qs, variances):
                fh.write(f"{q:.9g},{v:.9g}\n")
        else:
            raise ValueError(f"unknown figure kind {kind!r}")
    finally:
        if close:
            fh.close()


def _write_phi_curves(fh, f, fr, qs, grid, expected):
    profiles = [phase_bias_profile(TWO_PI * f, TWO_PI * fr, q, grid) for q in qs]
    fh.write(f"# f={f:.6g} fr={fr:.6g}\n")
    header = "phi," + ",".join(f"q={q:.6g}" for q in qs)
    fh.write(header + "\n")
    for i in range(grid):
        vals = [p.expected[i] if expected else p.bias[i] for p in profiles]
        fh.write(f"{profiles[0].phi_grid[i]:.9g},"
                 + ",".join(f"{v:.9g}" for v in vals) + "\n")
