"""Command-line front end.

Frequencies are given in Hz at the CLI and converted to rad/s internally;
variances in reports are Hz^2. Exit status 2 signals insufficient data for
an estimate.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .errors import InsufficientDataError, ToneLlsError
from .estimator import (
    EstimatorConfig,
    FrequencyTracker,
    Q_STAR,
    estimate_frequency_batch,
)
from .experiments import (
    ExperimentRow,
    ExperimentSpec,
    emit_figure_data,
    run_bias_experiment,
    run_comparison,
    run_mse_experiment,
)
from .signal_model import TWO_PI, NoiseSpec, ToneParams, generate_noisy_tone
from .signal_io import read_signal, write_signal
from .theory import q_sweep

EXIT_INSUFFICIENT_DATA = 2


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="tonells",
        description="Single-tone frequency estimation via two-stage linear "
                    "least squares: simulation, estimation, tracking and "
                    "Monte Carlo experiment tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a noisy single-tone signal file")
    p.add_argument("--f", type=float, required=True, help="tone frequency (Hz)")
    p.add_argument("--fr", type=float, default=None,
                   help="reference frequency (Hz); accepted for symmetry with "
                        "estimate/track, not used in generation")
    p.add_argument("--amp", type=float, default=1.0, help="tone amplitude")
    p.add_argument("--theta", type=float, default=0.0, help="start phase (rad)")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--snr-db", type=float, help="SNR in dB")
    group.add_argument("--noiseless", action="store_true")
    p.add_argument("--fs", type=float, required=True, help="sample rate (Hz)")
    p.add_argument("--duration", type=float, required=True, help="record length (s)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True,
                   help="output file (.csv, or raw float64 + JSON sidecar)")

    p = sub.add_parser("estimate", help="batch frequency estimate from a file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--fr", type=float, required=True, help="reference frequency (Hz)")
    p.add_argument("--q", type=float, default=Q_STAR)
    p.add_argument("--tn", type=float, default=None,
                   help="time per estimate t_N (s); default: whole record")
    p.add_argument("--snr-db", type=float, default=None,
                   help="attach the predicted variance for this SNR")

    p = sub.add_parser("track", help="streaming estimates as CSV on stdout")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--fr", type=float, required=True)
    p.add_argument("--q", type=float, default=Q_STAR)
    p.add_argument("--tn", type=float, required=True, help="time per estimate (s)")
    p.add_argument("--retune", action="store_true",
                   help="re-center the reference on each estimate")

    p = sub.add_parser("montecarlo", help="run an experiment table")
    p.add_argument("--spec", default=None, help="TOML experiment spec")
    p.add_argument("--kind", default=None,
                   help="experiment kind when building the spec from flags")
    p.add_argument("--f", type=float, default=None)
    p.add_argument("--fr", type=float, default=None)
    p.add_argument("--fs", type=float, default=1e7)
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--tn", type=float, default=None)
    p.add_argument("--settling", type=float, default=None)
    p.add_argument("--q", type=float, default=Q_STAR)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true",
                   help="include wall-time column (breaks byte-identical reruns)")
    p.add_argument("--out", required=True, help="report CSV path")

    p = sub.add_parser("bias-sweep", help="periodic-bias variance vs q as CSV")
    p.add_argument("--f", type=float, required=True)
    p.add_argument("--fr", type=float, required=True)
    p.add_argument("--qmin", type=float, required=True)
    p.add_argument("--qmax", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("compare", help="reference estimator vs a baseline")
    p.add_argument("--baseline", choices=("nls", "dpll"), required=True)
    p.add_argument("--spec", required=True, help="TOML experiment spec")
    p.add_argument("--out", required=True)
    p.add_argument("--trace-dir", default=None,
                   help="also write startup/jump scenario traces here (dpll)")
    p.add_argument("--timing", action="store_true")

    return parser


def _cmd_simulate(args):
    tone = ToneParams(args.amp, TWO_PI * args.f, args.theta)
    noise = NoiseSpec.noiseless() if args.noiseless else NoiseSpec.from_snr_db(
        args.amp, args.snr_db
    )
    signal = generate_noisy_tone(tone, noise, args.fs, args.duration, args.seed)
    write_signal(args.out, signal)
    print(f"wrote {len(signal)} samples at {args.fs:g} Hz to {args.out}")
    return 0


def _cmd_estimate(args):
    signal = read_signal(args.infile)
    config = EstimatorConfig(
        omega_r=TWO_PI * args.fr,
        sample_rate=signal.sample_rate,
        q=args.q,
        block_time=args.tn,
    )
    snr = None if args.snr_db is None else 10.0 ** (args.snr_db / 10.0)
    est = estimate_frequency_batch(signal, config, snr=snr)
    d = est.diagnostics
    print(f"f_hat_hz: {est.f_hat:.6f}")
    print(f"estimate_time_s: {est.estimate_time:.9g}")
    print(f"windows_used: {d.windows_used}")
    print(f"samples_used: {d.samples_used}")
    print(f"samples_discarded: {d.samples_discarded}")
    print(f"block_time_realized_s: {d.block_time_realized:.9g}")
    print(f"q_eff: {d.q_eff:.6f}")
    print(f"tracking_margin: {d.tracking_margin:.4f}")
    print(f"in_tracking_range: {d.in_tracking_range}")
    if d.predicted_variance_hz2 is not None:
        print(f"predicted_variance_hz2: {d.predicted_variance_hz2:.6g}")
    return 0


def _cmd_track(args):
    signal = read_signal(args.infile)
    config = EstimatorConfig(
        omega_r=TWO_PI * args.fr,
        sample_rate=signal.sample_rate,
        q=args.q,
        block_time=args.tn,
        retune=args.retune,
    )
    tracker = FrequencyTracker(config, start_time=signal.start_time)
    sys.stdout.write("time,f_hat\n")
    for est in tracker.extend(signal.samples):
        sys.stdout.write(f"{est.estimate_time:.9g},{est.f_hat:.6f}\n")
    return 0


def _spec_from_args(args):
    if args.spec:
        return ExperimentSpec.from_toml(args.spec)
    if args.kind is None or args.f is None or args.fr is None:
        raise ValueError("montecarlo needs --spec, or --kind with --f and --fr")
    row = ExperimentRow(
        f_hz=args.f, fr_hz=args.fr, fs_hz=args.fs, snr_db=args.snr_db,
        block_time=args.tn, settling_time=args.settling, q=args.q,
    )
    return ExperimentSpec(kind=args.kind, rows=(row,), trials=args.trials,
                          root_seed=args.seed, workers=args.workers)


def _cmd_montecarlo(args):
    spec = _spec_from_args(args)
    if args.spec and args.trials is not None:
        spec = replace(spec, trials=args.trials)
    if args.spec and args.workers != 1:
        spec = replace(spec, workers=args.workers)
    if spec.kind == "bias-table":
        report = run_bias_experiment(spec)
    elif spec.kind == "mse-table":
        report = run_mse_experiment(spec)
    elif spec.kind in ("compare-nls", "compare-dpll"):
        report = run_comparison(spec)
    elif spec.kind == "bias-sweep":
        p = spec.params
        _write_sweep(args.out, p["f"], p["fr"], p.get("qmin", 0.3),
                     p.get("qmax", 2.3), int(p.get("steps", 2000)))
        print(f"wrote {args.out}")
        return 0
    elif spec.kind == "fig-data":
        p = dict(spec.params)
        fig = p.pop("fig")
        emit_figure_data(fig, args.out, **p)
        print(f"wrote {args.out}")
        return 0
    else:
        raise ValueError(f"unsupported kind {spec.kind}")
    report.write_csv(args.out, include_timing=args.timing)
    print(f"wrote {len(report.rows)} row(s) to {args.out}")
    return 0


def _write_sweep(path, f, fr, qmin, qmax, steps):
    qs, variances, minima = q_sweep(TWO_PI * f, TWO_PI * fr, qmin, qmax, steps)
    with open(path, "w", newline="") as fh:
        fh.write(f"# f={f:.6g} fr={fr:.6g}\n")
        fh.write("# minima: " + " ".join(f"{m:.6g}" for m in minima) + "\n")
        fh.write("q,bias_variance\n")
        for q, v in zip(qs, variances):
            fh.write(f"{q:.9g},{v:.9g}\n")


def _cmd_bias_sweep(args):
    _write_sweep(args.out, args.f, args.fr, args.qmin, args.qmax, args.steps)
    print(f"wrote {args.out}")
    return 0


def _cmd_compare(args):
    spec = ExperimentSpec.from_toml(args.spec)
    expected = f"compare-{args.baseline}"
    if spec.kind != expected:
        raise ValueError(f"spec kind {spec.kind!r} does not match --baseline "
                         f"{args.baseline!r}")
    report = run_comparison(spec, trace_dir=args.trace_dir)
    report.write_csv(args.out, include_timing=args.timing)
    print(f"wrote {len(report.rows)} row(s) to {args.out}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "track": _cmd_track,
    "montecarlo": _cmd_montecarlo,
    "bias-sweep": _cmd_bias_sweep,
    "compare": _cmd_compare,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT_DATA
    except (ToneLlsError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
