"""Signal file formats.

Two interchangeable on-disk representations:

* CSV with header ``t,y`` ('.' decimal separator), one sample per row.
* Headerless little-endian float64 raw samples plus a JSON sidecar
  (``<file>.json``) recording sample_rate, start_time and n_samples.

Files with a ``.csv`` suffix use the CSV form; any other suffix uses raw.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .signal_model import SampledSignal

_REL_SPACING_TOL = 1e-6


def write_signal_csv(path, signal: SampledSignal):
    t = signal.times()
    with open(path, "w", newline="") as fh:
        fh.write("t,y\n")
        for ti, yi in zip(t, signal.samples):
            fh.write(f"{ti:.17g},{yi:.17g}\n")


def read_signal_csv(path) -> SampledSignal:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns t,y")
    t, y = data[:, 0], data[:, 1]
    if len(t) < 2:
        raise ValueError(f"{path}: need at least two samples to infer sample rate")
    dt = np.diff(t)
    dt_med = float(np.median(dt))
    if dt_med <= 0:
        raise ValueError(f"{path}: time column must be strictly increasing")
    if np.max(np.abs(dt - dt_med)) > _REL_SPACING_TOL * dt_med:
        raise ValueError(f"{path}: sample times are not uniformly spaced")
    return SampledSignal(sample_rate=1.0 / dt_med, start_time=float(t[0]), samples=y)


def _sidecar_path(path):
    return Path(str(path) + ".json")


def write_signal_raw(path, signal: SampledSignal):
    signal.samples.astype("<f8").tofile(path)
    meta = {
        "sample_rate": signal.sample_rate,
        "start_time": signal.start_time,
        "n_samples": int(signal.samples.size),
    }
    with open(_sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def read_signal_raw(path) -> SampledSignal:
    sidecar = _sidecar_path(path)
    if not sidecar.exists():
        raise FileNotFoundError(f"missing sidecar metadata file {sidecar}")
    with open(sidecar) as fh:
        meta = json.load(fh)
    y = np.fromfile(path, dtype="<f8")
    if y.size != meta["n_samples"]:
        raise ValueError(
            f"{path}: sidecar records {meta['n_samples']} samples, file has {y.size}"
        )
    return SampledSignal(
        sample_rate=float(meta["sample_rate"]),
        start_time=float(meta.get("start_time", 0.0)),
        samples=y,
    )


def write_signal(path, signal: SampledSignal):
    """Write CSV for a .csv suffix, raw float64 + sidecar otherwise."""
    if Path(path).suffix.lower() == ".csv":
        write_signal_csv(path, signal)
    else:
        write_signal_raw(path, signal)


def read_signal(path) -> SampledSignal:
    if Path(path).suffix.lower() == ".csv":
        return read_signal_csv(path)
    return read_signal_raw(path)
