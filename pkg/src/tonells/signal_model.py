"""Single-tone signal generation with additive white Gaussian noise.

The observed signal is y_i = B*sin(w*t_i + theta) + eps_i, equivalently
beta1*sin(w*t_i) + beta2*cos(w*t_i) + eps_i with beta1 = B*cos(theta),
beta2 = B*sin(theta). Noise level and SNR follow the convention
SNR = (B^2/2) / sigma^2, i.e. tone power over noise power.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_phase(x):
    """Wrap angle(s) to the interval (-pi, pi]."""
    return np.asarray(x) - TWO_PI * np.ceil((np.asarray(x) - np.pi) / TWO_PI)


@dataclass(frozen=True)
class ToneParams:
    """Amplitude, angular frequency (rad/s) and start phase of a pure tone."""

    amplitude: float
    omega: float
    phase: float = 0.0

    def __post_init__(self):
        if not (self.amplitude > 0):
            raise ValueError(f"amplitude must be > 0, got {self.amplitude}")
        if not (self.omega > 0):
            raise ValueError(f"omega must be > 0, got {self.omega}")
        if not np.isfinite(self.phase):
            raise ValueError("phase must be finite")
        object.__setattr__(self, "phase", float(wrap_phase(self.phase)))

    @classmethod
    def from_hz(cls, amplitude, freq_hz, phase=0.0):
        return cls(amplitude, TWO_PI * freq_hz, phase)

    @property
    def freq_hz(self):
        return self.omega / TWO_PI

    @property
    def beta1(self):
        """Coefficient of sin(w*t) in the quadrature decomposition."""
        return self.amplitude * np.cos(self.phase)

    @property
    def beta2(self):
        """Coefficient of cos(w*t) in the quadrature decomposition."""
        return self.amplitude * np.sin(self.phase)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise level; sigma = 0 means noiseless."""

    sigma: float

    def __post_init__(self):
        if not (self.sigma >= 0):
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    @classmethod
    def from_snr_db(cls, amplitude, snr_db):
        return cls(snr_to_noise_sigma(amplitude, snr_db))

    @classmethod
    def noiseless(cls):
        return cls(0.0)

    def snr_linear(self, amplitude):
        """SNR = (B^2/2)/sigma^2; infinite when noiseless."""
        if self.sigma == 0.0:
            return np.inf
        return (amplitude * amplitude / 2.0) / (self.sigma * self.sigma)

    def snr_db(self, amplitude):
        return 10.0 * np.log10(self.snr_linear(amplitude))


@dataclass
class SampledSignal:
    """Uniformly sampled real time series.

    Sample i corresponds to time start_time + i/sample_rate exactly; no
    accumulated-sum time stamps, so long records do not drift.
    """

    sample_rate: float
    start_time: float
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not (self.sample_rate > 0):
            raise ValueError(f"sample_rate must be > 0, got {self.sample_rate}")
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValueError("samples must be a 1-D sequence with length >= 1")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    def __len__(self):
        return self.samples.size

    @property
    def duration(self):
        return self.samples.size / self.sample_rate

    def times(self):
        """Sample time stamps (s), computed as start_time + i/sample_rate."""
        return self.start_time + np.arange(self.samples.size) / self.sample_rate


def snr_to_noise_sigma(amplitude, snr_db):
    """Noise sigma that yields the requested SNR (dB) for tone amplitude B.

    Inverts SNR = (B^2/2)/sigma^2 with SNR = 10^(snr_db/10).
    """
    if not (amplitude > 0):
        raise ValueError(f"amplitude must be > 0, got {amplitude}")
    if not np.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite, got {snr_db}")
    return float(np.sqrt(amplitude * amplitude / (2.0 * 10.0 ** (snr_db / 10.0))))


def noise_sigma_to_snr_db(amplitude, sigma):
    """Inverse of snr_to_noise_sigma (round-trips to ~1e-12 relative)."""
    if not (amplitude > 0):
        raise ValueError(f"amplitude must be > 0, got {amplitude}")
    if not (sigma > 0):
        raise ValueError(f"sigma must be > 0, got {sigma}")
    return float(10.0 * np.log10(amplitude * amplitude / (2.0 * sigma * sigma)))


def trial_rng(root_seed, trial_index=None):
    """Deterministic per-trial random generator.

    Streams for distinct (root_seed, trial_index) pairs are independent by
    construction: the pair seeds a numpy SeedSequence, which guarantees
    well-separated PCG64 streams. Identical pairs reproduce identical
    sequences bit for bit on one build.
    """
    if trial_index is None:
        entropy = root_seed
    elif np.ndim(root_seed) == 0:
        entropy = (int(root_seed), int(trial_index))
    else:
        entropy = tuple(int(s) for s in root_seed) + (int(trial_index),)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def tone_values(tone: ToneParams, t):
    """Evaluate the noiseless tone B*sin(w*t + theta) at times t."""
    return tone.amplitude * np.sin(tone.omega * np.asarray(t) + tone.phase)


def generate_noisy_tone(tone: ToneParams, noise: NoiseSpec, sample_rate, duration,
                        seed, start_time=0.0) -> SampledSignal:
    """Generate a sampled tone with i.i.d. zero-mean Gaussian noise.

    Parameters
    ----------
    tone : ToneParams
    noise : NoiseSpec
    sample_rate : float
        Sample rate Fs (Hz).
    duration : float
        Record length (s); the sample count is round(duration*Fs) and must
        be >= 1.
    seed : int or tuple of int
        Root seed (optionally with a trial index) for the noise stream.
    start_time : float
        Time of the first sample (s).

    Returns
    -------
    SampledSignal
    """
    n = int(round(duration * sample_rate))
    if n < 1:
        raise ValueError(
            f"duration*sample_rate must be >= 1, got {duration * sample_rate:.3g}"
        )
    t = start_time + np.arange(n) / sample_rate
    y = tone_values(tone, t)
    if noise.sigma > 0.0:
        rng = trial_rng(seed)
        y = y + rng.normal(0.0, noise.sigma, n)
    return SampledSignal(sample_rate=sample_rate, start_time=start_time, samples=y)
