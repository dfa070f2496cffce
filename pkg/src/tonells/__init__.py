"""Single-tone frequency estimation by two cascaded linear least-squares fits.

Stage 1 fits each window of samples against quadrature references at a
guessed frequency and extracts a wrapped instantaneous phase; stage 2
unwraps the phase sequence and fits its slope, which is the frequency.
Both stages run either batch or streaming (O(1) work per sample). The
package also ships closed-form variance/bias predictions, NLS and DPLL
baselines, and a seeded Monte Carlo harness with a CLI front end.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .errors import (
    ConvergenceError,
    DegenerateWindowError,
    InsufficientDataError,
    SearchBoundaryError,
    SingularDesignError,
    ToneLlsError,
    TrackingRangeWarning,
    UndefinedPhaseError,
    WindowTooShortError,
)
from .signal_model import (
    NoiseSpec,
    SampledSignal,
    ToneParams,
    generate_noisy_tone,
    noise_sigma_to_snr_db,
    snr_to_noise_sigma,
    tone_values,
    trial_rng,
    wrap_phase,
)
from .signal_io import read_signal, write_signal
from .stage1 import (
    PhaseEstimate,
    PhaseWindowSolver,
    ReferenceConfig,
    build_phase_solver,
    estimate_phase_window,
)
from .stage2 import (
    AffineFit,
    PhaseSeries,
    fit_frequency,
    slope_weights,
    unwrap_phase_series,
)
from .estimator import (
    EstimatorConfig,
    FrequencyEstimate,
    FrequencyTracker,
    Q_STAR,
    block_frequency_estimates,
    estimate_frequency_batch,
)
from .theory import (
    BiasProfile,
    expected_phase,
    expected_phase_q_half,
    expected_phase_q_one,
    expected_phase_q_star,
    phase_bias_profile,
    predicted_freq_variance,
    predicted_freq_variance_general,
    predicted_freq_variance_hz2,
    predicted_phase_variance,
    q_sweep,
)
from .baselines import (
    DpllConfig,
    DpllResult,
    NlsConfig,
    concentrated_objective,
    dpll_track,
    nls_estimate,
)
from .experiments import (
    ExperimentReport,
    ExperimentRow,
    ExperimentSpec,
    emit_figure_data,
    make_jump_signal,
    run_bias_experiment,
    run_comparison,
    run_jump_scenario,
    run_mse_experiment,
)
