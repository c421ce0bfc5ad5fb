"""Streaming k-PCA via Oja's algorithm with two-phase step-size schedules,
plus the numerical toolkit that certifies its behavior: norm and subspace
utilities, finite-support stream models, a vectorized Monte Carlo suite
engine, closed-form error envelopes, and a benchmark CLI."""

__version__ = "0.1.0"

from ._batch import SuiteResult, run_suite
from .errors import ConfigError, OjakError
from .linalg import (
    ky_fan_2k_norm,
    schatten_norm,
    spectral_norm,
    subspace_distance,
)
from .oja import (
    CSV_HEADER,
    DEFAULT_GAMMA,
    ConstantProfile,
    RunTrace,
    StepSchedule,
    compute_schedule,
    gaussian_init,
    oja_step,
    run,
    warm_start_frame,
)
from .streams import (
    SpectralModel,
    distribution_from_config,
    ghost_couple,
    make_bounded_noise_model,
    make_finite_support,
    make_spiked_support,
    verify_assumptions,
)

__all__ = [
    "__version__",
    "SuiteResult",
    "run_suite",
    "ConfigError",
    "OjakError",
    "ky_fan_2k_norm",
    "schatten_norm",
    "spectral_norm",
    "subspace_distance",
    "CSV_HEADER",
    "DEFAULT_GAMMA",
    "ConstantProfile",
    "RunTrace",
    "StepSchedule",
    "compute_schedule",
    "gaussian_init",
    "oja_step",
    "run",
    "warm_start_frame",
    "SpectralModel",
    "distribution_from_config",
    "ghost_couple",
    "make_bounded_noise_model",
    "make_finite_support",
    "make_spiked_support",
    "verify_assumptions",
]
