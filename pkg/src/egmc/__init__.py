"""Effective-geometry Monte Carlo toolkit for diffusion channels.

Simulates molecule absorption by 1D and 3D receivers with the conventional
Monte Carlo algorithm and its effective-geometry variant, benchmarks both
against the closed-form channel response, and calibrates the boundary-shift
coefficient alpha.
"""

__version__ = "0.1.0"

from .analytic import (AnalyticCurve, ChannelGeometry, alpha_analytic_1d,
                       cumulative_absorbed, discretize, hit_rate, peak_time,
                       pdf_pseudo_real)
from .calibration import (CalibrationResult, calibrate_1d,
                          calibrate_1d_averaged, calibrate_3d,
                          weighted_alpha_mean)
from .engines import (AbsorptionRecord, Receiver1D, RunConfig,
                      absorption_index_1d, default_step_count, run_1d, run_3d)
from .errors import (CalibrationError, ConfigError, EgmcError,
                     UndefinedStatisticError)
from .harness import ExperimentSpec, load_config, run_experiment
from .metrics import (ErrorReport, NoiseProfile, chi2_red, error_report,
                      isdcd, locality_check, poisson_noise_profile,
                      relative_inaccuracy)
from .streams import (ParticleEnsemble, RngStream, derive_seeds,
                      gaussian_increment, step_ensemble)

__all__ = [
    "__version__",
    "AnalyticCurve", "ChannelGeometry", "alpha_analytic_1d",
    "cumulative_absorbed", "discretize", "hit_rate", "peak_time",
    "pdf_pseudo_real",
    "CalibrationResult", "calibrate_1d", "calibrate_1d_averaged",
    "calibrate_3d", "weighted_alpha_mean",
    "AbsorptionRecord", "Receiver1D", "RunConfig", "absorption_index_1d",
    "default_step_count", "run_1d", "run_3d",
    "CalibrationError", "ConfigError", "EgmcError", "UndefinedStatisticError",
    "ExperimentSpec", "load_config", "run_experiment",
    "ErrorReport", "NoiseProfile", "chi2_red", "error_report", "isdcd",
    "locality_check", "poisson_noise_profile", "relative_inaccuracy",
    "ParticleEnsemble", "RngStream", "derive_seeds", "gaussian_increment",
    "step_ensemble",
]
