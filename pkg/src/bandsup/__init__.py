"""Band-limited isotropic Gaussian fields on the sphere and their suprema."""

from .spectrum import (BandConfig, BandWindow, DegenerateBandError, PowerSpectrum,
                       SpectrumDomainError, band_normalization, evaluate_spectrum,
                       full_field_lambda, second_spectral_moment, window_eval)
from .rng import RNGStream
from .synthesis import (CovarianceProfile, FieldSample, HarmonicCoefficients, covariance_profile,
                        dudley_metric_bounds, evaluate_field, normalize_beta, sample_alm)
from .geometry import (EpsilonNet, EntropyReport, SpherePoint, SpherePoints, build_net,
                       covering_number, dudley_entropy_integral, geodesic_distance)

__version__ = "0.1.0"

__all__ = [
    "BandConfig", "BandWindow", "DegenerateBandError", "PowerSpectrum", "SpectrumDomainError",
    "band_normalization", "evaluate_spectrum", "full_field_lambda", "second_spectral_moment",
    "window_eval", "RNGStream", "CovarianceProfile", "FieldSample", "HarmonicCoefficients",
    "covariance_profile", "dudley_metric_bounds", "evaluate_field", "normalize_beta", "sample_alm",
    "EpsilonNet", "EntropyReport", "SpherePoint", "SpherePoints", "build_net", "covering_number",
    "dudley_entropy_integral", "geodesic_distance",
]
