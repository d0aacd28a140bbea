"""Random fields on the unit sphere driven by non-local equations.

Spectral (Karhunen-Loeve) solutions, subordinator time changes, and angular
power spectrum analytics for equations with a convolution-type derivative in
time and a generalized (Bernstein / Riesz-Bessel) Laplacian in space.
"""

__version__ = "0.1.0"

from .fields import (IsotropicSpectrum, SolutionParams, apply_generalized_laplacian,
                     coordinate_change_estimate, heat_semigroup, residual_check,
                     sample_gaussian_field, solve_field)
from .special import (LaplaceTransformFn, laplace_invert, mittag_leffler,
                      upper_incomplete_gamma_neg)
from .sphere import (HarmonicCoeffs, SphericalGrid, SphericalPoint, analyze,
                     eval_at_points, eval_ylm, legendre_q, sample_sphere_bm,
                     synthesize)
from .spectrum import (SpectrumReport, asymptotic_decay, build_report, cl_bound,
                       empirical_cl, higher_moments, spectrum_laplace,
                       theoretical_cl_t, variance)
from .symbols import (BernsteinSymbol, SpectralSymbol, UnsupportedSymbolError,
                      custom, gamma_subordinator, geometric_stable, levy_tail,
                      linear, phi_eval, riesz_bessel, spectral_eval, stable,
                      stable_with_drift, symbol_from_json, symbol_to_json,
                      tempered_stable)
from .timechange import (PathExhaustedError, SubordinatorPath, TimeChangeSample,
                         UnsupportedMethodError, convolution_derivative,
                         inverse_passage, inverse_passage_samples, ltilde,
                         ltilde_mc, neg_moment, neg_moment_mc, sample_subordinator,
                         sample_tau, tau_samples)

__all__ = [name for name in dir() if not name.startswith("_")]
