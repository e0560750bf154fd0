"""ratelab: exact-oracle convergence-rate laboratory for linear SPDEs
(stochastic wave, heat, and linearized Cahn-Hilliard-Cook) with additive
Gaussian noise on the unit interval."""

from .spectral_core import (EigenBasis, CovarianceSpec, build_basis, hdot_norm,
                            schatten, trace, check_aq, trace_condition)
from .models import (ModelSpec, GaussianLaw, JointLaw, wave_group_mode,
                     parabolic_factor, mild_law, trace_identity_check,
                     holder_check, regularity_norm)
from .schemes import (RationalScheme, DiscreteLawRequest, make_scheme,
                      mode_step_wave, evolve_discrete, discrete_law,
                      interpolated_error_sup, stability_sup)
from .fem1d import (FemSpace, CrossGramian, assemble_fem, fem_eigs,
                    cross_gramian, fem_projections, fully_discrete_law,
                    semidiscrete_law, joint_vs_semidiscrete)
from .noise import NoisePath, sample_path, coarsen
from .error_lab import (TestFunctional, RateReport, McEstimate,
                        sine_functional, quadratic_functional,
                        gauss_exp_functional, expectation, weak_error_exact,
                        strong_error_exact, temporal_joint_law,
                        ito_isometry_error, weak_error_mc, strong_error_mc,
                        representation_check, fit_rate)

__version__ = "0.1.0"
