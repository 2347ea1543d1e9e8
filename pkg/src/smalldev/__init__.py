"""Small deviations of weighted stationary Gaussian sequences.

Computes the Karhunen-Loeve spectrum of ``(d_k U_k)`` for a moving-average
sequence ``U``, the constants of its eigenvalue and log small-ball
asymptotics, and several independent estimates of ``P(sum d_k^2 U_k^2 <= eps^2)``.
"""
__version__ = "0.1.0"

from .exceptions import (ConfigError, DomainError, EstimateFailure, ModelError, NumericError,
                         RegimeError, ResourceError, SmallDevError, UnsupportedError)
from .model import (AR1, IID, CoefficientWindow, Explicit, FiniteMA, TwoSidedGeometric,
                    WeightSequence, autocovariance, density_amplitude, materialize, weight_at)
from .operator import (Spectrum, TruncatedOperator, build, counting_function,
                       fit_decay_constant, spectrum)
from .smallball import (SmallDevEstimate, direct_sim_log_prob, exact_small_case_log_prob,
                        log_laplace, saddlepoint_log_prob, tilted_mc_log_prob)
from .theory import (TheoryConstants, constant_Bp, constant_C, delta_mu, predicted_eigenvalue,
                     predicted_log_smalldev, theory_constants)
from .estimators import SmallDevEstimator, SpectralDecayEstimator
