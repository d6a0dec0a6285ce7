"""netopt: optimal time-net generation and certification for the weighted
quadratic discretization error of stochastic integrals."""

__version__ = "0.1.0"

from .errors import (BadCutoffError, DivergentSeriesError, DomainError,
                     InfiniteValueError, InsufficientDataError,
                     MassOutOfRangeError, MonotonicityViolationError,
                     NetoptError, NotIntegrableError, QuadratureFailure,
                     SnapTooCoarseError, TooLargeError)
from .quadrature import QuadratureConfig, integrate, integrate_to_one
from .weightfn import (ConstantWeight, HermiteSeriesWeight, LogPowerWeight,
                       PowerWeight, ShiftedWeight, TabulatedWeight,
                       WeightFunction, monotone_envelope, parse_weight_spec)
from .nets import (NetScore, TimeNet, balance_cutoff, equidistant,
                   log_power_cutoff, regular_net, score, truncated_net)
from .optimizer import (Estimate, OptResult, OptimizerConfig,
                        brute_force_best, estimate_best, optimal_net_dp,
                        refine_local, stationarity_residual)
from .rates import (RateRow, RateTable, RateVerdict, check_power_floor,
                    classify, fit_exponent, probe_two_term_bound, scan,
                    two_term_bound)
from .hermite import (HermiteCoefficients, as_weightfunction,
                      check_series_sandwich, gamma_integral, hermite_eval,
                      hermite_series, log_decay_coeffs, log_series_ratio,
                      log_series_value, power_mixture_ratio, weight_sq_s,
                      weight_sq_w)
from .mcsim import (CallPayoff, EquivalenceReport, HermiteSeriesPayoff,
                    IdentityPayoff, McEstimate, Model, Payoff, SimConfig,
                    SquarePayoff, compare_equivalence, conditional_F, delta,
                    h_functional, parse_payoff, path_residuals,
                    simulate_error, weight_from_payoff)

__all__ = [name for name in dir() if not name.startswith("_")]
