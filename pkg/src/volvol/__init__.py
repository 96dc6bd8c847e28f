"""Weak vol-of-vol expansion pricing for forward-variance models.

The functional core lives in the submodules; :mod:`volvol.estimators`
wraps the main entry points in scikit-learn style estimators.
"""
from .bs_engine import (BaseLaw, CallPayoff, ConstantPayoff, DigitalPayoff, PutPayoff,
                        SmoothPayoff, base_price, log_spot_derivative, log_spot_derivatives,
                        total_variance)
from .coefficients import (CoeffTable, atm_skew, c0_mu, c0_uu, c0_xu, first_order_coeff_table,
                           implied_vol_first_order, second_order_coeff_table, sigma1)
from .curves import AnalyticCurve, FlatCurve, PiecewiseLinearCurve, eval_curve
from .errors import (ConfigurationError, DomainError, FactorizationError, SingularityError,
                     UnsupportedOrderError, VolVolError)
from .estimators import ExpansionPricer, MonteCarloPricer, SkewTermStructure
from .expansion import ConvergenceStudy, ExpansionResult, convergence_study, expand_price
from .full_model import mc_price, mc_price_sweep, simulate_spot_variance
from .kernels import (ExpSumKernel, ExponentialKernel, PowerKernel, TabulatedKernel,
                      double_kernel_integral, eval_kernel, markovian_lift)
from .mc_engine import (MCEstimate, PathGrid, estimate_coefficient, estimate_coefficients,
                        estimate_moments, forest_term_xm, simulate_paths)
from .models import ModelSpec, SigmaTilde
from .polynomials import bell, enumerate_tnk, hermite

__version__ = "0.1.0"
