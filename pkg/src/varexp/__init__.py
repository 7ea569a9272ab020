"""Numerics for fractional Sobolev spaces with variable exponents.

Adaptive quadrature for the fractional modular, its s -> 1 limit, Luxemburg
norms and the divergence run for the embedding counterexample.
"""

__version__ = "0.1.0"

from .exponent import (ExponentField, LogHolderReport, check_log_holder, counterexample_exponent,
                       exponent_from_spec, jump_exponent, make_constant_exponent,
                       make_radial_exponent, sine_exponent)
from .fields import (Cell, Domain, ScalarField, bump, cell_decomposition, counterexample_field,
                     constant_field, domain_from_spec, field_from_spec, linear_field, tent_field,
                     zero_field)
from .quadrature import (ModularProfile, ModularResult, QuadratureSpec, fractional_modular,
                         integrate_domain, integrate_sphere, pointwise_fs)
from .spaces import (KConstant, NormResult, NotInSpaceError, k_constant, k_gamma,
                     lebesgue_modular, lebesgue_norm, luxemburg, sandwich_check, seminorm,
                     sobolev_modular)
from .experiments import (DivergenceReport, SweepReport, bbm_sweep, counterexample_run,
                          far_field_decay, majorant_check, pointwise_limit_study)
