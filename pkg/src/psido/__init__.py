"""psido: desk-scale numerics for non-smooth pseudodifferential operators.

Quantize symbols, evaluate oscillatory integrals, measure function-space
norms and iterated commutators, and reconstruct the symbol of a black-box
linear operator with a class-membership verdict.
"""

__version__ = "0.1.0"

from .grid import (Grid, GridFunction, FourierConvention, forward_transform,
                   inverse_transform, modulate, translate, derivative,
                   lp_norm, bracket, gaussian, save_gridfunction,
                   load_gridfunction)
from .spaces import (DyadicPartition, NormReport, zygmund_norm, hoelder_norm,
                     bessel_norm, order_reduce, modulation_growth_check)
from .symbols import (Symbol, DoubleSymbol, SeminormTable, builtin,
                      weierstrass, smooth_seminorm, hoelder_class_table,
                      example_regularity_budget)
from .oscint import (Amplitude, Regularizer, OscResult, gaussian_regularizer,
                     compact_regularizer, ibp_apply, oscint_regularized,
                     oscint_ibp, oscint_iterated)
from .operators import (LinearOperator, MembershipReport, quantize,
                        quantize_double, multiplication, multiplier, identity,
                        compose, ad_x, ad_D, iterated_commutator, op_norm,
                        membership, operator_distance, probe_family)
from .characterize import (SmoothingFamily, RecoveredSymbol, smooth_member,
                           probe_double_symbol, reduce_double_symbol,
                           recover_symbol, compose_and_classify, blowup_probe)
from ._kernels import BACKEND

__all__ = [name for name in dir() if not name.startswith("_")]
