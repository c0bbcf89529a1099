"""Numerical laboratory for nonlinear generalized tensor fields on chart domains."""
from .basic_space import (combine, contract, difference, full_pairing, hat_lie, hat_pullback, iota, restrict,
                          sigma, tensor_product)
from .distributions import TensorDistribution, delta, heaviside, principal_value, rho_embed
from .geometry import ChartDomain, Diffeomorphism, NForm, SmoothTensorField
from .kernels import build_kernel, bump_profile, evaluate_kernel
from .quotient_dynamics import SweepConfig, is_moderate, is_negligible
from .rates import estimate_order, geometric_grid

__version__ = "0.1.0"
